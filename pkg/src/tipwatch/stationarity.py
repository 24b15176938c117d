"""KPSS level-stationarity test and the differencing order it implies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooShort, ZeroVariance

KPSS_CRIT_5PCT = 0.463
MIN_KPSS_LENGTH = 12


@dataclass(frozen=True)
class KpssResult:
    statistic: float
    lags: int
    critical_value: float = KPSS_CRIT_5PCT

    @property
    def reject_stationarity(self) -> bool:
        return self.statistic > self.critical_value


def auto_lags(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss(values, lags: int | str = "auto", critical_value: float = KPSS_CRIT_5PCT) -> KpssResult:
    """Level-stationarity KPSS statistic with a Bartlett-kernel long-run variance.

    ``eta = sum(S_t^2) / (n^2 * s2_lr)`` where ``S_t`` are partial sums of the
    demeaned series and ``s2_lr`` is the Newey-West estimate with ``lags``
    autocovariances (``floor(4 (n/100)^(1/4))`` when ``"auto"``).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < MIN_KPSS_LENGTH:
        raise TooShort(f"KPSS needs at least {MIN_KPSS_LENGTH} points, got {n}")
    e = x - x.mean()
    gamma0 = np.dot(e, e) / n
    scale = max(np.max(np.abs(x)), 1e-300)
    if gamma0 <= (1e-14 * scale) ** 2:
        raise ZeroVariance("KPSS is undefined for a constant series")
    L = auto_lags(n) if lags == "auto" else int(lags)
    if L < 0:
        raise ValueError("lags must be >= 0")
    L = min(L, n - 1)
    s2 = gamma0
    for k in range(1, L + 1):
        s2 += 2.0 * (1.0 - k / (L + 1.0)) * np.dot(e[k:], e[:-k]) / n
    S = np.cumsum(e)
    eta = float(np.dot(S, S) / (n * n * s2))
    return KpssResult(eta, L, critical_value)


def choose_d(values, d_max: int = 2, lags: int | str = "auto",
             critical_value: float = KPSS_CRIT_5PCT) -> int:
    """Smallest d <= d_max whose d-th difference passes KPSS (d_max if none does).

    A constant difference is treated as stationary: nothing is left to remove.
    """
    if d_max not in (0, 1, 2):
        raise ValueError("d_max must be 0, 1 or 2")
    x = np.asarray(values, dtype=float)
    if x.size < MIN_KPSS_LENGTH + d_max:
        raise TooShort(f"choose_d needs at least {MIN_KPSS_LENGTH + d_max} points")
    for d in range(d_max):
        try:
            if not kpss(np.diff(x, n=d), lags, critical_value).reject_stationarity:
                return d
        except ZeroVariance:
            return d
    return d_max
