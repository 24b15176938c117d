"""Sliding-window ARMA model selection and the Upsilon stability indicator.

For each window the differencing order is chosen by KPSS, ARMA(p, q) models are
fitted to the differenced data, and the best model by BIC is compared against
two base models, white noise ARMA(0,0) and the discretised Langevin process
ARMA(1,0):

    dBIC0 = BIC(0,0) - BIC(p,q),   dBIC1 = BIC(1,0) - BIC(p,q)
    Upsilon = 1 - exp(-min(|dBIC0|, |dBIC1|) / tau)

When the ARMA(1,0) fit is inadmissible only dBIC0 is used. Variance and lag-k
autocorrelation of the linearly detrended window are reported alongside.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import arma
from .arma import FitOptions, FittedArma
from .errors import (
    AllCandidatesFailed,
    DegenerateInput,
    LagTooLarge,
    TipwatchError,
    TooShort,
)
from .series import TimeSeries, Window, detrend_linear, windows, write_columns
from .stationarity import choose_d

ARMA00 = "ARMA00"
ARMA10 = "ARMA10"

RESULT_COLUMNS = (
    "end_time", "d", "p", "q", "delta_bic0", "delta_bic1", "base_used", "upsilon",
    "order", "persistence", "significant", "variance", "autocorr_lag1", "status",
)


@dataclass(frozen=True)
class SelectionConfig:
    p_max: int = 5
    q_max: int = 5
    d_max: int = 2
    tau: int = 350
    stride: int = 1
    delta_bic_significance: float = 2.0
    exclude_pure_ma: bool = False
    stepwise: bool = False
    count_sigma2: bool = False
    kpss_lags: int | str = "auto"
    seed: int = 0
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1 (ARMA(1,0) is a base model)")
        if self.q_max < 0:
            raise ValueError("q_max must be >= 0")
        if self.d_max not in (0, 1, 2):
            raise ValueError("d_max must be 0, 1 or 2")
        if self.tau < 20:
            raise ValueError(f"tau must be >= 20, got {self.tau}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.count_sigma2 != self.fit_options.count_sigma2:
            object.__setattr__(self, "fit_options",
                               FitOptions(**{**self.fit_options.__dict__,
                                             "count_sigma2": self.count_sigma2}))


@dataclass
class Selection:
    best: FittedArma
    d: int
    table: dict[tuple[int, int], FittedArma]

    def bic(self, order) -> float:
        return self.table[order].bic


def _eligible(f: FittedArma, exclude_pure_ma: bool) -> bool:
    if not (f.admissible and f.converged):
        return False
    return not (exclude_pure_ma and f.p == 0 and f.q >= 1)


def _rank(f: FittedArma):
    # ties: fewer parameters, then fewer MA terms, then fewer AR terms
    return (f.bic, f.p + f.q, f.q, f.p)


def _fit_into(table, y, p, q, d, seed, options):
    if (p, q) in table:
        return table[(p, q)]
    warm = []
    for nested in ((p - 1, q), (p, q - 1)):
        if nested in table:
            w = arma.nested_start(table[nested], p, q)
            if w is not None and w.size:
                warm.append(w)
    child = np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key + (p, q))
    try:
        f = arma.fit(y, p, q, seed=child, warm_starts=warm, d=d, options=options)
    except (TooShort, DegenerateInput):
        return None
    table[(p, q)] = f
    return f


def select_best(data, config: SelectionConfig, seed=None) -> Selection:
    """Choose d by KPSS, fit candidate orders on the differenced window and
    return the admissible, converged candidate of least BIC."""
    x = np.asarray(data, dtype=float)
    if x.var() < 1e-12 * x.mean() ** 2 + 1e-300:
        raise DegenerateInput("window is constant or nearly so")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(config.seed if seed is None else seed)
    d = choose_d(x, config.d_max, config.kpss_lags)
    y = np.diff(x, n=d) if d else x
    if y.var() < 1e-12 * y.mean() ** 2 + 1e-300:
        raise DegenerateInput(f"window is degenerate after differencing {d} times")

    table: dict[tuple[int, int], FittedArma] = {}
    opts = config.fit_options
    if config.stepwise:
        _stepwise(table, y, d, seed, config)
    else:
        for k in range(config.p_max + config.q_max + 1):
            for p in range(min(k, config.p_max), -1, -1):
                q = k - p
                if q <= config.q_max:
                    _fit_into(table, y, p, q, d, seed, opts)
    for base in ((0, 0), (1, 0)):
        _fit_into(table, y, *base, d, seed, opts)

    pool = [f for f in table.values() if _eligible(f, config.exclude_pure_ma)]
    if not pool:
        raise AllCandidatesFailed("no admissible, converged candidate model")
    return Selection(min(pool, key=_rank), d, table)


def _stepwise(table, y, d, seed, config: SelectionConfig):
    """Neighbourhood search over (p, q) started from the usual four seeds."""
    opts = config.fit_options

    def ok(p, q):
        return 0 <= p <= config.p_max and 0 <= q <= config.q_max

    def score(f):
        return _rank(f) if f is not None and _eligible(f, config.exclude_pure_ma) else (math.inf,)

    current = None
    for p, q in ((0, 0), (1, 0), (0, 1), (2, 2)):
        if ok(p, q):
            f = _fit_into(table, y, p, q, d, seed, opts)
            if current is None or score(f) < score(current):
                current = f
    moves = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))
    improved = True
    while improved:
        improved = False
        cp, cq = current.order
        for dp, dq in moves:
            p, q = cp + dp, cq + dq
            if ok(p, q) and (p, q) not in table:
                f = _fit_into(table, y, p, q, d, seed, opts)
                if score(f) < score(current):
                    current, improved = f, True
                    break


def upsilon_value(table, best: FittedArma, tau: int):
    """Return ``(upsilon, delta_bic0, delta_bic1, base_used)``.

    ``delta_bic1`` may be negative when the ARMA(1,0) fit had to be pushed to
    the admissibility boundary; that base is then ignored.
    """
    b = best.bic
    dbic0 = table[(0, 0)].bic - b
    f10 = table.get((1, 0))
    dbic1 = f10.bic - b if f10 is not None else math.nan
    if f10 is None or not (f10.admissible and f10.converged):
        dist, base = abs(dbic0), ARMA00
    elif abs(dbic1) < abs(dbic0):
        dist, base = abs(dbic1), ARMA10
    else:
        dist, base = abs(dbic0), ARMA00
    return upsilon_from_distance(dist, tau), dbic0, dbic1, base


def upsilon_from_distance(delta_bic: float, tau: int) -> float:
    return -math.expm1(-abs(delta_bic) / tau)


def order_persistence(best: FittedArma) -> tuple[int, float]:
    m = best.model
    return m.p + m.q, float(sum(abs(c) for c in m.phi) + sum(abs(c) for c in m.theta))


# ----------------------------------------------------------- classical indicators


def window_variance(values) -> float:
    """Variance (divisor N) of the linearly detrended window."""
    r = detrend_linear(values)
    r = r - r.mean()
    return float(np.dot(r, r) / r.size)


def window_autocorr(values, k: int = 1) -> float:
    """Lag-k autocorrelation of the linearly detrended window, normalised by
    N * variance so that lag 0 gives exactly 1."""
    r = detrend_linear(values)
    n = r.size
    if not 0 <= k < n:
        raise LagTooLarge(f"lag {k} must be below window length {n}")
    r = r - r.mean()
    c0 = np.dot(r, r)
    if k == 0:
        return 1.0 if c0 > 0 else math.nan
    return float(np.dot(r[:-k], r[k:]) / c0) if c0 > 0 else math.nan


def _rolling(series: TimeSeries, tau: int, stride: int, func) -> TimeSeries:
    ws = windows(series, tau, stride)
    vals = [func(w.slice(series.values)) for w in ws]
    return TimeSeries(vals, series.dt * stride, series.time_at(ws[0].end_index), series.unit_label)


def rolling_variance(series: TimeSeries, tau: int, stride: int = 1) -> TimeSeries:
    return _rolling(series, tau, stride, window_variance)


def rolling_autocorr(series: TimeSeries, tau: int, stride: int = 1, k: int = 1) -> TimeSeries:
    if not 0 <= k < tau:
        raise LagTooLarge(f"lag {k} must be below window length {tau}")
    return _rolling(series, tau, stride, lambda v: window_autocorr(v, k))


# ---------------------------------------------------------------------- sweeping


@dataclass(frozen=True)
class WindowResult:
    end_time: float
    d: int = -1
    p: int = -1
    q: int = -1
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    nu: float = math.nan
    sigma2: float = math.nan
    delta_bic0: float = math.nan
    delta_bic1: float = math.nan
    base_used: str = ""
    arma10_admissible: bool = False
    upsilon: float = math.nan
    order: int = -1
    persistence: float = math.nan
    significant: bool = False
    variance: float = math.nan
    autocorr_lag1: float = math.nan
    status: str = "OK"

    @property
    def ok(self) -> bool:
        return self.status == "OK"


def evaluate_window(values, end_time: float, config: SelectionConfig, seed) -> WindowResult:
    """Full per-window computation; errors become a status string, never raise."""
    try:
        variance = window_variance(values)
        ac1 = window_autocorr(values, 1)
    except TipwatchError as exc:
        return WindowResult(end_time, status=type(exc).__name__)
    try:
        sel = select_best(values, config, seed)
    except TipwatchError as exc:
        return WindowResult(end_time, variance=variance, autocorr_lag1=ac1,
                            status=type(exc).__name__)
    best = sel.best
    ups, d0, d1, base = upsilon_value(sel.table, best, config.tau)
    order, pers = order_persistence(best)
    f10 = sel.table.get((1, 0))
    used = abs(d0) if base == ARMA00 else abs(d1)
    return WindowResult(
        end_time=end_time, d=sel.d, p=best.p, q=best.q,
        phi=best.model.phi, theta=best.model.theta, nu=float(best.model.nu),
        sigma2=float(best.model.sigma2), delta_bic0=d0, delta_bic1=d1, base_used=base,
        arma10_admissible=bool(f10 is not None and f10.admissible),
        upsilon=ups, order=order, persistence=pers,
        significant=used > config.delta_bic_significance,
        variance=variance, autocorr_lag1=ac1,
    )


def default_threads() -> int:
    env = os.environ.get("TIPWATCH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_indicator(series: TimeSeries, config: SelectionConfig,
                  threads: int | None = None) -> list[WindowResult]:
    """Evaluate every window of ``series``; results are ordered by end time.

    Each window draws its optimizer restarts from ``SeedSequence([seed, index])``
    so the output does not depend on ``threads``.
    """
    ws: list[Window] = windows(series, config.tau, config.stride)
    values = series.values

    def job(item):
        i, w = item
        return evaluate_window(w.slice(values), series.time_at(w.end_index), config,
                               np.random.SeedSequence([config.seed, i]))

    threads = default_threads() if threads is None else threads
    if threads <= 1:
        return [job(it) for it in enumerate(ws)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, enumerate(ws)))


def results_columns(results: Iterable[WindowResult]) -> dict[str, list]:
    rows = list(results)
    return {c: [getattr(r, c) for r in rows] for c in RESULT_COLUMNS}


def write_results(path, results: Iterable[WindowResult]) -> None:
    write_columns(path, results_columns(results))
