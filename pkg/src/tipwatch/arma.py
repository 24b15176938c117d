"""ARMA(p, q) models: simulation, exact Gaussian likelihood, ML fitting and BIC.

The process is

    x_t = nu + sum_i phi_i x_{t-i} + sum_j theta_j w_{t-j} + w_t,   w_t ~ N(0, sigma2)

Fits are carried out in an unconstrained space that maps one-to-one onto
coefficient vectors whose AR and MA polynomials have every root outside the
circle of radius ``1 + EPS_ROOT``; mean and innovation variance are profiled
out of the exact likelihood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import _kernels as K
from .errors import DegenerateInput, InadmissibleModel, NonConvergence, TooShort

EPS_ROOT = 1e-3
ROOT_RADIUS = 1.0 + EPS_ROOT
# a partial autocorrelation this close to +-1 means the optimum sits on the
# admissibility boundary, i.e. the unconstrained optimum was projected
BOUNDARY_PACF = 1.0 - 1e-4


@dataclass(frozen=True)
class ArmaModel:
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    nu: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(c) for c in self.phi))
        object.__setattr__(self, "theta", tuple(float(c) for c in self.theta))
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.theta)

    @property
    def mean(self) -> float:
        return self.nu / (1.0 - sum(self.phi))

    def ar_roots(self) -> np.ndarray:
        return _poly_roots([-c for c in self.phi])

    def ma_roots(self) -> np.ndarray:
        return _poly_roots(list(self.theta))

    @property
    def admissible(self) -> bool:
        return is_admissible(self.phi, self.theta)


def _inverse_roots(coefs) -> np.ndarray:
    """Reciprocals of the roots of 1 + c_1 z + ... + c_k z^k, i.e. the roots of
    the monic z^k + c_1 z^(k-1) + ... + c_k (well conditioned for tiny c_k)."""
    if not len(coefs):
        return np.empty(0, dtype=complex)
    return np.roots(np.r_[1.0, np.asarray(coefs, dtype=float)]).astype(complex)


def _poly_roots(coefs) -> np.ndarray:
    """Roots of 1 + c_1 z + ... + c_k z^k; vanishing terms give no root."""
    inv = _inverse_roots(coefs)
    return 1.0 / inv[inv != 0]


def is_admissible(phi, theta, eps: float = EPS_ROOT) -> bool:
    """Stationary and invertible with every root modulus above ``1 + eps``."""
    for inv in (_inverse_roots([-c for c in phi]), _inverse_roots(list(theta))):
        if inv.size and np.max(np.abs(inv)) * (1.0 + eps) >= 1.0:
            return False
    return True


@dataclass(frozen=True)
class FittedArma:
    model: ArmaModel
    loglik: float
    nobs: int
    d: int = 0
    admissible: bool = True
    converged: bool = True
    count_sigma2: bool = False
    u: tuple[float, ...] = field(default=(), repr=False)
    phi_cls: float | None = None

    @property
    def p(self) -> int:
        return self.model.p

    @property
    def q(self) -> int:
        return self.model.q

    @property
    def order(self) -> tuple[int, int]:
        return self.model.p, self.model.q

    @property
    def bic(self) -> float:
        return bic(self.loglik, self.p, self.q, self.nobs, self.count_sigma2)


def bic(loglik: float, p: int, q: int, tau: int, count_sigma2: bool = False) -> float:
    """-2 ln L + ln(tau) (p + q + 1); the variance counts as a parameter only
    when ``count_sigma2`` is set."""
    k = p + q + 1 + (1 if count_sigma2 else 0)
    return -2.0 * loglik + math.log(tau) * k


# --------------------------------------------------------------------- simulate


def simulate(model: ArmaModel, n: int, seed: int = 0, burn_in: int | None = None) -> np.ndarray:
    if not model.admissible:
        raise InadmissibleModel(f"model {model} is not stationary/invertible")
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in is None:
        burn_in = 10 * (model.p + model.q + 1)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n + burn_in) * math.sqrt(model.sigma2)
    x = lfilter(np.r_[1.0, model.theta], np.r_[1.0, -np.asarray(model.phi)], w)
    return x[burn_in:] + model.mean


# ------------------------------------------------------------------- likelihood


def log_likelihood(model: ArmaModel, data) -> float:
    """Exact Gaussian log-likelihood of ``data`` under ``model``."""
    y = np.asarray(data, dtype=float)
    if not model.admissible:
        raise InadmissibleModel(f"model {model} is not stationary/invertible")
    if y.size < model.p + model.q + 1:
        raise TooShort(f"need at least {model.p + model.q + 1} points, got {y.size}")
    svv, _, _, slogf = K.filter_sums(y - model.mean, np.asarray(model.phi), np.asarray(model.theta))
    n = y.size
    return -0.5 * (n * K.LOG_2PI + n * math.log(model.sigma2) + slogf + svv / model.sigma2)


# -------------------------------------------------------------------------- fit


def _check_fit_input(y: np.ndarray, p: int, q: int) -> None:
    need = max(20, 5 * (p + q + 1))
    if y.size < need:
        raise TooShort(f"ARMA({p},{q}) fit needs >= {need} points, got {y.size}")
    var = y.var()
    if var < 1e-12 * y.mean() ** 2 + 1e-300:
        raise DegenerateInput("data are constant or nearly so")


def cls_ar1(y: np.ndarray) -> float:
    """Unconstrained conditional least-squares AR(1) slope (with intercept)."""
    x0 = y[:-1] - y[:-1].mean()
    x1 = y[1:] - y[1:].mean()
    den = np.dot(x0, x0)
    return float(np.dot(x0, x1) / den) if den > 0 else 0.0


def _ols(X, y):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


def hannan_rissanen(y: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-stage regression estimates of (phi, theta).

    A long autoregression supplies innovation proxies; the data are then
    regressed on their own lags and the lagged proxies.
    """
    z = y - y.mean()
    n = z.size
    if q == 0:
        if p == 0:
            return np.empty(0), np.empty(0)
        X = np.column_stack([z[p - i - 1:n - i - 1] for i in range(p)])
        return _ols(X, z[p:]), np.empty(0)
    m = min(max(p + q + 1, int(math.ceil(math.log(n) ** 1.5))), n // 4)
    Xl = np.column_stack([z[m - i - 1:n - i - 1] for i in range(m)])
    e = np.zeros(n)
    e[m:] = z[m:] - Xl @ _ols(Xl, z[m:])
    s = m + q
    if n - s < p + q + 2:
        return np.zeros(p), np.zeros(q)
    cols = [z[s - i - 1:n - i - 1] for i in range(p)]
    cols += [e[s - j - 1:n - j - 1] for j in range(q)]
    beta = _ols(np.column_stack(cols), z[s:])
    return beta[:p], beta[p:]


def _to_unconstrained(phi, theta, p, q, clip=0.95) -> np.ndarray:
    """Map coefficients into the search space, shrinking inadmissible ones."""
    out = np.zeros(p + q)
    scale_ar = ROOT_RADIUS ** np.arange(1, p + 1)
    scale_ma = ROOT_RADIUS ** np.arange(1, q + 1)
    r_ar = K.coef_to_pacf(np.asarray(phi, dtype=float) * scale_ar) if p else np.empty(0)
    r_ma = K.coef_to_pacf(-np.asarray(theta, dtype=float) * scale_ma) if q else np.empty(0)
    r = np.clip(np.r_[r_ar, r_ma], -clip, clip)
    out[:] = np.arctanh(r)
    return out


@dataclass(frozen=True)
class FitOptions:
    restarts: int = 2
    restart_scale: float = 0.5
    # models with more coefficients than this search only their best-ranked
    # start and skip the random restarts (their cost grows steeply with size)
    full_search_max_params: int = 4
    step: float = 0.3
    xatol: float = 1e-4
    fatol: float = 1e-6
    maxfev_per_param: int = 400
    count_sigma2: bool = False


DEFAULT_FIT = FitOptions()


def fit(
    data,
    p: int,
    q: int,
    seed: int | np.random.SeedSequence = 0,
    warm_starts=(),
    d: int = 0,
    options: FitOptions = DEFAULT_FIT,
) -> FittedArma:
    """Maximum-likelihood ARMA(p, q) fit.

    Parameters
    ----------
    data : array_like
        Observations (already differenced ``d`` times, if any).
    seed : int or SeedSequence
        Drives the random restarts.
    warm_starts : iterable of ndarray
        Extra starting points in the unconstrained space, e.g. the optimum of a
        nested model padded with zeros; such a start reproduces the nested
        likelihood exactly, so the fit can never do worse than it.

    Returns
    -------
    FittedArma
        ``admissible`` is False when the optimum lies on the admissibility
        boundary; for ARMA(1, 0) also when the unconstrained conditional
        least-squares slope reaches ``1 - EPS_ROOT`` in modulus.
    """
    y = np.ascontiguousarray(data, dtype=float)
    _check_fit_input(y, p, q)
    k = p + q
    phi_cls = cls_ar1(y) if (p, q) == (1, 0) else None

    if k == 0:
        ll, mu, s2 = K.kalman_loglik(y, np.empty(0), np.empty(0))
        model = ArmaModel((), (), mu, s2)
        return FittedArma(model, ll, y.size, d, True, True, options.count_sigma2)

    rng = np.random.default_rng(seed)
    phi0, theta0 = hannan_rissanen(y, p, q)
    starts = [_to_unconstrained(phi0, theta0, p, q)]
    starts += [np.asarray(w, dtype=float) for w in warm_starts]
    if len(starts) == 1:
        starts.append(np.zeros(k))

    maxfev = options.maxfev_per_param * k
    best_u, best_f, best_conv = None, np.inf, False

    def search(u0):
        nonlocal best_u, best_f, best_conv
        u, f, _, conv = K.nelder_mead(u0, y, p, q, ROOT_RADIUS, options.step,
                                      options.xatol, options.fatol, maxfev)
        if not conv:
            # a re-initialised simplex from the best point usually finishes the job
            u, f, _, conv = K.nelder_mead(u, y, p, q, ROOT_RADIUS, options.step / 3,
                                          options.xatol, options.fatol, maxfev)
        if best_u is None or f < best_f - 1e-12:
            best_u, best_f, best_conv = u, f, conv

    # rank the deterministic starts by objective; nested warm starts reproduce
    # the smaller model exactly, so the best one is never worse than it
    fs0 = [K.negloglik(np.clip(u0, -K.U_MAX, K.U_MAX), y, p, q, ROOT_RADIUS) for u0 in starts]
    full = k <= options.full_search_max_params
    for i in np.argsort(fs0, kind="stable")[:len(starts) if full else 1]:
        search(starts[i])
    # random restarts scatter around the incumbent to escape local optima
    for _ in range(options.restarts if full else 0):
        search(np.clip(best_u, -4.0, 4.0) + rng.normal(0.0, options.restart_scale, size=k))

    if not best_conv:
        warnings.warn(f"ARMA({p},{q}) optimizer hit its evaluation budget", NonConvergence)
    best_u = np.clip(best_u, -K.U_MAX, K.U_MAX)
    phi, theta = K.unpack(best_u, p, q, ROOT_RADIUS)
    ll, mu, s2 = K.kalman_loglik(y, phi, theta)
    admissible = bool(np.all(np.abs(np.tanh(best_u)) < BOUNDARY_PACF))
    if phi_cls is not None and abs(phi_cls) >= 1.0 - EPS_ROOT:
        admissible = False
    nu = mu * (1.0 - phi.sum())
    model = ArmaModel(tuple(phi), tuple(theta), nu, s2)
    return FittedArma(model, ll, y.size, d, admissible, best_conv, options.count_sigma2,
                      tuple(best_u), phi_cls)


def nested_start(fitted: FittedArma, p: int, q: int) -> np.ndarray | None:
    """Starting point for ARMA(p, q) that reproduces the nested ``fitted`` model."""
    fp, fq = fitted.order
    if fp > p or fq > q:
        return None
    u = np.asarray(fitted.u) if fp + fq else np.empty(0)
    return np.r_[u[:fp], np.zeros(p - fp), u[fp:], np.zeros(q - fq)]
