"""Stochastic 3-box AMOC model under piece-wise linear freshwater hosing.

Only the North Atlantic (N) and Tropical Atlantic (T) salinities are
prognostic; the Indo-Pacific (IP) salinity follows from conservation of total
salt and the Southern Ocean (S) and Bottom (B) salinities are held fixed. The
overturning flow is

    Gamma = lambda * (alpha (T_S - T_0) + beta/100 (S_N - S_S))

and the salinity tendencies switch form with the sign of Gamma. Hosing enters
through the surface fluxes F_N, F_T, which are linear in H.
"""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ConfigError, InvalidRamp, NoConvergence, NoEquilibrium, NonFiniteState
from .series import TimeSeries

SV = 1.0e6  # m^3/s


@dataclass(frozen=True)
class BoxModelParams:
    alpha: float = 0.12          # kg/(m^3 degC)
    beta: float = 790.0          # kg/m^3
    S0: float = 0.035
    TS: float = 7.919            # degC
    T0: float = 3.870            # degC
    lam: float = 1.62e7          # m^6/(kg s)
    gamma: float = 0.36
    KN_sv: float = 1.762
    KS_sv: float = 1.872
    # Table-1 volumes in units of 1e7 m^3, multiplied by volume_scale
    VN_table: float = 0.3683
    VT_table: float = 0.5418
    VS_table: float = 0.6097
    VIP_table: float = 1.4860
    VB_table: float = 9.9250
    volume_scale: float = 2.475e10
    SS: float = 0.034427
    SB: float = 0.034538
    Y: float = 3.15e7            # s/yr
    FN0: float = 0.486e6         # m^3/s
    FN_H: float = 0.1311e6
    FT0: float = -0.997e6
    FT_H: float = 0.6961e6
    SN_init: float = 0.034912
    ST_init: float = 0.035435
    SIP_init: float = 0.034668
    # conserved salt content; derived from the *_init state unless given
    salt_override: float | None = None

    def __post_init__(self):
        for name in ("VN_table", "VT_table", "VS_table", "VIP_table", "VB_table", "volume_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")

    @property
    def total_salt(self) -> float:
        if self.salt_override is not None:
            return self.salt_override
        return (self.VN * self.SN_init + self.VT * self.ST_init + self.VS * self.SS
                + self.VIP * self.SIP_init + self.VB * self.SB)

    def _vol(self, table):
        return table * 1.0e7 * self.volume_scale

    VN = property(lambda self: self._vol(self.VN_table))
    VT = property(lambda self: self._vol(self.VT_table))
    VS = property(lambda self: self._vol(self.VS_table))
    VIP = property(lambda self: self._vol(self.VIP_table))
    VB = property(lambda self: self._vol(self.VB_table))
    KN = property(lambda self: self.KN_sv * SV)
    KS = property(lambda self: self.KS_sv * SV)

    def packed(self) -> np.ndarray:
        return np.array([
            self.lam, self.alpha * (self.TS - self.T0), self.beta / 100.0, self.SS, self.SB,
            self.gamma, self.KN, self.KS, self.S0, self.FN0, self.FN_H, self.FT0, self.FT_H,
            self.Y / self.VN, self.Y / self.VT, self.total_salt,
            self.VN, self.VT, self.VS * self.SS + self.VB * self.SB, self.VIP,
        ])


DEFAULT_PARAMS = BoxModelParams()


# ------------------------------------------------------------------ vector field


@njit(cache=True)
def _sip(sn, st, P):
    return (P[15] - P[16] * sn - P[17] * st - P[18]) / P[19]


@njit(cache=True)
def _flow(sn, P):
    return P[0] * (P[1] + P[2] * (sn - P[3]))


@njit(cache=True)
def _rhs(sn, st, H, P):
    """Salinity tendencies (per year)."""
    SS, SB, gam, KN, KS, S0 = P[3], P[4], P[5], P[6], P[7], P[8]
    G = _flow(sn, P)
    FN = P[9] + H * P[10]
    FT = P[11] + H * P[12]
    if G >= 0.0:
        sip = _sip(sn, st, P)
        a = G * (st - sn) + KN * (st - sn) - 100.0 * FN * S0
        b = G * (gam * SS + (1.0 - gam) * sip - st) + KS * (SS - st) + KN * (sn - st) - 100.0 * FT * S0
    else:
        a = -G * (SB - sn) + KN * (st - sn) - 100.0 * FN * S0
        b = -G * (sn - st) + KS * (SS - st) + KN * (sn - st) - 100.0 * FT * S0
    return a * P[13], b * P[14]


@njit(cache=True)
def _hosing(t, H0, Hpert, Trise, Tpert, Tfall):
    if t < 0.0:
        return H0
    if t <= Trise:
        return H0 + (Hpert - H0) * (t / Trise)
    s = t - Trise
    if s <= Tpert:
        return Hpert
    s -= Tpert
    if s <= Tfall:
        return Hpert - (Hpert - H0) * (s / Tfall)
    return H0


@njit(cache=True)
def _integrate(sn, st, P, hos, dt, n_out, every, noise):
    """Euler-Maruyama; ``noise`` is (n_out*every, 2) pre-scaled increments or
    an empty array. Returns (S_N, S_T, H, index of first non-finite step or -1)."""
    out_sn = np.empty(n_out)
    out_st = np.empty(n_out)
    out_h = np.empty(n_out)
    noisy = noise.shape[0] > 0
    step = 0
    for k in range(n_out):
        out_sn[k] = sn
        out_st[k] = st
        out_h[k] = _hosing(step * dt, hos[0], hos[1], hos[2], hos[3], hos[4])
        if k == n_out - 1:
            break
        for _ in range(every):
            H = _hosing(step * dt, hos[0], hos[1], hos[2], hos[3], hos[4])
            a, b = _rhs(sn, st, H, P)
            sn += a * dt
            st += b * dt
            if noisy:
                sn += noise[step, 0]
                st += noise[step, 1]
            step += 1
            if not (math.isfinite(sn) and math.isfinite(st)):
                return out_sn[:k + 1], out_st[:k + 1], out_h[:k + 1], step
    return out_sn, out_st, out_h, -1


def amoc_flow(S_N, params: BoxModelParams = DEFAULT_PARAMS):
    """Overturning transport in m^3/s."""
    return params.lam * (params.alpha * (params.TS - params.T0)
                         + params.beta / 100.0 * (np.asarray(S_N) - params.SS))


def compute_SIP(S_N, S_T, params: BoxModelParams = DEFAULT_PARAMS):
    """Indo-Pacific salinity closing the salt budget."""
    p = params
    return (p.total_salt - p.VN * np.asarray(S_N) - p.VT * np.asarray(S_T)
            - p.VS * p.SS - p.VB * p.SB) / p.VIP


def salt_budget(S_N, S_T, S_IP, params: BoxModelParams = DEFAULT_PARAMS):
    p = params
    return (p.VN * np.asarray(S_N) + p.VT * np.asarray(S_T) + p.VIP * np.asarray(S_IP)
            + p.VS * p.SS + p.VB * p.SB)


def derivatives(S_N, S_T, H, params: BoxModelParams = DEFAULT_PARAMS) -> tuple[float, float]:
    """(dS_N/dt, dS_T/dt) in salinity per year at hosing ``H``."""
    return _rhs(float(S_N), float(S_T), float(H), params.packed())


# ----------------------------------------------------------------------- hosing


@dataclass(frozen=True)
class HosingScenario:
    H0: float = 0.0
    Hpert: float = 0.5
    Trise: float = 1000.0
    Tpert: float = math.inf
    Tfall: float = 1000.0
    duration: float = 2000.0
    noise_amplitude: float = 0.0
    seed: int = 0
    output_dt: float = 0.2
    dt_int: float = 0.01
    initial_state: str | tuple[float, float] = "upper"

    def __post_init__(self):
        if not self.Trise > 0:
            raise ConfigError("Trise must be positive")
        if not self.Tpert >= 0:
            raise ConfigError("Tpert must be non-negative")
        if not self.Tfall > 0:
            raise ConfigError("Tfall must be positive")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.output_dt > 0 or not self.dt_int > 0:
            raise ConfigError("output_dt and dt_int must be positive")
        if not self.noise_amplitude >= 0:
            raise ConfigError("noise_amplitude must be non-negative")
        ratio = self.output_dt / self.dt_int
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("dt_int must divide output_dt")
        if isinstance(self.initial_state, str) and self.initial_state not in ("upper", "lower"):
            raise ConfigError("initial_state must be 'upper', 'lower' or a (S_N, S_T) pair")

    @property
    def r_rise(self) -> float:
        return abs(self.Hpert - self.H0) / self.Trise

    @property
    def r_fall(self) -> float:
        return abs(self.Hpert - self.H0) / self.Tfall

    def packed(self) -> np.ndarray:
        return np.array([self.H0, self.Hpert, self.Trise, self.Tpert, self.Tfall])


def hosing(t, scenario: HosingScenario):
    """Piece-wise linear hosing: H0, ramp to Hpert over Trise, plateau for
    Tpert, ramp back over Tfall, then H0 again."""
    s = scenario
    if np.ndim(t) == 0:
        return _hosing(float(t), s.H0, s.Hpert, s.Trise, s.Tpert, s.Tfall)
    return np.array([_hosing(float(x), s.H0, s.Hpert, s.Trise, s.Tpert, s.Tfall)
                     for x in np.ravel(t)]).reshape(np.shape(t))


# ------------------------------------------------------------------ integration


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    S_N: np.ndarray
    S_T: np.ndarray
    S_IP: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    dt: float

    COLUMNS = ("t", "S_N", "S_T", "S_IP", "Gamma", "H")

    def series(self, name: str = "S_N") -> TimeSeries:
        return TimeSeries(getattr(self, name), self.dt, float(self.t[0]), name)

    def columns(self) -> dict[str, np.ndarray]:
        return {c: getattr(self, c) for c in self.COLUMNS}


def integrate(scenario: HosingScenario, params: BoxModelParams = DEFAULT_PARAMS) -> Trajectory:
    """Euler-Maruyama run with independent additive noise of equal amplitude on
    both prognostic salinities; sampled every ``output_dt`` years from t = 0."""
    s = scenario
    if isinstance(s.initial_state, str):
        eq = initial_equilibrium(s.H0, params, s.initial_state)
        sn0, st0 = eq.S_N, eq.S_T
    else:
        sn0, st0 = map(float, s.initial_state)
    every = int(round(s.output_dt / s.dt_int))
    n_out = int(round(s.duration / s.output_dt))
    n_steps = (n_out - 1) * every
    if s.noise_amplitude > 0:
        rng = np.random.default_rng(s.seed)
        noise = rng.standard_normal((n_steps, 2)) * (s.noise_amplitude * math.sqrt(s.dt_int))
    else:
        noise = np.empty((0, 2))
    sn, st, h, bad = _integrate(sn0, st0, params.packed(), s.packed(), s.dt_int, n_out, every, noise)
    if bad >= 0:
        raise NonFiniteState(bad * s.dt_int)
    t = np.arange(n_out) * s.output_dt
    return Trajectory(t, sn, st, compute_SIP(sn, st, params), amoc_flow(sn, params), h, s.output_dt)


# ------------------------------------------------------------------ equilibria


@dataclass(frozen=True)
class EquilibriumPoint:
    H: float
    S_N: float
    S_T: float
    eigenvalues: tuple[complex, complex]
    stable: bool
    branch_label: str

    @property
    def Gamma(self) -> float:
        return float(amoc_flow(self.S_N))


def jacobian(S_N, S_T, H, params: BoxModelParams = DEFAULT_PARAMS, h: float = 1e-8) -> np.ndarray:
    """Central finite-difference Jacobian of the deterministic field."""
    P = params.packed()
    J = np.empty((2, 2))
    for j, (dn, dt) in enumerate(((h, 0.0), (0.0, h))):
        fp = _rhs(S_N + dn, S_T + dt, H, P)
        fm = _rhs(S_N - dn, S_T - dt, H, P)
        J[0, j] = (fp[0] - fm[0]) / (2 * h)
        J[1, j] = (fp[1] - fm[1]) / (2 * h)
    return J


def _newton(x, H, P, params, tol=1e-13, maxiter=60):
    for _ in range(maxiter):
        f = np.array(_rhs(x[0], x[1], H, P))
        J = jacobian(x[0], x[1], H, params)
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return None
        # keep iterates inside a generous salinity box
        lim = 0.5
        n = np.max(np.abs(step))
        if n > lim:
            step *= lim / n
        x = x - step
        if not np.all(np.isfinite(x)):
            return None
        if np.max(np.abs(step)) < tol:
            f = np.array(_rhs(x[0], x[1], H, P))
            return x if np.max(np.abs(f)) < 1e-12 else None
    return None


DEFAULT_LATTICE = (np.linspace(-0.4, 0.4, 9), np.linspace(-1.0, 2.0, 7))


def classify(S_N, S_T, H, params: BoxModelParams = DEFAULT_PARAMS) -> EquilibriumPoint:
    J = jacobian(S_N, S_T, H, params)
    ev = np.linalg.eigvals(J)
    ev = tuple(sorted((complex(e) for e in ev), key=lambda z: (-z.real, z.imag)))
    stable = all(e.real < 0 for e in ev)
    if np.linalg.det(J) < 0:
        label = "unstable"
    else:
        label = "upper" if amoc_flow(S_N, params) >= 0 else "lower"
    return EquilibriumPoint(float(H), float(S_N), float(S_T), ev, stable, label)


def find_equilibria(H: float, params: BoxModelParams = DEFAULT_PARAMS, guesses=None) -> list[EquilibriumPoint]:
    """All equilibria reachable by Newton from a lattice of starting salinities,
    deduplicated and sorted by S_N (descending)."""
    P = params.packed()
    if guesses is None:
        sn_grid, st_grid = DEFAULT_LATTICE
        guesses = [(a, b) for a in sn_grid for b in st_grid]
    roots: list[np.ndarray] = []
    for g in guesses:
        x = _newton(np.array(g, dtype=float), H, P, params)
        if x is None:
            continue
        if not any(np.max(np.abs(x - r)) < 1e-9 for r in roots):
            roots.append(x)
    if not roots:
        warnings.warn(f"no equilibrium converged at H={H}", NoConvergence)
    roots.sort(key=lambda r: -r[0])
    return [classify(r[0], r[1], H, params) for r in roots]


def initial_equilibrium(H: float, params: BoxModelParams = DEFAULT_PARAMS, which: str = "upper") -> EquilibriumPoint:
    """Stable equilibrium of largest (``upper``) or smallest (``lower``) flow."""
    pts = [e for e in find_equilibria(H, params) if e.branch_label != "unstable"]
    if not pts:
        raise NoEquilibrium(f"no equilibrium at H={H}")
    pts.sort(key=lambda e: e.Gamma)
    return pts[-1] if which == "upper" else pts[0]


def equilibrium_branches(H_values, params: BoxModelParams = DEFAULT_PARAMS) -> list[EquilibriumPoint]:
    """Equilibria over a grid of hosing values; each H is searched from the
    lattice plus the roots found at the previous grid point."""
    out: list[EquilibriumPoint] = []
    prev: list[EquilibriumPoint] = []
    sn_grid, st_grid = DEFAULT_LATTICE
    lattice = [(a, b) for a in sn_grid for b in st_grid]
    for H in H_values:
        guesses = [(e.S_N, e.S_T) for e in prev] + lattice
        prev = find_equilibria(float(H), params, guesses)
        out.extend(prev)
    return out


def _upper_focus_growth(H, params):
    ups = [e for e in find_equilibria(H, params) if e.branch_label == "upper"]
    if not ups:
        return None
    e = max(ups, key=lambda e: e.S_N)
    return e.eigenvalues[0].real, abs(e.eigenvalues[0].imag) > 0


def hopf_point(params: BoxModelParams = DEFAULT_PARAMS, H_lo: float = 0.0, H_hi: float = 0.5,
               tol: float = 1e-6) -> float | None:
    """Hosing value where the upper-branch complex pair crosses the imaginary axis."""
    grid = np.linspace(H_lo, H_hi, 51)
    last = None
    for H in grid:
        g = _upper_focus_growth(H, params)
        if g is None:
            break
        if last is not None and last[1] < 0 <= g[0] and g[1]:
            lo, hi = last[0], H
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                gm = _upper_focus_growth(mid, params)
                if gm is not None and gm[0] >= 0:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        last = (H, g[0])
    return None


def fold_point(params: BoxModelParams = DEFAULT_PARAMS, H_lo: float = 0.0, H_hi: float = 0.6,
               tol: float = 1e-6) -> EquilibriumPoint:
    """Last saddle on the unstable branch before it meets the upper branch; its
    S_N is the highest point of the separating branch."""
    def saddle(H):
        s = [e for e in find_equilibria(H, params) if e.branch_label == "unstable"]
        return max(s, key=lambda e: e.S_N) if s else None

    if saddle(H_lo) is None:
        raise NoEquilibrium("no saddle at the lower end of the bracket")
    lo, hi = H_lo, H_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if saddle(mid) is None:
            hi = mid
        else:
            lo = mid
    return saddle(lo)


def crossing_time(t, x, level, downward: bool = True) -> float | None:
    """First time ``x`` passes ``level`` (scalar or per-sample array; from
    above when ``downward``)."""
    x = np.asarray(x)
    hit = np.flatnonzero(x < level) if downward else np.flatnonzero(x > level)
    return float(np.asarray(t)[hit[0]]) if hit.size else None


def unstable_branch_level(H, params: BoxModelParams = DEFAULT_PARAMS, n_grid: int = 121):
    """S_N of the separating (saddle) branch at each hosing value in ``H``.

    The branch is tabulated on ``n_grid`` points and interpolated. Beyond the
    fold the saddle no longer exists and its end point is used; below the
    range where it exists the lowest tabulated saddle is used.
    """
    H = np.asarray(H, dtype=float)
    fold = fold_point(params)
    lo = min(float(H.min()), fold.H)
    grid = np.linspace(lo, fold.H, n_grid)
    levels = []
    for h in grid:
        s = [e.S_N for e in find_equilibria(h, params) if e.branch_label == "unstable"]
        levels.append(max(s) if s else np.nan)
    grid, levels = grid[np.isfinite(levels)], np.asarray(levels)[np.isfinite(levels)]
    out = np.interp(H, grid, levels)
    out[H >= fold.H] = fold.S_N
    return out


def tipping_time(traj: "Trajectory", params: BoxModelParams = DEFAULT_PARAMS,
                 downward: bool = True) -> float | None:
    """First time S_N crosses the unstable branch at the current hosing."""
    return crossing_time(traj.t, traj.S_N, unstable_branch_level(traj.H, params), downward)


# ------------------------------------------------------------------ colored noise


@dataclass(frozen=True)
class ColoredNoiseConfig:
    n: int = 10_000
    dt: float = 0.5
    ar_start: float = 0.0
    ar_end: float = 0.95
    sd_start: float = 1.0
    sd_end: float = 10.0
    seed: int = 0
    substeps: int = 50
    relaxation: float = 5.0


@njit(cache=True)
def _colored(xi, dt, substeps, relaxation):
    n = xi.size
    x = np.empty(n)
    h = dt / substeps
    v = 0.0
    for k in range(n):
        x[k] = v
        for _ in range(substeps):
            v += h * (-relaxation * v + xi[k])
    return x


def colored_noise_series(n: int = 10_000, dt: float = 0.5, ar_start: float = 0.0,
                         ar_end: float = 0.95, sd_start: float = 1.0, sd_end: float = 10.0,
                         seed: int = 0, substeps: int = 50, relaxation: float = 5.0) -> TimeSeries:
    """Relaxing linear process ``dx/dt = -relaxation*x + xi(t)`` forced by AR(1)
    noise whose coefficient and innovation standard deviation ramp linearly
    over the run. ``xi`` is held for each output interval ``dt`` while ``x`` is
    stepped ``substeps`` times."""
    for name, a in (("ar_start", ar_start), ("ar_end", ar_end)):
        if not 0.0 <= a < 1.0:
            raise InvalidRamp(f"{name} must lie in [0, 1), got {a}")
    for name, s in (("sd_start", sd_start), ("sd_end", sd_end)):
        if not s > 0:
            raise InvalidRamp(f"{name} must be positive, got {s}")
    if n < 2 or not dt > 0:
        raise InvalidRamp("need n >= 2 and dt > 0")
    if relaxation * dt / substeps >= 1.0:
        raise InvalidRamp("substep too coarse for the relaxation rate")
    frac = np.arange(n) / (n - 1)
    ar = ar_start + (ar_end - ar_start) * frac
    sd = sd_start + (sd_end - sd_start) * frac
    eps = np.random.default_rng(seed).standard_normal(n) * sd
    xi = np.empty(n)
    prev = 0.0
    for k in range(n):
        prev = ar[k] * prev + eps[k]
        xi[k] = prev
    return TimeSeries(_colored(xi, dt, substeps, relaxation), dt, 0.0, "x")


# ------------------------------------------------------------------ presets


PRESETS = ("b_tip", "n_tip_up", "n_tip_down", "r_tip", "r_notip", "colored_noise")

_SCENARIO_KEYS = {f.name: f.type for f in fields(HosingScenario)}
_PARAM_KEYS = {f.name for f in fields(BoxModelParams)}
_NOISE_KEYS = {f.name for f in fields(ColoredNoiseConfig)}


def _number(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def parse_config(text: str, source: str = "<config>"):
    """Parse ``key = value`` lines (``#`` starts a comment).

    Returns ``(scenario, params)`` for box runs or a :class:`ColoredNoiseConfig`
    (and ``None``) when ``kind = colored_noise``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    items = dict(cp["run"])
    kind = items.pop("kind", "box")
    if kind == "colored_noise":
        kw = {}
        for k, v in items.items():
            if k not in _NOISE_KEYS:
                raise ConfigError(f"{source}: unknown key {k!r}")
            kw[k] = int(_number(k, v)) if k in ("n", "seed", "substeps") else _number(k, v)
        return ColoredNoiseConfig(**kw), None
    if kind != "box":
        raise ConfigError(f"{source}: unknown kind {kind!r}")
    skw, pkw = {}, {}
    for k, v in items.items():
        if k == "initial_state":
            if v in ("upper", "lower"):
                skw[k] = v
            else:
                parts = [p.strip() for p in v.split(",")]
                if len(parts) != 2:
                    raise ConfigError(f"{source}: initial_state must be upper, lower or 'S_N, S_T'")
                skw[k] = (_number(k, parts[0]), _number(k, parts[1]))
        elif k == "seed":
            skw[k] = int(_number(k, v))
        elif k in _SCENARIO_KEYS:
            skw[k] = _number(k, v)
        elif k in _PARAM_KEYS:
            pkw[k] = _number(k, v)
        else:
            raise ConfigError(f"{source}: unknown key {k!r}")
    return HosingScenario(**skw), replace(DEFAULT_PARAMS, **pkw)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("tipwatch.presets").joinpath(f"{name}.cfg").read_text()


def load_preset(name: str):
    return parse_config(preset_text(name), source=f"preset {name}")


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(text, source=str(path))
