import math
import warnings

import numpy as np
import pytest
from oracles import dense_loglik, dense_profile_loglik

from tipwatch import _kernels as K
from tipwatch.arma import (
    BOUNDARY_PACF,
    EPS_ROOT,
    ArmaModel,
    FitOptions,
    bic,
    cls_ar1,
    fit,
    hannan_rissanen,
    is_admissible,
    log_likelihood,
    nested_start,
    simulate,
)
from tipwatch.errors import DegenerateInput, InadmissibleModel, TooShort


def random_model(rng, p, q, sigma2=None):
    """Admissible model drawn through random partial autocorrelations."""
    phi = K.pacf_to_coef(rng.uniform(-0.9, 0.9, p)) if p else ()
    a = K.pacf_to_coef(rng.uniform(-0.9, 0.9, q)) if q else np.empty(0)
    theta = tuple(-a)
    return ArmaModel(tuple(phi), theta, rng.normal(), sigma2 or rng.uniform(0.5, 2.0))


# ------------------------------------------------------------------- model basics


def test_admissibility():
    assert ArmaModel((0.5,)).admissible
    assert not ArmaModel((1.0,)).admissible
    assert not ArmaModel((0.9995,)).admissible  # inside the 1e-3 margin
    assert not ArmaModel((), (-1.0,)).admissible
    assert is_admissible((0.5, 0.3), (0.4,))
    assert not is_admissible((1.2, -0.1), ())
    assert ArmaModel((0.5,), nu=1.0).mean == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ArmaModel(sigma2=0.0)


def test_pacf_map_round_trip():
    rng = np.random.default_rng(0)
    for k in range(1, 6):
        r = rng.uniform(-0.99, 0.99, k)
        a = K.pacf_to_coef(r)
        np.testing.assert_allclose(K.coef_to_pacf(a), r, atol=1e-10)
        assert is_admissible(a, (), eps=0.0)


def test_unpack_respects_root_margin():
    rng = np.random.default_rng(1)
    for _ in range(50):
        u = rng.normal(0, 4, 5)
        phi, theta = K.unpack(u, 3, 2, 1.0 + EPS_ROOT)
        assert is_admissible(phi, theta, eps=EPS_ROOT * 0.999)


# ------------------------------------------------------------------- simulation


def test_simulate_white_noise_moments():
    x = simulate(ArmaModel(), 100_000, seed=3)
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.03


def test_simulate_ar1_autocorrelation():
    x = simulate(ArmaModel((0.5,)), 100_000, seed=4)
    x = x - x.mean()
    assert abs(np.dot(x[:-1], x[1:]) / np.dot(x, x) - 0.5) < 0.02


def test_simulate_arma11_variance():
    x = simulate(ArmaModel((0.5,), (0.3,)), 100_000, seed=5)
    target = (1 + 2 * 0.5 * 0.3 + 0.09) / (1 - 0.25)
    assert target == pytest.approx(1.853333, abs=1e-6)
    assert abs(x.var() / target - 1) < 0.02


def test_simulate_deterministic_and_validated():
    m = ArmaModel((0.3,), (0.2,), nu=1.0)
    assert np.array_equal(simulate(m, 50, seed=9), simulate(m, 50, seed=9))
    assert not np.array_equal(simulate(m, 50, seed=9), simulate(m, 50, seed=10))
    with pytest.raises(InadmissibleModel):
        simulate(ArmaModel((1.0,)), 10)


# ------------------------------------------------------------------- likelihood


def test_loglik_white_noise_closed_form():
    rng = np.random.default_rng(2)
    y = rng.normal(1.0, 2.0, 80)
    m = ArmaModel((), (), 0.7, 3.0)
    expected = -0.5 * y.size * math.log(2 * math.pi * 3.0) - np.sum((y - 0.7) ** 2) / 6.0
    assert log_likelihood(m, y) == pytest.approx(expected, abs=1e-8)


def test_loglik_ar1_dense_oracle():
    rng = np.random.default_rng(3)
    phi, s2 = 0.7, 1.3
    y = rng.standard_normal(50)
    i = np.arange(50)
    S = s2 * phi ** np.abs(i[:, None] - i[None, :]) / (1 - phi**2)
    _, logdet = np.linalg.slogdet(S)
    expected = -0.5 * (50 * math.log(2 * math.pi) + logdet + y @ np.linalg.solve(S, y))
    assert log_likelihood(ArmaModel((phi,), (), 0.0, s2), y) == pytest.approx(expected, abs=1e-6)


def test_loglik_matches_oracle_all_small_orders():
    rng = np.random.default_rng(4)
    for p in range(3):
        for q in range(3):
            for _ in range(3):
                m = random_model(rng, p, q)
                y = rng.standard_normal(50) * 2 + 0.3
                ref = dense_loglik(y, m.phi, m.theta, m.sigma2, m.mean)
                assert log_likelihood(m, y) == pytest.approx(ref, abs=1e-6), (p, q)


def test_profiled_loglik_matches_oracle():
    rng = np.random.default_rng(5)
    for p, q in [(1, 0), (0, 1), (2, 1), (1, 2), (2, 2)]:
        m = random_model(rng, p, q)
        y = simulate(m, 60, seed=int(rng.integers(1 << 30)))
        ll, mu, s2 = K.kalman_loglik(y, np.asarray(m.phi), np.asarray(m.theta))
        ref, mu_ref, s2_ref = dense_profile_loglik(y, m.phi, m.theta)
        assert ll == pytest.approx(ref, abs=1e-6)
        assert mu == pytest.approx(mu_ref, abs=1e-8)
        assert s2 == pytest.approx(s2_ref, rel=1e-8)


def test_loglik_near_unit_root_still_matches_oracle():
    # roots just outside the admissibility margin exercise the slow-converging filter
    y = np.random.default_rng(6).standard_normal(64)
    phi = (0.998,)
    theta = (-0.998,)
    m = ArmaModel(phi, theta, 0.0, 1.0)
    assert m.admissible
    assert log_likelihood(m, y) == pytest.approx(dense_loglik(y, phi, theta, 1.0, 0.0), abs=1e-6)


def test_loglik_shift_invariance():
    rng = np.random.default_rng(7)
    y = rng.standard_normal(40)
    m = ArmaModel((0.4,), (0.2,), nu=0.1, sigma2=0.8)
    c = 5.0
    shifted = ArmaModel(m.phi, m.theta, m.nu + c * (1 - sum(m.phi)), m.sigma2)
    assert log_likelihood(shifted, y + c) == pytest.approx(log_likelihood(m, y), abs=1e-9)


def test_loglik_errors():
    with pytest.raises(InadmissibleModel):
        log_likelihood(ArmaModel((1.5,)), np.zeros(10))
    with pytest.raises(TooShort):
        log_likelihood(ArmaModel((0.5, 0.1), (0.2,)), np.zeros(3))


# ------------------------------------------------------------------------ BIC


def test_bic_formula():
    assert bic(-150, 0, 0, 100) == pytest.approx(304.60517018598809, abs=1e-10)
    assert bic(-150, 1, 1, 350) == pytest.approx(300 + 3 * math.log(350), abs=1e-12)
    assert bic(-150, 1, 1, 350) == pytest.approx(317.5738, abs=1e-4)
    assert bic(-150, 1, 1, 350, count_sigma2=True) == pytest.approx(300 + 4 * math.log(350))


def test_fitted_bic_uses_fitted_length():
    y = simulate(ArmaModel((0.6,)), 300, seed=11)
    f = fit(y, 1, 0)
    assert f.bic == -2 * f.loglik + math.log(300) * 2


# ------------------------------------------------------------------------ fitting


def test_fit_white_noise_is_closed_form():
    rng = np.random.default_rng(8)
    y = rng.normal(3.0, 0.5, 200)
    f = fit(y, 0, 0)
    assert f.model.nu == pytest.approx(y.mean(), rel=1e-12)
    assert f.model.sigma2 == pytest.approx(y.var(), rel=1e-12)
    assert f.admissible and f.converged


def test_fit_recovers_arma11():
    m = ArmaModel((0.6,), (0.3,), nu=0.4, sigma2=2.0)
    y = simulate(m, 5000, seed=12)
    f = fit(y, 1, 1)
    assert f.model.phi[0] == pytest.approx(0.6, abs=0.05)
    assert f.model.theta[0] == pytest.approx(0.3, abs=0.06)
    assert f.model.sigma2 == pytest.approx(2.0, rel=0.06)
    assert f.model.mean == pytest.approx(m.mean, abs=0.15)


def test_fit_sigma2_round_trip_average():
    est = []
    for seed in range(20):
        y = simulate(ArmaModel((0.5,), (0.4,), sigma2=1.5), 5000, seed=100 + seed)
        est.append(fit(y, 1, 1, seed=seed).model.sigma2)
    assert abs(np.mean(est) / 1.5 - 1) < 0.10


def test_fit_is_deterministic():
    y = simulate(ArmaModel((0.5, -0.2), (0.3,)), 300, seed=13)
    a = fit(y, 2, 1, seed=4)
    b = fit(y, 2, 1, seed=4)
    assert a == b


def test_fit_errors():
    with pytest.raises(DegenerateInput):
        fit(np.full(100, 3.0), 1, 0)
    with pytest.raises(TooShort):
        fit(np.arange(15.0), 0, 0)
    with pytest.raises(TooShort):
        fit(np.random.default_rng(0).standard_normal(24), 2, 2)


def test_fit_ar1_flags_unit_root():
    # a trend dominated window has a unit CLS slope; the constrained fit is kept
    y = np.arange(350.0) + 0.1 * np.random.default_rng(14).standard_normal(350)
    f = fit(y, 1, 0)
    assert abs(f.phi_cls) >= 1 - EPS_ROOT
    assert not f.admissible
    assert math.isfinite(f.bic)
    assert f.model.admissible  # the reported coefficients stay inside the region


def test_overfitted_model_lands_on_boundary():
    # white noise: ARMA(1,1) tends to phi = -theta; common roots are not an error
    y = np.random.default_rng(15).standard_normal(350)
    f = fit(y, 2, 2)
    assert f.model.admissible
    if not f.admissible:
        assert np.max(np.abs(np.tanh(f.u))) >= BOUNDARY_PACF


def test_nested_start_reproduces_nested_likelihood():
    y = simulate(ArmaModel((0.7,), (0.2,)), 400, seed=16)
    f11 = fit(y, 1, 1)
    u = nested_start(f11, 2, 2)
    assert u.tolist() == [f11.u[0], 0.0, f11.u[1], 0.0]
    assert -K.negloglik(u, y, 2, 2, 1 + EPS_ROOT) == pytest.approx(f11.loglik, abs=1e-9)
    assert nested_start(f11, 0, 1) is None


def test_nesting_is_monotone_on_fixed_data():
    y = simulate(ArmaModel((0.5, 0.2), (0.4,)), 350, seed=17)
    ll = {}
    for p in range(3):
        for q in range(3):
            warm = [nested_start(ll[o], p, q) for o in ((p - 1, q), (p, q - 1)) if o in ll]
            ll[(p, q)] = fit(y, p, q, warm_starts=[w for w in warm if w is not None and w.size])
    for (p, q), f in ll.items():
        for o in ((p + 1, q), (p, q + 1)):
            if o in ll:
                assert ll[o].loglik >= f.loglik - 1e-4


def test_nonconvergence_warning_keeps_best_point():
    y = simulate(ArmaModel((0.5,), (0.3,)), 200, seed=18)
    opts = FitOptions(restarts=0, maxfev_per_param=5)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        f = fit(y, 1, 1, options=opts)
    assert not f.converged
    assert any("budget" in str(w.message) for w in rec)
    assert math.isfinite(f.loglik)


def test_hannan_rissanen_close_to_truth():
    y = simulate(ArmaModel((0.6,), (0.3,)), 3000, seed=19)
    phi, theta = hannan_rissanen(y, 1, 1)
    assert phi[0] == pytest.approx(0.6, abs=0.1)
    assert theta[0] == pytest.approx(0.3, abs=0.1)


def test_cls_ar1():
    y = simulate(ArmaModel((0.8,)), 5000, seed=20)
    assert cls_ar1(y) == pytest.approx(0.8, abs=0.03)
    assert cls_ar1(np.r_[np.zeros(5), 1.0]) == pytest.approx(0.0, abs=1.0)
