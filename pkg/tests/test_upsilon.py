import math

import numpy as np
import pytest

from oracles import direct_autocorr, direct_variance
from tipwatch.arma import ArmaModel, FittedArma, simulate
from tipwatch.errors import AllCandidatesFailed, DegenerateInput, LagTooLarge, WindowTooLong
from tipwatch.series import TimeSeries
from tipwatch.upsilon import (
    ARMA00,
    ARMA10,
    RESULT_COLUMNS,
    SelectionConfig,
    _rank,
    evaluate_window,
    order_persistence,
    rolling_autocorr,
    rolling_variance,
    run_indicator,
    select_best,
    upsilon_from_distance,
    upsilon_value,
    window_autocorr,
    window_variance,
    write_results,
)

SMALL = dict(p_max=2, q_max=2, tau=100)


def fitted(phi=(), theta=(), loglik=0.0, nobs=100, **kw):
    return FittedArma(ArmaModel(phi, theta), loglik, nobs, **kw)


# ------------------------------------------------------------------ config


@pytest.mark.parametrize("kw", [dict(p_max=0), dict(q_max=-1), dict(d_max=3), dict(tau=19), dict(stride=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SelectionConfig(**kw)


def test_config_count_sigma2_propagates():
    assert SelectionConfig(count_sigma2=True).fit_options.count_sigma2


# ----------------------------------------------------------------- upsilon


def test_upsilon_formula_examples():
    # 40-digit decimal evaluations of 1 - exp(-d/350)
    assert upsilon_from_distance(2, 350) == pytest.approx(0.0056979902374518071, abs=1e-15)
    assert upsilon_from_distance(200, 350) == pytest.approx(0.4352818779922407905, abs=1e-15)
    assert upsilon_from_distance(0, 350) == 0.0


def test_upsilon_monotone():
    d = np.linspace(0, 500, 51)
    u = [upsilon_from_distance(v, 350) for v in d]
    assert all(a < b for a, b in zip(u, u[1:]))
    assert all(0 <= v < 1 for v in u)
    assert upsilon_from_distance(10, 100) > upsilon_from_distance(10, 200)


def test_upsilon_best_is_white_noise():
    b = fitted(loglik=-10)
    table = {(0, 0): b, (1, 0): fitted((0.1,), loglik=-9.9)}
    ups, d0, d1, base = upsilon_value(table, b, 350)
    assert ups == 0 and d0 == 0 and base == ARMA00
    assert d1 > 0


def test_upsilon_picks_closer_base():
    n = 100
    best = fitted((0.5, 0.2), loglik=-100, nobs=n)
    table = {(0, 0): fitted(loglik=-150, nobs=n), (1, 0): fitted((0.6,), loglik=-104, nobs=n),
             (2, 0): best}
    ups, d0, d1, base = upsilon_value(table, best, 350)
    assert base == ARMA10
    assert d1 == pytest.approx(table[(1, 0)].bic - best.bic)
    assert ups == pytest.approx(-math.expm1(-abs(d1) / 350))


def test_upsilon_ignores_inadmissible_arma10():
    n = 100
    best = fitted((0.5, 0.2), loglik=-100, nobs=n)
    bad = fitted((0.9999,), loglik=-99, nobs=n, admissible=False)
    table = {(0, 0): fitted(loglik=-150, nobs=n), (1, 0): bad, (2, 0): best}
    ups, d0, d1, base = upsilon_value(table, best, 350)
    assert base == ARMA00
    assert d1 < 0
    assert ups == pytest.approx(-math.expm1(-d0 / 350))


# --------------------------------------------------------------- selection


def test_tie_rule():
    # nobs=1 removes the penalty, so equal likelihoods mean equal BIC
    a, b, c = fitted((0.3,), nobs=1), fitted((0.3, 0.1), nobs=1), fitted((0.3,), (0.1,), nobs=1)
    assert a.bic == b.bic == c.bic
    assert min([b, c, a], key=_rank) is a
    assert min([c, b], key=_rank) is b
    d = fitted((), (0.1, 0.2), nobs=1)
    assert min([c, d], key=_rank) is c


def test_select_best_white_noise_mostly_zero():
    cfg = SelectionConfig(p_max=2, q_max=2, tau=350)
    hits = 0
    for s in range(30):
        x = np.random.default_rng(s).standard_normal(350)
        hits += select_best(x, cfg).best.order == (0, 0)
    assert hits >= 26


def test_select_best_ar1():
    cfg = SelectionConfig(p_max=2, q_max=2, tau=350, d_max=0)
    hits = sum(select_best(simulate(ArmaModel((0.8,)), 350, seed=s), cfg).best.order == (1, 0)
               for s in range(30))
    assert hits >= 24


def test_select_best_table_and_exclusion():
    x = simulate(ArmaModel((), (0.7,)), 300, seed=5)
    cfg = SelectionConfig(p_max=2, q_max=2, tau=300, d_max=0)
    sel = select_best(x, cfg)
    assert set(sel.table) == {(p, q) for p in range(3) for q in range(3)}
    assert sel.best.order == (0, 1)
    sel2 = select_best(x, SelectionConfig(p_max=2, q_max=2, tau=300, d_max=0, exclude_pure_ma=True))
    assert sel2.best.p >= 1


def test_select_best_stepwise_finds_ar1():
    x = simulate(ArmaModel((0.8,)), 350, seed=1)
    sel = select_best(x, SelectionConfig(tau=350, d_max=0, stepwise=True))
    assert sel.best.order == (1, 0)
    assert len(sel.table) < 36


def test_select_best_degenerate():
    with pytest.raises(DegenerateInput):
        select_best(np.full(100, 3.0), SelectionConfig(**SMALL))
    with pytest.raises(DegenerateInput):
        select_best(np.arange(100.0), SelectionConfig(**SMALL))


def test_select_best_all_failed(monkeypatch):
    from tipwatch import upsilon
    monkeypatch.setattr(upsilon, "_eligible", lambda f, e: False)
    with pytest.raises(AllCandidatesFailed):
        select_best(np.random.default_rng(0).standard_normal(100), SelectionConfig(**SMALL))


# ------------------------------------------------------- order/persistence


@pytest.mark.parametrize("phi, theta, O, R", [
    ((0.5,), (), 1, 0.5),
    ((0.5, -0.3), (0.2,), 3, 1.0),
    ((), (), 0, 0.0),
])
def test_order_persistence(phi, theta, O, R):
    o, r = order_persistence(fitted(phi, theta))
    assert o == O
    assert r == pytest.approx(R, abs=1e-15)


# ---------------------------------------------------- classical indicators


def test_variance_examples():
    assert window_variance(np.full(20, 4.0)) == 0.0
    assert window_variance([1.0, 2.0, 3.0]) == pytest.approx(0.0, abs=1e-28)


def test_indicators_match_direct_sums():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(20, 200))
        x = rng.standard_normal(n).cumsum() + 5 * rng.standard_normal()
        assert window_variance(x) == pytest.approx(direct_variance(x)[0], rel=1e-10, abs=1e-12)
        for k in (1, 2, 5):
            assert window_autocorr(x, k) == pytest.approx(direct_autocorr(x, k), abs=1e-10)


def test_autocorr_lag_zero_and_errors():
    x = np.random.default_rng(1).standard_normal(50)
    assert window_autocorr(x, 0) == 1.0
    with pytest.raises(LagTooLarge):
        window_autocorr(x, 50)
    with pytest.raises(LagTooLarge):
        rolling_autocorr(TimeSeries(x), 20, k=20)
    with pytest.raises(WindowTooLong):
        rolling_variance(TimeSeries(x), 51)


def test_rolling_variance_iid():
    vals = [window_variance(np.random.default_rng(s).standard_normal(350)) for s in range(200)]
    assert np.mean([0.8 <= v <= 1.2 for v in vals]) >= 0.95


def test_rolling_autocorr_iid_and_ar1():
    r_iid = [window_autocorr(np.random.default_rng(s).standard_normal(350)) for s in range(200)]
    assert np.mean(np.abs(r_iid) < 0.15) >= 0.95
    r_ar = [window_autocorr(simulate(ArmaModel((0.8,)), 350, seed=s)) for s in range(200)]
    assert np.mean([0.6 <= r <= 0.9 for r in r_ar]) >= 0.90


def test_rolling_series_timing():
    s = TimeSeries(np.random.default_rng(0).standard_normal(100), dt=0.5, t0=2.0)
    v = rolling_variance(s, 30, 10)
    assert len(v) == 8
    assert v.t0 == pytest.approx(2.0 + 29 * 0.5)
    assert v.dt == 5.0


# ---------------------------------------------------------------- sweeping


def test_evaluate_window_invariants():
    x = simulate(ArmaModel((0.6,), (0.3,)), 200, seed=3)
    r = evaluate_window(x, 1.0, SelectionConfig(p_max=2, q_max=2, tau=200, d_max=0),
                        np.random.SeedSequence(0))
    assert r.ok
    assert r.delta_bic0 >= 0
    assert 0 <= r.upsilon < 1
    assert r.order == r.p + r.q
    assert r.persistence == sum(map(abs, r.phi)) + sum(map(abs, r.theta))
    assert (r.upsilon == 0) == ((r.p, r.q) == ((0, 0) if r.base_used == ARMA00 else (1, 0)))


def test_evaluate_window_failure_is_a_row():
    r = evaluate_window(np.full(100, 1.0), 5.0, SelectionConfig(**SMALL), np.random.SeedSequence(0))
    assert r.status == "DegenerateInput"
    assert r.variance == 0.0
    assert math.isnan(r.upsilon)


def test_run_indicator_short_series():
    with pytest.raises(WindowTooLong):
        run_indicator(TimeSeries(np.zeros(50)), SelectionConfig(**SMALL))


def test_run_indicator_white_noise_and_threads(tmp_path):
    s = TimeSeries(np.random.default_rng(11).standard_normal(600))
    cfg = SelectionConfig(p_max=2, q_max=2, tau=350, stride=25)
    serial = run_indicator(s, cfg, threads=1)
    parallel = run_indicator(s, cfg, threads=3)
    assert serial == parallel
    times = [r.end_time for r in serial]
    assert times == sorted(times) and len(times) == 11
    good = [r.upsilon == 0 or (r.p, r.q) == ((0, 0) if r.base_used == ARMA00 else (1, 0))
            for r in serial]
    assert np.mean(good) >= 0.9
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results(f1, serial)
    write_results(f2, parallel)
    assert f1.read_bytes() == f2.read_bytes()
    lines = f1.read_text().splitlines()
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(lines) == 12


def test_run_indicator_reports_failed_windows():
    x = np.r_[np.zeros(60), np.random.default_rng(0).standard_normal(60)]
    res = run_indicator(TimeSeries(x), SelectionConfig(**{**SMALL, "tau": 50, "stride": 10}), threads=1)
    assert res[0].status == "DegenerateInput"
    assert res[-1].ok
