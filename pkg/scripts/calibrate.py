"""Reproduce the box-model calibrations stored in the presets.

1. volume_scale: bisection so that the deterministic critical fall time of the
   R-tipping protocol (H 0 -> 0.37 over 100 yr, plateau 400 yr) sits at 300 yr,
   midway between the tipping (320 yr) and non-tipping (280 yr) presets. The
   B-tipping timeline and the Hopf point are reported as checks.
2. noise amplitudes on a decade grid:
   * control: largest amplitude with no transition in 20/20 constant-H runs
   * N-tipping: smallest amplitude with >= 10/20 transitions in 2000 yr
   * R-tipping: largest amplitude for which both presets behave as their
     zero-noise counterparts in 20/20 seeds

Usage: python scripts/calibrate.py [--quick]
"""

import argparse
import dataclasses
import warnings

import numpy as np

from tipwatch import scenarios as sc

R_TIP = sc.HosingScenario(H0=0.0, Hpert=0.37, Trise=100, Tpert=400, Tfall=300)
GRID = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2)


def ends_upper(traj, params, level=None):
    if level is None:
        level = sc.unstable_branch_level([traj.H[-1]], params)[0]
    tail = int(round(100 / traj.dt))
    return traj.S_N[-tail:].mean() > level


def critical_fall(params, lo=150.0, hi=600.0, tol=1.0):
    """Smallest fall time that ends on the lower branch without noise."""
    def tips(tf):
        return not ends_upper(sc.integrate(dataclasses.replace(R_TIP, Tfall=tf), params), params)
    if not tips(hi) or tips(lo):
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if tips(mid) else (mid, hi)
    return 0.5 * (lo + hi)


def calibrate_volume(target=300.0, lo=1e10, hi=5e10, rel=2e-3):
    """Critical fall time grows with the volumes (slower relaxation)."""
    while hi / lo - 1 > rel:
        mid = np.sqrt(lo * hi)
        tf = critical_fall(dataclasses.replace(sc.DEFAULT_PARAMS, volume_scale=mid))
        print(f"  volume_scale={mid:.4e}: critical Tfall={tf}")
        if tf is not None and tf > target:
            hi = mid
        else:
            lo = mid
    return np.sqrt(lo * hi)


def count(seeds, scenario, params, predicate):
    return sum(predicate(sc.integrate(dataclasses.replace(scenario, seed=s), params)) for s in seeds)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="5 seeds instead of 20, skip bisection")
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    seeds = range(5 if args.quick else 20)
    params = sc.DEFAULT_PARAMS

    print("volume_scale")
    if not args.quick:
        print(f"  calibrated: {calibrate_volume():.4e} (default {params.volume_scale:.4e})")
    print(f"  critical Tfall at default: {critical_fall(params):.1f} yr")
    print(f"  Hopf H*={sc.hopf_point(params):.4f}, fold H={sc.fold_point(params).H:.4f}")
    b, _ = sc.load_preset("b_tip")
    det = sc.integrate(dataclasses.replace(b, noise_amplitude=0.0), params)
    print(f"  zero-noise B-tipping crossing t={sc.tipping_time(det, params)}")

    control = sc.HosingScenario(Hpert=0.0)
    upper_level = sc.unstable_branch_level([0.0], params)[0]
    print("control runs at H=0 (transitions / seeds)")
    for amp in GRID:
        n = count(seeds, dataclasses.replace(control, noise_amplitude=amp), params,
                  lambda tr: tr.S_N.min() < upper_level)
        print(f"  {amp:.0e}: {n}/{len(seeds)}")

    for name, start in (("n_tip_up", "lower"), ("n_tip_down", "upper")):
        s, _ = sc.load_preset(name)
        level = sc.unstable_branch_level([s.H0], params)[0]
        crossed = (lambda tr: tr.S_N.max() > level) if start == "lower" else (lambda tr: tr.S_N.min() < level)
        print(f"{name} (H={s.H0}) transitions / seeds")
        for amp in GRID[2:]:
            n = count(seeds, dataclasses.replace(s, noise_amplitude=amp), params, crossed)
            print(f"  {amp:.0e}: {n}/{len(seeds)}")

    tip, _ = sc.load_preset("r_tip")
    notip, _ = sc.load_preset("r_notip")
    print("R-tipping: seeds matching zero-noise outcome (Tfall=280 upper, 320 lower)")
    for amp in GRID[:4]:
        a = count(seeds, dataclasses.replace(notip, noise_amplitude=amp), params,
                  lambda tr: ends_upper(tr, params, upper_level))
        c = count(seeds, dataclasses.replace(tip, noise_amplitude=amp), params,
                  lambda tr: not ends_upper(tr, params, upper_level))
        print(f"  {amp:.0e}: Tfall=280 {a}/{len(seeds)}, Tfall=320 {c}/{len(seeds)}")


if __name__ == "__main__":
    main()
