"""Command-line front end: ``tipwatch {simulate,indicate,equilibria,noise}``.

Every output CSV gets a ``<output>.manifest.json`` sidecar recording the
command, the effective configuration and its hash. Exit codes: 0 success,
2 bad arguments or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import scenarios as sc
from .errors import ConfigError, NoEquilibrium, NonFiniteState, TipwatchError
from .series import load_csv, write_columns
from .upsilon import SelectionConfig, default_threads, run_indicator, write_results

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_hash(config) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(output, subcommand, config, seed=None, config_path=None, inputs=()):
    """Sidecar next to ``output``; contains nothing time- or host-dependent."""
    manifest = {
        "subcommand": subcommand,
        "config_path": str(config_path) if config_path else None,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(output)],
        "config": _jsonable(config),
        "config_hash": config_hash(config),
        "tool_version": __version__,
    }
    path = Path(str(output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------- commands


def _load_box(args):
    if args.config:
        loaded = sc.load_config(args.config)
    else:
        loaded = sc.load_preset(args.preset)
    return loaded


def cmd_simulate(args) -> int:
    scenario, params = _load_box(args)
    if params is None:
        raise UsageError("simulate needs a box-model preset or config; use 'noise' for colored noise")
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.noise is not None:
        scenario = dataclasses.replace(scenario, noise_amplitude=args.noise)
    traj = sc.integrate(scenario, params)
    write_columns(args.output, traj.columns())
    write_manifest(args.output, "simulate", {"scenario": scenario, "params": params},
                   scenario.seed, args.config or f"preset:{args.preset}")
    return EXIT_OK


def _selection(args) -> SelectionConfig:
    return SelectionConfig(
        p_max=args.p_max, q_max=args.q_max, d_max=args.d_max, tau=args.tau, stride=args.stride,
        delta_bic_significance=args.significance, exclude_pure_ma=args.exclude_pure_ma,
        stepwise=args.stepwise, count_sigma2=args.count_sigma2, seed=args.seed,
    )


def cmd_indicate(args) -> int:
    try:
        config = _selection(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    series = load_csv(args.input, args.column)
    if config.tau > len(series):
        raise UsageError(f"tau={config.tau} exceeds series length {len(series)}")
    threads = args.threads if args.threads is not None else default_threads()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = run_indicator(series, config, threads=threads)
    write_results(args.output, results)
    write_manifest(args.output, "indicate", {"selection": config, "column": args.column},
                   config.seed, None, [args.input])
    return EXIT_OK


EQUILIBRIUM_COLUMNS = ("H", "S_N", "S_T", "Gamma", "branch", "stable",
                       "eig1_re", "eig1_im", "eig2_re", "eig2_im")


def cmd_equilibria(args) -> int:
    if not args.h_min < args.h_max:
        raise UsageError("need h_min < h_max")
    if args.steps < 2:
        raise UsageError("need steps >= 2")
    params = sc.DEFAULT_PARAMS
    if args.volume_scale is not None:
        params = dataclasses.replace(params, volume_scale=args.volume_scale)
    grid = np.linspace(args.h_min, args.h_max, args.steps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        points = sc.equilibrium_branches(grid, params)
    if not points:
        raise NoEquilibrium(f"no equilibria in H range [{args.h_min}, {args.h_max}]")
    cols = {c: [] for c in EQUILIBRIUM_COLUMNS}
    for e in points:
        ev = e.eigenvalues
        for name, val in zip(EQUILIBRIUM_COLUMNS,
                             (e.H, e.S_N, e.S_T, e.Gamma, e.branch_label, e.stable,
                              ev[0].real, ev[0].imag, ev[1].real, ev[1].imag)):
            cols[name].append(val)
    write_columns(args.output, cols)
    write_manifest(args.output, "equilibria",
                   {"h_min": args.h_min, "h_max": args.h_max, "steps": args.steps, "params": params})
    return EXIT_OK


def cmd_noise(args) -> int:
    if args.config:
        cfg, extra = sc.load_config(args.config)
    else:
        cfg, extra = sc.load_preset("colored_noise")
    if extra is not None or not isinstance(cfg, sc.ColoredNoiseConfig):
        raise UsageError("noise needs a config with kind = colored_noise")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    series = sc.colored_noise_series(**dataclasses.asdict(cfg))
    write_columns(args.output, {"t": series.times, "x": series.values})
    write_manifest(args.output, "noise", cfg, cfg.seed, args.config or "preset:colored_noise")
    return EXIT_OK


# ----------------------------------------------------------------------- parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tipwatch", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tipwatch {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate the box model for a hosing scenario")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=[p for p in sc.PRESETS if p != "colored_noise"])
    src.add_argument("--config", type=Path)
    s.add_argument("--seed", type=int)
    s.add_argument("--noise", type=float, help="override noise amplitude (salinity/sqrt(yr))")
    s.add_argument("-o", "--output", type=Path, required=True)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("indicate", help="sliding-window Upsilon and classical indicators")
    i.add_argument("input", type=Path)
    i.add_argument("--column", default="S_N")
    i.add_argument("--tau", type=int, default=350, help="window length in points")
    i.add_argument("--stride", type=int, default=1)
    i.add_argument("--p-max", type=int, default=5)
    i.add_argument("--q-max", type=int, default=5)
    i.add_argument("--d-max", type=int, default=2)
    i.add_argument("--significance", type=float, default=2.0)
    i.add_argument("--stepwise", action="store_true")
    i.add_argument("--exclude-pure-ma", action="store_true")
    i.add_argument("--count-sigma2", action="store_true")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--threads", type=_positive_int)
    i.add_argument("-o", "--output", type=Path, required=True)
    i.set_defaults(func=cmd_indicate)

    e = sub.add_parser("equilibria", help="equilibrium branches over a hosing grid")
    e.add_argument("--h-min", type=float, default=-0.5)
    e.add_argument("--h-max", type=float, default=0.6)
    e.add_argument("--steps", type=int, default=221)
    e.add_argument("--volume-scale", type=float)
    e.add_argument("-o", "--output", type=Path, required=True)
    e.set_defaults(func=cmd_equilibria)

    n = sub.add_parser("noise", help="colored-noise test series")
    n.add_argument("--config", type=Path)
    n.add_argument("--seed", type=int)
    n.add_argument("-o", "--output", type=Path, required=True)
    n.set_defaults(func=cmd_noise)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"tipwatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteState, NoEquilibrium) as exc:
        print(f"tipwatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TipwatchError as exc:
        # input problems (missing column, non-uniform sampling, ...)
        print(f"tipwatch {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"tipwatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
