"""Command-line entry point.

::

    mfgp run CONFIG.json [--out DIR] [--seed N] [--jobs N] [--analytic-lowfi]
    mfgp sweep CONFIG.json ...
    mfgp simulate-hh [--i-ext F] [--t-end F] [--dt F]
    mfgp list-benchmarks

Config files are JSON objects.  Only ``benchmark`` is required; every other
key falls back to the benchmark's reproduction defaults::

    {
      "benchmark": "phase_shift",
      "methods": ["kriging", "ar1", "nargp", "delays", "gpe"],
      "n_high": [10, 15, 20, 25],
      "n_low": 100,
      "n_trials": 10,
      "seed": 0,
      "n_test": 500,
      "delay_step": null,
      "analytic_lowfi": false,
      "restarts": 5
    }
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .gp_core import InvalidArgumentError
from .harness import (
    ExperimentConfig,
    ExperimentError,
    default_jobs,
    format_table,
    run_experiment,
    write_summary,
)
from .models import HHParameters, HHState, benchmark, benchmark_names, hh_simulate

logger = logging.getLogger("mfgp")

CONFIG_KEYS = {
    "benchmark": str,
    "methods": list,
    "n_high": list,
    "n_low": int,
    "n_trials": int,
    "seed": int,
    "n_test": int,
    "delay_step": (int, float, type(None)),
    "analytic_lowfi": bool,
    "restarts": int,
}


class ConfigError(InvalidArgumentError):
    """A config file is malformed or violates the schema."""


def parse_config(path) -> ExperimentConfig:
    """Read a JSON experiment config and fill in the defaults.

    Raises
    ------
    FileNotFoundError
        ``path`` does not exist.
    ConfigError
        Malformed JSON, unknown or mistyped keys, or invalid values.
    """
    path = Path(path)
    with path.open() as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(raw, source=str(path))


def config_from_dict(raw, source: str = "config") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown field {key!r}")
        kind = CONFIG_KEYS[key]
        bad_bool = isinstance(value, bool) and kind is not bool
        if bad_bool or not isinstance(value, kind):
            raise ConfigError(f"{source}: field {key!r} has the wrong type")
    if "benchmark" not in raw:
        raise ConfigError(f"{source}: field 'benchmark' is required")
    for key in ("methods", "n_high"):
        if key in raw and not raw[key]:
            raise ConfigError(f"{source}: field {key!r} must be a non-empty list")
    if any(isinstance(n, bool) or not isinstance(n, int) for n in raw.get("n_high", [])):
        raise ConfigError(f"{source}: field 'n_high' must hold integers")
    overrides = {k: v for k, v in raw.items() if k != "benchmark"}
    try:
        return ExperimentConfig.with_defaults(raw["benchmark"], **overrides)
    except InvalidArgumentError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _output_dir(args) -> Path:
    out = args.out or os.environ.get("MFGP_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    config = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.analytic_lowfi:
        overrides["analytic_lowfi"] = True
    if overrides:
        fields = {f: getattr(config, f) for f in config.__dataclass_fields__}
        fields.update(overrides)
        config = ExperimentConfig(**fields)
    return config


def _experiment(args, sweep: bool) -> int:
    config = _load(args)
    if sweep and len(config.n_high) < 2:
        raise ConfigError(f"{args.config}: field 'n_high': a sweep needs at least two sample sizes")
    out = _output_dir(args)
    jobs = args.jobs or default_jobs()
    status = 0
    try:
        result = run_experiment(
            config, jobs=jobs, results_path=out / "results.csv", timings=args.timings,
            predictions_dir=None if sweep else out,
        )
    except ExperimentError as exc:
        result, status = exc.result, 1
        print(f"error: {exc}", file=sys.stderr)
    write_summary(out / "summary.csv", result)
    print(f"{config.benchmark}: mean log10 relative L2 error over {config.n_trials} trials")
    print(format_table(result))
    return status


def _simulate(args) -> int:
    params = HHParameters(i_ext=args.i_ext)
    traj = hh_simulate(params, HHState.resting(), args.t_end, dt=args.dt)
    out = _output_dir(args)
    path = out / f"hh_trajectory_iext_{args.i_ext:g}.csv"
    traj.to_csv(path)
    print(f"wrote {len(traj.t)} samples to {path}")
    return 0


def _list(args) -> int:
    for name in benchmark_names():
        pair = benchmark(name) if name in benchmark_names(include_hh=False) else None
        desc = pair.description if pair is not None else "two Hodgkin-Huxley voltage traces"
        print(f"{name}\t{desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfgp", description="Multi-fidelity GP benchmarks.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug output and tracebacks")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $MFGP_OUT or .)")

    for name, helptext in (("run", "run an experiment and dump predictions"),
                           ("sweep", "sensitivity sweep over n_high")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--jobs", type=int, help="worker processes (default: available CPUs)")
        p.add_argument("--analytic-lowfi", action="store_true",
                       help="embed the exact low-fidelity function instead of a GP surrogate")
        p.add_argument("--timings", action="store_true",
                       help="record wall_time_ms (makes results.csv run-dependent)")
        p.set_defaults(func=lambda a, s=(name == "sweep"): _experiment(a, s))

    p = sub.add_parser("simulate-hh", parents=[common], help="write one Hodgkin-Huxley trajectory")
    p.add_argument("--i-ext", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.set_defaults(func=_simulate)

    p = sub.add_parser("list-benchmarks", help="print the benchmark names")
    p.set_defaults(func=_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        if args.verbose >= 2:
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
