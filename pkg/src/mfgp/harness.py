"""Seeded benchmark experiments, the error metric and CSV artifacts.

An experiment runs every ``(method, n_high, trial)`` cell of a config.
High-fidelity points are drawn at random per ``(n_high, trial)`` and shared
by all methods; the low-fidelity data always sit on a fixed equispaced grid.
"""

from __future__ import annotations

import csv
import logging
import os
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fusion import DomainError, FidelityPair, method_spec
from .fusion.methods import _low_seed
from .gp_core import ConditioningError, InvalidArgumentError, TrainedGP, fit
from .models import benchmark, benchmark_names
from .models.hodgkin_huxley import IntegrationError

logger = logging.getLogger(__name__)

LOG_ERROR_FLOOR = -16.0
DEFAULT_TEST_POINTS = 500

SWEEP_NHIGH = (10, 15, 20, 25)
EMBEDDING_COMPARISON = ("kriging", "ar1", "nargp", "gpe", "gpe2")

# Per-benchmark defaults: (methods, n_high, n_low).
DEFAULTS = {
    "simple": (("kriging", "gp_fl"), (15,), 100),
    "embed_demo": (("nargp", "fl_delay"), (7,), 100),
    "phase_shift": (("kriging", "ar1", "nargp", "delays", "gpe"), SWEEP_NHIGH, 100),
    "periodicity": (EMBEDDING_COMPARISON, SWEEP_NHIGH, 200),
    "discontinuity": (EMBEDDING_COMPARISON, SWEEP_NHIGH, 200),
    "hodgkin_huxley": (EMBEDDING_COMPARISON, (20, 30, 40), 300),
}

OK = "ok"
FAILED = "failed"


class ExperimentError(RuntimeError):
    """More than half of the trials of some (method, n_high) cell failed."""


def log_l2_error(pred, truth) -> float:
    """``log10(||pred - truth|| / ||truth||)``, floored at -16."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise InvalidArgumentError(f"length mismatch: {pred.size} predictions, {truth.size} truths")
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise InvalidArgumentError("reference vector has zero norm")
    rel = np.linalg.norm(pred - truth) / norm
    if rel == 0:
        return LOG_ERROR_FLOOR
    return max(float(np.log10(rel)), LOG_ERROR_FLOOR)


def sample_high_fidelity(domain, n_high: int, seed: int) -> np.ndarray:
    """``n_high`` sorted uniform draws on ``domain``."""
    if int(n_high) != n_high or n_high < 1:
        raise InvalidArgumentError("n_high must be a positive integer")
    a, b = float(domain[0]), float(domain[1])
    if not a <= b:
        raise InvalidArgumentError("domain must satisfy a <= b")
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(a, b, size=int(n_high)))


def _derive(*entropy) -> int:
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1)[0])


def trial_seed(master: int, method: str, n_high: int, trial: int) -> int:
    """Seed of one ``(method, n_high, trial)`` cell."""
    return _derive(master, zlib.crc32(method.encode()), n_high, trial)


def subset_seed(master: int, n_high: int, trial: int) -> int:
    """Seed of the high-fidelity draw, shared by all methods of a trial."""
    return _derive(master, n_high, trial, 0x5EED)


def high_fidelity_points(config: "ExperimentConfig", domain, n_high: int, trial: int) -> np.ndarray:
    """The high-fidelity inputs of one trial; every method of the trial sees these."""
    return sample_high_fidelity(domain, n_high, subset_seed(config.seed, n_high, trial))


@dataclass(frozen=True)
class ExperimentConfig:
    """A full experiment: one benchmark, several methods and sample sizes.

    ``delay_step=None`` uses the benchmark's own delay when it has one and
    otherwise the low-fidelity grid spacing.
    """

    benchmark: str
    methods: tuple
    n_high: tuple
    n_low: int
    n_trials: int = 10
    seed: int = 0
    n_test: int = DEFAULT_TEST_POINTS
    delay_step: Optional[float] = None
    analytic_lowfi: bool = False
    restarts: int = 5

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "n_high", tuple(int(n) for n in self.n_high))
        if self.benchmark not in benchmark_names():
            raise InvalidArgumentError(
                f"benchmark: unknown {self.benchmark!r}; choose from {benchmark_names()}"
            )
        if not self.methods:
            raise InvalidArgumentError("methods: at least one method is required")
        for m in self.methods:
            method_spec(m)
        if len(set(self.methods)) != len(self.methods):
            raise InvalidArgumentError("methods: duplicate entries")
        if not self.n_high or any(n < 1 for n in self.n_high):
            raise InvalidArgumentError("n_high: need positive sample sizes")
        if len(set(self.n_high)) != len(self.n_high):
            raise InvalidArgumentError("n_high: duplicate entries")
        for name, lo in (("n_low", 2), ("n_trials", 1), ("n_test", 2), ("restarts", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < lo:
                raise InvalidArgumentError(f"{name}: must be an integer >= {lo}")
        if self.delay_step is not None and not self.delay_step > 0:
            raise InvalidArgumentError("delay_step: must be positive")

    @classmethod
    def with_defaults(cls, benchmark: str, **overrides) -> "ExperimentConfig":
        """Config for ``benchmark`` with the reproduction defaults filled in."""
        if benchmark not in DEFAULTS:
            raise InvalidArgumentError(
                f"benchmark: unknown {benchmark!r}; choose from {benchmark_names()}"
            )
        methods, n_high, n_low = DEFAULTS[benchmark]
        values = dict(methods=methods, n_high=n_high, n_low=n_low)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(benchmark=benchmark, **values)


@dataclass(frozen=True)
class TrialResult:
    benchmark: str
    method: str
    n_high: int
    trial: int
    log_l2_error: float
    status: str
    wall_time_ms: float
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass
class ExperimentResult:
    """Per-trial results in canonical order plus per-cell aggregates."""

    config: ExperimentConfig
    trials: list
    means: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def mean(self, method: str, n_high: int) -> float:
        return self.means[(method, n_high)]

    def table(self) -> dict:
        """``{method: array of means over config.n_high}``."""
        return {
            m: np.array([self.means[(m, n)] for n in self.config.n_high])
            for m in self.config.methods
        }


def _aggregate(config: ExperimentConfig, trials) -> tuple:
    means, failures = {}, {}
    for m in config.methods:
        for n in config.n_high:
            cell = [r for r in trials if r.method == m and r.n_high == n]
            good = [r.log_l2_error for r in cell if r.ok]
            failures[(m, n)] = len(cell) - len(good)
            means[(m, n)] = float(np.mean(good)) if good else float("nan")
    return means, failures


def _fixed_data(config: ExperimentConfig) -> dict:
    pair = benchmark(config.benchmark)
    a, b = pair.domain
    t_l = np.linspace(a, b, config.n_low)
    t_test = np.linspace(a, b, config.n_test)
    delay = config.delay_step if config.delay_step is not None else pair.delay_step
    base = FidelityPair(np.empty(0), np.empty(0), t_l, pair.f_l(t_l), pair.domain, pair.f_l,
                        pair.f_l_domain, delay)
    return dict(pair=pair, base=base, t_test=t_test, truth=pair.f_h(t_test))


def benchmark_data(config: ExperimentConfig) -> dict:
    """Fixed pieces of an experiment: grids, low-fidelity data and the shared surrogate.

    The low-fidelity surrogate is trained once per experiment (it depends
    only on the grid and the master seed).  With ``analytic_lowfi`` it is
    still trained when AR1 needs it as a warm start.
    """
    data = _fixed_data(config)
    surrogate = None
    if not config.analytic_lowfi or "ar1" in config.methods:
        base = data["base"]
        surrogate = fit(base.t_l.reshape(-1, 1), base.y_l, seed=_low_seed(config.seed),
                        restarts=config.restarts)
    data["surrogate"] = surrogate
    return data


def _run_cell(config: ExperimentConfig, method: str, n_high: int, trial: int,
              surrogate: Optional[TrainedGP], data: Optional[dict] = None, predictions: bool = False):
    """Run one trial; returns ``(TrialResult, (mean, var) or None)``."""
    if data is None:
        data = _worker_data(config, surrogate)
    pair = data["pair"]
    start = time.perf_counter()
    t_h = high_fidelity_points(config, pair.domain, n_high, trial)
    fpair = data["base"].with_high(t_h, pair.f_h(t_h))
    seed = trial_seed(config.seed, method, n_high, trial)
    spec = method_spec(method)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = spec.build(fpair, seed, analytic=config.analytic_lowfi,
                               low_fi_surrogate=surrogate, restarts=config.restarts)
            mean, var = model.predict(data["t_test"])
        err = log_l2_error(mean, data["truth"])
        status, message, pred = OK, "", (mean, var)
    except (ConditioningError, DomainError, IntegrationError, np.linalg.LinAlgError) as exc:
        err, status, message, pred = float("nan"), FAILED, f"{type(exc).__name__}: {exc}", None
        logger.warning("trial failed (%s, n_high=%d, trial=%d): %s", method, n_high, trial, message)
    elapsed = 1000.0 * (time.perf_counter() - start)
    result = TrialResult(config.benchmark, method, n_high, trial, err, status, elapsed, message)
    return result, (pred if predictions else None)


_WORKER_CACHE: dict = {}


def _worker_data(config: ExperimentConfig, surrogate) -> dict:
    key = (config.benchmark, config.n_low, config.n_test, config.delay_step)
    if key not in _WORKER_CACHE:
        _WORKER_CACHE[key] = _fixed_data(config)
    return _WORKER_CACHE[key]


def _worker(args):
    return _run_cell(*args)


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def run_experiment(config: ExperimentConfig, jobs: int = 1, results_path=None, timings: bool = False,
                   predictions_dir=None) -> ExperimentResult:
    """Run every cell of ``config``.

    Parameters
    ----------
    jobs : int
        Worker processes; 1 runs in-process.  Results do not depend on it.
    results_path : path, optional
        Stream ``results.csv`` rows here as trials finish (in canonical order).
    timings : bool
        Record wall times in ``results.csv``; off by default so that reruns
        are byte-identical.
    predictions_dir : path, optional
        Write ``predictions_<benchmark>_<method>.csv`` for trial 0 of the
        first ``n_high``.

    Raises
    ------
    ExperimentError
        If more than half of any cell's trials failed.  The CSV output is
        complete when this is raised.
    """
    data = benchmark_data(config)
    surrogate = data["surrogate"]
    cells = [(m, n, k) for m in config.methods for n in config.n_high for k in range(config.n_trials)]
    first = config.n_high[0]

    def wants(m, n, k):
        return predictions_dir is not None and n == first and k == 0

    writer = _ResultsWriter(results_path, timings) if results_path is not None else None
    trials = []
    try:
        if jobs <= 1:
            outputs = (_run_cell(config, m, n, k, surrogate, data, wants(m, n, k)) for m, n, k in cells)
        else:
            pool = ProcessPoolExecutor(max_workers=jobs)
            futures = [pool.submit(_worker, (config, m, n, k, surrogate, None, wants(m, n, k)))
                       for m, n, k in cells]
            outputs = (f.result() for f in futures)
        for (m, n, k), (result, pred) in zip(cells, outputs):
            trials.append(result)
            if writer is not None:
                writer.write(result)
            if pred is not None:
                write_predictions(predictions_dir, config.benchmark, m, data["t_test"], *pred, data["truth"])
            logger.info("%s n_high=%d trial=%d: %s %.4f", m, n, k, result.status, result.log_l2_error)
    finally:
        if writer is not None:
            writer.close()
        if jobs > 1:
            pool.shutdown(cancel_futures=True)

    means, failures = _aggregate(config, trials)
    out = ExperimentResult(config, trials, means, failures)
    for (m, n), count in failures.items():
        if count:
            warnings.warn(f"{count} of {config.n_trials} trials failed for {m} at n_high={n}")
    bad = [(m, n) for (m, n), count in failures.items() if 2 * count > config.n_trials]
    if bad:
        err = ExperimentError(f"more than half the trials failed in cells {bad}")
        err.result = out
        raise err
    return out


def sensitivity_sweep(config: ExperimentConfig, **kwargs) -> dict:
    """Mean log error table ``{method: array over config.n_high}``."""
    if len(config.n_high) < 2:
        raise InvalidArgumentError("n_high: a sweep needs at least two sample sizes")
    return run_experiment(config, **kwargs).table()


def _fmt(x) -> str:
    return format(float(x), ".17g")


RESULTS_HEADER = ["benchmark", "method", "n_high", "trial", "log_l2_error", "status", "wall_time_ms"]
SUMMARY_HEADER = ["benchmark", "method", "n_high", "mean_log_l2", "n_failed"]


class _ResultsWriter:
    def __init__(self, path, timings: bool):
        self.timings = timings
        self.fh = open(path, "w", newline="")
        self.csv = csv.writer(self.fh, lineterminator="\n")
        self.csv.writerow(RESULTS_HEADER)
        self.fh.flush()

    def write(self, r: TrialResult):
        self.csv.writerow([
            r.benchmark, r.method, r.n_high, r.trial, _fmt(r.log_l2_error), r.status,
            _fmt(r.wall_time_ms) if self.timings else "",
        ])
        self.fh.flush()

    def close(self):
        self.fh.close()


def write_results(path, result: ExperimentResult, timings: bool = False):
    writer = _ResultsWriter(path, timings)
    try:
        for r in result.trials:
            writer.write(r)
    finally:
        writer.close()


def write_summary(path, result: ExperimentResult):
    cfg = result.config
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for m in cfg.methods:
            for n in cfg.n_high:
                w.writerow([cfg.benchmark, m, n, _fmt(result.means[(m, n)]), result.failures[(m, n)]])


def write_predictions(directory, benchmark_name: str, method: str, t, mean, var, truth):
    path = os.path.join(directory, f"predictions_{benchmark_name}_{method}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "variance", "truth"])
        for row in zip(t, mean, var, truth):
            w.writerow([_fmt(v) for v in row])
    return path


def format_table(result: ExperimentResult) -> str:
    """Plain-text summary, one row per method and one column per n_high."""
    cfg = result.config
    head = ["method"] + [f"n={n}" for n in cfg.n_high]
    rows = [head]
    for m in cfg.methods:
        rows.append([m] + [f"{result.means[(m, n)]:.3f}" for n in cfg.n_high])
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
