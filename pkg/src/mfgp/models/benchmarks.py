"""Analytic two-fidelity benchmark functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

PHASE = np.pi / 10


@dataclass(frozen=True)
class BenchmarkPair:
    """A high/low fidelity function pair on a closed interval.

    ``delay_step`` is the benchmark's preferred delay; ``None`` means "use
    the low-fidelity grid spacing".  ``f_l_domain`` bounds where ``f_l`` may
    be evaluated (``None``: everywhere).
    """

    name: str
    f_h: Callable[[np.ndarray], np.ndarray]
    f_l: Callable[[np.ndarray], np.ndarray]
    domain: tuple
    default_sizes: tuple
    delay_step: Optional[float] = None
    description: str = ""
    f_l_domain: Optional[tuple] = None

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]


def _arr(t):
    return np.asarray(t, dtype=float)


def simple_high(t):
    return np.sin(8 * np.pi * _arr(t)) ** 2


def sine_low(t):
    return np.sin(8 * np.pi * _arr(t))


def embed_high(t):
    t = _arr(t)
    return t**2 + np.sin(8 * np.pi * t) ** 2


def phase_shift_high(t):
    t = _arr(t)
    return t**2 + np.sin(8 * np.pi * t + PHASE) ** 2


def periodicity_high(t):
    return np.sin(8 * np.pi * _arr(t) + PHASE)


def periodicity_low(t):
    return np.sin(6 * np.sqrt(2) * np.pi * _arr(t))


def discontinuity_low(t):
    """Forrester-type curve with a downward jump of 5 left of t = 0.5.

    The point t = 0.5 belongs to the right-hand piece.
    """
    t = _arr(t)
    base = 0.5 * (6 * t - 2) ** 2 * np.sin(12 * t - 4) + 10 * (t - 0.5)
    return np.where(t < 0.5, base - 5.0, base)


def discontinuity_high(t):
    t = _arr(t)
    return 2 * discontinuity_low(t) - 20 * t + 20


BENCHMARKS = {
    "simple": BenchmarkPair(
        "simple", simple_high, sine_low, (0.0, 1.0), (15, 100),
        description="f_h = sin^2(8 pi t), f_l = sin(8 pi t)",
    ),
    "embed_demo": BenchmarkPair(
        "embed_demo", embed_high, sine_low, (0.0, 0.25), (7, 100), delay_step=1 / 400,
        description="f_h = t^2 + sin^2(8 pi t), f_l = sin(8 pi t)",
    ),
    "phase_shift": BenchmarkPair(
        "phase_shift", phase_shift_high, sine_low, (0.0, 1.0), (10, 100), delay_step=0.02,
        description="f_h = t^2 + sin^2(8 pi t + pi/10), f_l = sin(8 pi t)",
    ),
    "periodicity": BenchmarkPair(
        "periodicity", periodicity_high, periodicity_low, (0.0, 1.0), (15, 200), delay_step=0.02,
        description="f_h = sin(8 pi t + pi/10), f_l = sin(6 sqrt(2) pi t)",
    ),
    "discontinuity": BenchmarkPair(
        "discontinuity", discontinuity_high, discontinuity_low, (0.0, 1.0), (10, 200),
        description="f_l piecewise with a jump at t = 0.5, f_h = 2 f_l - 20 t + 20",
    ),
}

HH_NAME = "hodgkin_huxley"


def benchmark_names(include_hh: bool = True) -> list:
    names = list(BENCHMARKS)
    if include_hh:
        names.append(HH_NAME)
    return names


def benchmark(name: str) -> BenchmarkPair:
    """Look up a benchmark pair by name (``hodgkin_huxley`` simulates on demand)."""
    if name == HH_NAME:
        from .hodgkin_huxley import hh_benchmark

        return hh_benchmark()
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {benchmark_names()}") from None
