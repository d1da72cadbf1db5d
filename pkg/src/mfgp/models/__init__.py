"""Benchmark generators: analytic function pairs and the Hodgkin-Huxley simulator."""

from .benchmarks import BENCHMARKS, HH_NAME, BenchmarkPair, benchmark, benchmark_names
from .hodgkin_huxley import (
    HHParameters,
    HHState,
    IntegrationError,
    Trajectory,
    hh_benchmark,
    hh_fidelity_pair,
    hh_rates,
    hh_simulate,
)

__all__ = [
    "BENCHMARKS",
    "HH_NAME",
    "BenchmarkPair",
    "HHParameters",
    "HHState",
    "IntegrationError",
    "Trajectory",
    "benchmark",
    "benchmark_names",
    "hh_benchmark",
    "hh_fidelity_pair",
    "hh_rates",
    "hh_simulate",
]
