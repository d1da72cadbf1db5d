"""Multi-fidelity Gaussian process regression with delay-coordinate embeddings.

Subpackages
-----------
gp_core
    Exact GP regression with an ARD squared-exponential kernel.
fusion
    Kriging, AR1 co-kriging, NARGP and delay-embedded GPs.
models
    Analytic benchmark pairs and a Hodgkin-Huxley simulator.
harness
    Seeded experiments, error metric and CSV output.
"""

from .gp_core import (
    ConditioningError,
    InvalidArgumentError,
    KernelParams,
    TrainedGP,
    condition,
    fit,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "InvalidArgumentError",
    "KernelParams",
    "TrainedGP",
    "condition",
    "fit",
    "kernel_eval",
    "kernel_matrix",
    "log_marginal_likelihood",
    "predict",
]
