"""Multi-fidelity fusion: Kriging, AR1 co-kriging, NARGP and delay-embedded GPs."""

from .ar1 import AR1Model, fit_ar1
from .embedding import (
    AnalyticEvaluator,
    DomainError,
    EmbeddingConfig,
    ExtrapolationWarning,
    SurrogateEvaluator,
    build_embedding,
    train_low_fidelity,
)
from .methods import (
    AR1,
    GPE,
    KRIGING,
    METHODS,
    NARGP,
    FidelityPair,
    FusionModel,
    MethodSpec,
    build_ar1,
    build_gpe,
    build_kriging,
    build_nargp,
    low_fidelity_evaluator,
    method_spec,
    run_fusion_pipeline,
)

__all__ = [
    "AR1",
    "GPE",
    "KRIGING",
    "METHODS",
    "NARGP",
    "AR1Model",
    "AnalyticEvaluator",
    "DomainError",
    "EmbeddingConfig",
    "ExtrapolationWarning",
    "FidelityPair",
    "FusionModel",
    "MethodSpec",
    "SurrogateEvaluator",
    "build_ar1",
    "build_embedding",
    "build_gpe",
    "build_kriging",
    "build_nargp",
    "fit_ar1",
    "low_fidelity_evaluator",
    "method_spec",
    "run_fusion_pipeline",
    "train_low_fidelity",
]
