"""The fusion strategies and the end-to-end two-stage pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ..gp_core import InvalidArgumentError, KernelParams, TrainedGP, fit, predict
from .ar1 import AR1Model, fit_ar1
from .embedding import (
    AnalyticEvaluator,
    EmbeddingConfig,
    SurrogateEvaluator,
    build_embedding,
    train_low_fidelity,
)

KRIGING = "Kriging"
AR1 = "AR1"
NARGP = "NARGP"
GPE = "GPE"

KRIGING_EMBEDDING = EmbeddingConfig(0, None, include_t=True, include_fl=False)
NARGP_EMBEDDING = EmbeddingConfig(0, None, include_t=True, include_fl=True)


@dataclass(frozen=True)
class FidelityPair:
    """High- and low-fidelity samples on a common interval.

    ``f_l`` optionally carries the exact low-fidelity function (with
    ``f_l_domain`` where it may be evaluated); ``delay_step`` is the
    preferred delay of the problem, if it has one.
    """

    t_h: np.ndarray
    y_h: np.ndarray
    t_l: np.ndarray
    y_l: np.ndarray
    domain: tuple
    f_l: Optional[Callable] = field(default=None, compare=False)
    f_l_domain: Optional[tuple] = None
    delay_step: Optional[float] = None

    def __post_init__(self):
        for name in ("t_h", "y_h", "t_l", "y_l"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.t_h.size != self.y_h.size or self.t_l.size != self.y_l.size:
            raise InvalidArgumentError("inputs and targets must have matching lengths")
        a, b = self.domain
        if not a <= b:
            raise InvalidArgumentError("domain must be an interval [a, b] with a <= b")
        tol = 1e-12 * max(1.0, b - a)
        for t in (self.t_h, self.t_l):
            if t.size and (t.min() < a - tol or t.max() > b + tol):
                raise InvalidArgumentError(f"sample points must lie in [{a}, {b}]")

    def default_delay_step(self) -> float:
        """The problem's own delay, else domain length over the low-fidelity count."""
        if self.delay_step is not None:
            return self.delay_step
        if self.t_l.size == 0:
            raise InvalidArgumentError("no low-fidelity data to derive a delay step from")
        return (self.domain[1] - self.domain[0]) / self.t_l.size

    def with_high(self, t_h, y_h) -> "FidelityPair":
        return FidelityPair(t_h, y_h, self.t_l, self.y_l, self.domain, self.f_l, self.f_l_domain,
                            self.delay_step)


@dataclass(frozen=True)
class FusionModel:
    """A fitted fusion method.  Call :meth:`predict` for the high-fidelity posterior."""

    method: str
    high_fi_gp: Union[TrainedGP, AR1Model]
    embedding: EmbeddingConfig
    low_fi: Optional[Callable] = None
    low_fi_surrogate: Optional[TrainedGP] = None
    rho: Optional[float] = None

    def embed(self, t) -> np.ndarray:
        return build_embedding(t, self.low_fi, self.embedding)

    def predict(self, t):
        t = np.asarray(t, dtype=float).ravel()
        if self.method == AR1:
            return self.high_fi_gp.predict_high(t.reshape(-1, 1))
        return predict(self.high_fi_gp, self.embed(t))


def low_fidelity_evaluator(pair: FidelityPair, seed: int, analytic: bool = False,
                           surrogate: Optional[TrainedGP] = None, **fit_kwargs):
    """The ``f_l`` used for embeddings: analytic if requested, else a GP surrogate.

    Returns ``(evaluator, surrogate_or_None)``.
    """
    if analytic:
        if pair.f_l is None:
            raise InvalidArgumentError("pair has no analytic low-fidelity function")
        return AnalyticEvaluator(pair.f_l, pair.f_l_domain), None
    if surrogate is None:
        surrogate = train_low_fidelity(pair.t_l, pair.y_l, seed=_low_seed(seed), **fit_kwargs)
    return SurrogateEvaluator(surrogate, pair.domain), surrogate


def _low_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def build_kriging(pair: FidelityPair, seed: int = 0, **fit_kwargs) -> FusionModel:
    """Single-fidelity GP on the high-fidelity data alone."""
    if pair.t_h.size < 1:
        raise InvalidArgumentError("need at least one high-fidelity point")
    gp = fit(pair.t_h.reshape(-1, 1), pair.y_h, seed=seed, **fit_kwargs)
    return FusionModel(KRIGING, gp, KRIGING_EMBEDDING)


def build_ar1(pair: FidelityPair, seed: int = 0, rho: Optional[float] = None,
              low_init: Optional[KernelParams] = None, **fit_kwargs) -> FusionModel:
    """AR1 co-kriging; ``rho`` pins the scaling factor when given.

    ``low_init`` warm-starts the low-fidelity kernel (see :func:`fit_ar1`).
    """
    model = fit_ar1(pair.t_l, pair.y_l, pair.t_h, pair.y_h, seed=seed, rho=rho, low_init=low_init,
                    **fit_kwargs)
    return FusionModel(AR1, model, KRIGING_EMBEDDING, rho=model.rho)


def build_gpe(pair: FidelityPair, config: EmbeddingConfig, seed: int = 0, analytic: bool = False,
              low_fi_surrogate: Optional[TrainedGP] = None, **fit_kwargs) -> FusionModel:
    """GP on the embedding of ``t_h`` described by ``config``.

    A precomputed ``low_fi_surrogate`` may be passed to skip refitting the
    low-fidelity GP.
    """
    if pair.t_h.size < 1:
        raise InvalidArgumentError("need at least one high-fidelity point")
    config = config.resolved(pair.default_delay_step())
    evaluator, surrogate = None, None
    if config.uses_low_fidelity:
        evaluator, surrogate = low_fidelity_evaluator(
            pair, seed, analytic=analytic, surrogate=low_fi_surrogate
        )
    x = build_embedding(pair.t_h, evaluator, config)
    gp = fit(x, pair.y_h, seed=seed, **fit_kwargs)
    method = NARGP if config == NARGP_EMBEDDING else GPE
    return FusionModel(method, gp, config, evaluator, surrogate)


def build_nargp(pair: FidelityPair, seed: int = 0, analytic: bool = False,
                low_fi_surrogate: Optional[TrainedGP] = None, **fit_kwargs) -> FusionModel:
    """GP over ``(t, f_l(t))``."""
    return build_gpe(pair, NARGP_EMBEDDING, seed, analytic, low_fi_surrogate, **fit_kwargs)


@dataclass(frozen=True)
class MethodSpec:
    """A named method variant as used by experiments and the CLI."""

    name: str
    kind: str
    embedding: EmbeddingConfig = KRIGING_EMBEDDING

    def build(self, pair: FidelityPair, seed: int, analytic: bool = False,
              low_fi_surrogate: Optional[TrainedGP] = None, **fit_kwargs) -> FusionModel:
        if self.kind == KRIGING:
            return build_kriging(pair, seed, **fit_kwargs)
        if self.kind == AR1:
            low_init = None if low_fi_surrogate is None else low_fi_surrogate.params
            return build_ar1(pair, seed, low_init=low_init, **fit_kwargs)
        return build_gpe(pair, self.embedding, seed, analytic, low_fi_surrogate, **fit_kwargs)


METHODS = {
    spec.name: spec
    for spec in [
        MethodSpec("kriging", KRIGING),
        MethodSpec("ar1", AR1),
        MethodSpec("nargp", NARGP, NARGP_EMBEDDING),
        MethodSpec("gpe", GPE, EmbeddingConfig(2, None, include_t=True, include_fl=True)),
        MethodSpec("gpe2", GPE, EmbeddingConfig(4, None, include_t=True, include_fl=True)),
        MethodSpec("delays", GPE, EmbeddingConfig(2, None, include_t=False, include_fl=True)),
        MethodSpec("gp_fl", GPE, EmbeddingConfig(0, None, include_t=False, include_fl=True)),
        MethodSpec("fl_delay", GPE, EmbeddingConfig(1, None, include_t=False, include_fl=True)),
    ]
}


def method_spec(name: str) -> MethodSpec:
    try:
        return METHODS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


def run_fusion_pipeline(pair: FidelityPair, method, test_points, seed: int = 0,
                        analytic: bool = False, low_fi_surrogate: Optional[TrainedGP] = None,
                        **fit_kwargs):
    """Fit ``method`` (a name or :class:`MethodSpec`) and predict at ``test_points``.

    Returns ``(means, variances)``.
    """
    spec = method_spec(method) if isinstance(method, str) else method
    test_points = np.asarray(test_points, dtype=float).ravel()
    a, b = pair.domain
    tol = 1e-12 * max(1.0, b - a)
    if test_points.size and (test_points.min() < a - tol or test_points.max() > b + tol):
        raise InvalidArgumentError(f"test points must lie in [{a}, {b}]")
    model = spec.build(pair, seed, analytic=analytic, low_fi_surrogate=low_fi_surrogate, **fit_kwargs)
    return model.predict(test_points)
