"""Extended input spaces built from delays of the low-fidelity function."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..gp_core import InvalidArgumentError, TrainedGP, fit

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """A shifted point lies outside where the low-fidelity evaluator is defined."""


class ExtrapolationWarning(UserWarning):
    """A surrogate evaluator was queried outside its training interval."""


@dataclass(frozen=True)
class EmbeddingConfig:
    """Columns of the extended space, in this fixed order:

    ``t`` (if ``include_t``), ``f_l(t)`` (if ``include_fl``), then
    ``f_l(t - k * delay_step)`` for ``k = 1..num_delays``.

    ``delay_step=None`` defers the choice to the data (see
    :meth:`FidelityPair.default_delay_step`).
    """

    num_delays: int = 0
    delay_step: Optional[float] = None
    include_t: bool = True
    include_fl: bool = True

    def __post_init__(self):
        if int(self.num_delays) != self.num_delays or self.num_delays < 0:
            raise InvalidArgumentError("num_delays must be a non-negative integer")
        if self.delay_step is not None and not self.delay_step > 0:
            raise InvalidArgumentError("delay_step must be positive")
        if self.dimension == 0:
            raise InvalidArgumentError("embedding has no columns")

    @property
    def dimension(self) -> int:
        return int(self.include_t) + int(self.include_fl) + int(self.num_delays)

    @property
    def uses_low_fidelity(self) -> bool:
        return self.include_fl or self.num_delays > 0

    def resolved(self, default_step: float) -> "EmbeddingConfig":
        if self.delay_step is not None or self.num_delays == 0:
            return self
        return EmbeddingConfig(self.num_delays, float(default_step), self.include_t, self.include_fl)

    def shifts(self) -> np.ndarray:
        """Offsets subtracted from t for every low-fidelity column."""
        ks = np.arange(0 if self.include_fl else 1, self.num_delays + 1)
        if self.num_delays > 0 and self.delay_step is None:
            raise InvalidArgumentError("delay_step is unresolved")
        return ks * (self.delay_step or 0.0)


class AnalyticEvaluator:
    """Wrap an explicit low-fidelity function.

    ``domain=None`` means defined everywhere; otherwise evaluating outside
    ``domain`` is a :class:`DomainError`.
    """

    max_extrapolation = 0.0

    def __init__(self, func, domain=None):
        self.func = func
        self.domain = None if domain is None else (float(domain[0]), float(domain[1]))

    def __call__(self, t):
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)


class SurrogateEvaluator:
    """Posterior mean of a low-fidelity GP used as ``f_l``.

    Queries outside ``domain`` but within ``max_extrapolation`` of it are
    allowed with an :class:`ExtrapolationWarning`.
    """

    def __init__(self, gp: TrainedGP, domain, max_extrapolation: Optional[float] = None):
        self.gp = gp
        self.domain = (float(domain[0]), float(domain[1]))
        if max_extrapolation is None:
            max_extrapolation = 0.1 * (self.domain[1] - self.domain[0])
        self.max_extrapolation = float(max_extrapolation)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.gp.predict(t.reshape(-1, 1))[0].reshape(t.shape)


def check_domain(evaluator, points: np.ndarray):
    """Raise or warn for points outside the evaluator's declared domain."""
    domain = getattr(evaluator, "domain", None)
    if domain is None or points.size == 0:
        return
    lo, hi = domain
    below = lo - points.min()
    above = points.max() - hi
    excess = max(below, above)
    if excess <= 1e-12 * max(1.0, hi - lo):
        return
    allowed = getattr(evaluator, "max_extrapolation", 0.0)
    if excess > allowed:
        raise DomainError(
            f"shifted points reach [{points.min():.6g}, {points.max():.6g}], outside "
            f"[{lo:.6g}, {hi:.6g}] by {excess:.3g} (allowed {allowed:.3g})"
        )
    warnings.warn(
        ExtrapolationWarning(
            f"low-fidelity surrogate extrapolated {excess:.3g} beyond [{lo:.6g}, {hi:.6g}]"
        ),
        stacklevel=3,
    )
    logger.debug("surrogate extrapolation of %.3g beyond %s", excess, domain)


def build_embedding(t, f_l_eval, config: EmbeddingConfig) -> np.ndarray:
    """Map points ``t`` to rows of the extended space described by ``config``."""
    t = np.asarray(t, dtype=float).ravel()
    cols = []
    if config.include_t:
        cols.append(t)
    if config.uses_low_fidelity:
        shifts = config.shifts()
        pts = t[:, None] - shifts[None, :]
        check_domain(f_l_eval, pts)
        vals = np.asarray(f_l_eval(pts.ravel()), dtype=float).reshape(pts.shape)
        if not np.all(np.isfinite(vals)):
            raise DomainError("low-fidelity evaluator returned non-finite values")
        cols.extend(vals.T)
    return np.column_stack(cols) if cols else np.empty((t.size, 0))


def train_low_fidelity(t_l, y_l, seed: int = 0, **fit_kwargs) -> TrainedGP:
    """Fit the 1-D GP used as a stand-in for the low-fidelity function."""
    t_l = np.asarray(t_l, dtype=float).ravel()
    y_l = np.asarray(y_l, dtype=float).ravel()
    if t_l.size < 2:
        raise InvalidArgumentError("need at least 2 low-fidelity points")
    return fit(t_l.reshape(-1, 1), y_l, seed=seed, **fit_kwargs)
