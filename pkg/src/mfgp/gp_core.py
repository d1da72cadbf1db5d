"""Exact Gaussian process regression with an ARD squared-exponential kernel.

The covariance between two points is

    k(x, x') = signal_variance * exp(-0.5 * sum_i ard_weights[i] * (x_i - x'_i)**2)

and independent Gaussian noise of variance ``noise_variance`` is added on the
diagonal of the training covariance.  Hyperparameters are fitted by maximising
the log marginal likelihood in log-space with L-BFGS-B and several seeded
restarts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
DEFAULT_RESTARTS = 5


class InvalidArgumentError(ValueError):
    """Raised for malformed inputs (shape mismatch, non-finite values)."""


class ConditioningError(np.linalg.LinAlgError):
    """Raised when a covariance matrix cannot be factorised even with jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of one ARD-RBF Gaussian process."""

    ard_weights: np.ndarray
    signal_variance: float
    noise_variance: float = 0.0

    def __post_init__(self):
        w = np.array(self.ard_weights, dtype=float, ndmin=1)
        if w.ndim != 1:
            raise InvalidArgumentError("ard_weights must be a vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgumentError("ard_weights must be finite and >= 0")
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise InvalidArgumentError("signal_variance must be > 0")
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise InvalidArgumentError("noise_variance must be >= 0")
        w.setflags(write=False)
        object.__setattr__(self, "ard_weights", w)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def dim(self) -> int:
        return self.ard_weights.size

    def to_log_vector(self) -> np.ndarray:
        """Pack as ``[log w_1..log w_d, log signal_variance, log noise_variance]``.

        Zero weights or zero noise map to ``-inf``.
        """
        with np.errstate(divide="ignore"):
            return np.concatenate(
                [np.log(self.ard_weights), [np.log(self.signal_variance), np.log(self.noise_variance)]]
            )

    @classmethod
    def from_log_vector(cls, z) -> "KernelParams":
        z = np.asarray(z, dtype=float)
        return cls(np.exp(z[:-2]), float(np.exp(z[-2])), float(np.exp(z[-1])))


def _as_matrix(x, name="inputs") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 1-D or 2-D array, got shape {x.shape}")
    return x


def _check_dim(x: np.ndarray, params: KernelParams, name: str):
    if x.shape[1] != params.dim:
        raise InvalidArgumentError(
            f"{name} has dimension {x.shape[1]} but the kernel has {params.dim} ARD weights"
        )


def kernel_eval(x, x_prime, params: KernelParams) -> float:
    """Covariance between two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape or x.ndim != 1 or x.size != params.dim:
        raise InvalidArgumentError(
            f"points of shape {x.shape} and {x_prime.shape} do not match {params.dim} ARD weights"
        )
    d = x - x_prime
    return params.signal_variance * float(np.exp(-0.5 * np.sum(params.ard_weights * d * d)))


def _sq_dist_terms(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (d, N1, N2)."""
    diff = x1.T[:, :, None] - x2.T[:, None, :]
    return diff * diff


def kernel_matrix(x1, x2, params: KernelParams) -> np.ndarray:
    """Cross-covariance matrix ``K[i, j] = k(x1[i], x2[j])`` (noise excluded)."""
    x1 = _as_matrix(x1, "x1")
    x2 = _as_matrix(x2, "x2")
    _check_dim(x1, params, "x1")
    _check_dim(x2, params, "x2")
    sq = _sq_dist_terms(x1, x2)
    return params.signal_variance * np.exp(-0.5 * np.tensordot(params.ard_weights, sq, axes=1))


def jittered_cholesky(matrix: np.ndarray, scale: float, jitter=None):
    """Cholesky factor of ``matrix + jitter * scale * I``.

    With ``jitter=None`` the relative jitter starts at ``JITTER_START`` and
    grows tenfold on each failure up to ``JITTER_MAX``.  A float pins it.

    Returns ``(L, relative_jitter)``.
    """
    n = matrix.shape[0]
    eye = np.eye(n)
    schedule = [float(jitter)] if jitter is not None else _jitter_schedule()
    for rel in schedule:
        try:
            return np.linalg.cholesky(matrix + rel * scale * eye), rel
        except np.linalg.LinAlgError:
            continue
    raise ConditioningError(
        f"covariance of size {n} not positive definite with relative jitter up to {schedule[-1]:g}"
    )


def _jitter_schedule():
    out = []
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        out.append(rel)
        rel *= 10.0
    return out


def gaussian_lml(y: np.ndarray, chol: np.ndarray):
    """Log density of ``y`` under N(0, L L^T) and the solve vector ``alpha``."""
    alpha = cho_solve((chol, True), y)
    n = y.size
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * LOG_2PI
    return float(lml), alpha


def cholesky_inverse(chol: np.ndarray) -> np.ndarray:
    """``(L L^T)^-1`` from the lower Cholesky factor."""
    inv, info = lapack.dpotri(chol, lower=1)
    if info != 0:
        raise ConditioningError(f"dpotri failed with info={info}")
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def gradient_weights(alpha: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """``alpha alpha^T - K^-1``; the LML gradient is ``0.5 * sum(W * dK)``."""
    return np.outer(alpha, alpha) - cholesky_inverse(chol)


def _lml_and_grad(x, y, params: KernelParams, jitter=None):
    n = x.shape[0]
    sq = _sq_dist_terms(x, x)
    kf = params.signal_variance * np.exp(-0.5 * np.tensordot(params.ard_weights, sq, axes=1))
    # mean(diag) of the noise-free kernel is the signal variance
    chol, rel = jittered_cholesky(
        kf + params.noise_variance * np.eye(n), params.signal_variance, jitter
    )
    lml, alpha = gaussian_lml(y, chol)
    w = gradient_weights(alpha, chol)
    wk = w * kf
    trace_w = np.trace(w)
    grad = np.empty(params.dim + 2)
    grad[: params.dim] = -0.25 * params.ard_weights * np.tensordot(sq, wk, axes=([1, 2], [0, 1]))
    # the jitter scales with the signal variance, so it moves with it
    grad[-2] = 0.5 * (np.sum(wk) + rel * params.signal_variance * trace_w)
    grad[-1] = 0.5 * params.noise_variance * trace_w
    return lml, grad, chol, alpha, rel


def log_marginal_likelihood(inputs, targets, params: KernelParams, jitter=None):
    """Log marginal likelihood and its gradient w.r.t. the log-hyperparameters.

    Parameters
    ----------
    inputs : array_like, shape (N, d) or (N,)
    targets : array_like, shape (N,)
        Used as given; no centring happens here.
    params : KernelParams
    jitter : float, optional
        Relative diagonal jitter (multiplied by the signal variance).  When
        omitted the escalation schedule is used.

    Returns
    -------
    lml : float
    grad : ndarray, shape (d + 2,)
        Ordered like :meth:`KernelParams.to_log_vector`.
    """
    x = _as_matrix(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    _check_dim(x, params, "inputs")
    if x.shape[0] != y.size or y.size < 1:
        raise InvalidArgumentError("inputs and targets must have the same nonzero length")
    lml, grad, *_ = _lml_and_grad(x, y, params, jitter)
    return lml, grad


@dataclass(frozen=True)
class TrainedGP:
    """A fitted GP.  Arrays are read-only; share freely across threads."""

    inputs: np.ndarray
    targets: np.ndarray
    offset: float
    params: KernelParams
    chol_factor: np.ndarray
    alpha: np.ndarray
    jitter: float
    log_likelihood: float
    restart_log_likelihoods: tuple = field(default=())

    def __post_init__(self):
        for name in ("inputs", "targets", "chol_factor", "alpha"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def predict(self, query):
        return predict(self, query)

    def __call__(self, query) -> np.ndarray:
        return predict(self, query)[0]


def condition(inputs, targets, params: KernelParams, jitter=None, offset=None) -> TrainedGP:
    """Build a :class:`TrainedGP` for fixed hyperparameters (no optimisation).

    ``offset`` defaults to the target mean; targets are stored centred.
    """
    x = _as_matrix(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    _check_dim(x, params, "inputs")
    if x.shape[0] != y.size or y.size < 1:
        raise InvalidArgumentError("inputs and targets must have the same nonzero length")
    if offset is None:
        offset = float(np.mean(y))
    yc = y - offset
    lml, _, chol, alpha, rel = _lml_and_grad(x, yc, params, jitter)
    kn = kernel_matrix(x, x, params) + params.noise_variance * np.eye(y.size)
    alpha = _refine(kn, chol, yc, alpha)
    return TrainedGP(x, yc, float(offset), params, chol, alpha, rel, lml)


def _refine(matrix, chol, y, alpha, max_iter=200):
    """Iterated-Tikhonov refinement of ``alpha`` towards the unjittered system.

    The jittered factor is the preconditioner.  Eigen-directions of the
    kernel matrix well above the jitter converge in a few steps, those near
    it slowly, those far below it not at all; stops once the residual
    stalls.
    """
    resid = y - matrix @ alpha
    norm = np.linalg.norm(resid)
    for _ in range(max_iter):
        if norm <= 1e-14 * max(np.linalg.norm(y), 1e-300):
            break
        cand = alpha + cho_solve((chol, True), resid)
        cand_resid = y - matrix @ cand
        cand_norm = np.linalg.norm(cand_resid)
        if not cand_norm < (1.0 - 1e-3) * norm:
            break
        alpha, resid, norm = cand, cand_resid, cand_norm
    return alpha


def predict(model: TrainedGP, query):
    """Posterior mean and latent (noise-free) variance at the query points."""
    q = _as_matrix(query, "query")
    _check_dim(q, model.params, "query")
    ks = kernel_matrix(model.inputs, q, model.params)
    mean = ks.T @ model.alpha + model.offset
    v = solve_triangular(model.chol_factor, ks, lower=True)
    var = model.params.signal_variance - np.sum(v * v, axis=0)
    return mean, np.maximum(var, 0.0)


def _log_bounds(x: np.ndarray, y_scale: float, fixed_noise: bool):
    """Box bounds for the log-parameter vector, scaled to the data."""
    span = np.ptp(x, axis=0) if x.shape[0] > 1 else np.ones(x.shape[1])
    span = np.where(span > 0, span, 1.0)
    bounds = [(np.log(1e-6 / s**2), np.log(1e8 / s**2)) for s in span]
    bounds.append((np.log(1e-6 * y_scale), np.log(1e6 * y_scale)))
    if not fixed_noise:
        bounds.append((np.log(1e-12 * y_scale), np.log(10.0 * y_scale)))
    return bounds


def _reference_point(x: np.ndarray, y_scale: float) -> np.ndarray:
    span = np.ptp(x, axis=0) if x.shape[0] > 1 else np.ones(x.shape[1])
    span = np.where(span > 0, span, 1.0)
    return np.concatenate([np.log(10.0 / span**2), [np.log(y_scale), np.log(1e-3 * y_scale)]])


def _has_conflicting_duplicates(x: np.ndarray, y: np.ndarray) -> bool:
    _, inverse = np.unique(x, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    lo = np.full(inverse.max() + 1, np.inf)
    hi = np.full(inverse.max() + 1, -np.inf)
    np.minimum.at(lo, inverse, y)
    np.maximum.at(hi, inverse, y)
    return bool(np.any(hi > lo))


def _minimize(objective, z0: np.ndarray, bounds):
    """L-BFGS-B from ``z0`` with the objective rescaled by its initial gradient norm.

    Without the rescaling the first (identity-Hessian) step of L-BFGS-B is as
    long as the raw gradient, which for badly conditioned starts throws the
    iterate onto the box corner where the kernel is diagonal and the gradient
    in the length-scales vanishes.  Returns ``(z, f)`` in original units, or
    the start itself if the search ended worse than it began.
    """
    f0, g0 = objective(z0)
    scale = max(1.0, float(np.linalg.norm(g0))) if f0 < 1e25 else 1.0

    def scaled(z):
        f, g = objective(z)
        return f / scale, g / scale

    res = minimize(scaled, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"gtol": 1e-5 / scale, "maxiter": 1000})
    f = float(res.fun) * scale
    return (res.x, f) if f <= f0 else (z0, f0)


def fit(inputs, targets, seed: int = 0, restarts: int = DEFAULT_RESTARTS, noise_variance=None) -> TrainedGP:
    """Fit hyperparameters by maximising the log marginal likelihood.

    Targets are centred; the mean is stored as the model offset.  Each restart
    starts from a data-scaled reference point multiplied per coordinate by a
    log-uniform factor in [1e-2, 1e2] drawn from ``seed``.  The best restart
    wins (ties go to the lowest index).

    Parameters
    ----------
    inputs : array_like, shape (N, d) or (N,)
    targets : array_like, shape (N,)
    seed : int
    restarts : int
    noise_variance : float, optional
        Pin the noise variance instead of optimising it.  Use ``0.0`` for
        noise-free interpolation.
    """
    x = _as_matrix(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    if x.shape[0] != y.size or y.size < 1:
        raise InvalidArgumentError("inputs and targets must have the same nonzero length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("inputs and targets must be finite")
    if restarts < 1:
        raise InvalidArgumentError("restarts must be >= 1")

    offset = float(np.mean(y))
    yc = y - offset
    y_scale = float(np.var(yc))
    if y_scale <= 0:
        y_scale = 1.0
    d = x.shape[1]
    fixed_noise = noise_variance is not None
    if fixed_noise and noise_variance < 0:
        raise InvalidArgumentError("noise_variance must be >= 0")
    if fixed_noise and noise_variance == 0 and _has_conflicting_duplicates(x, y):
        raise ConditioningError("duplicate inputs with different targets cannot be interpolated without noise")

    bounds = _log_bounds(x, y_scale, fixed_noise)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    ref = _reference_point(x, y_scale)[: d + 1 + (not fixed_noise)]
    rng = np.random.default_rng(seed)

    def unpack(z):
        noise = noise_variance if fixed_noise else float(np.exp(z[-1]))
        return KernelParams(np.exp(z[:d]), float(np.exp(z[d])), noise)

    def objective(z):
        try:
            lml, grad, *_ = _lml_and_grad(x, yc, unpack(z))
        except ConditioningError:
            return 1e25, np.zeros_like(z)
        g = grad[: d + 1] if fixed_noise else grad
        return -lml, -g

    best = None
    starts = []
    for r in range(restarts):
        z0 = np.clip(ref + rng.uniform(np.log(1e-2), np.log(1e2), size=ref.size), lo, hi)
        z, f = _minimize(objective, z0, bounds)
        starts.append(-f)
        if np.isfinite(f) and f < 1e25 and (best is None or f < best[1]):
            best = (z, f)
    if best is None:
        raise ConditioningError("no restart produced a factorisable covariance")

    params = unpack(best[0])
    model = condition(x, y, params, offset=offset)
    logger.debug("fit N=%d d=%d lml=%.6g params=%s", y.size, d, model.log_likelihood, params)
    return TrainedGP(
        model.inputs, model.targets, model.offset, params, model.chol_factor, model.alpha,
        model.jitter, model.log_likelihood, tuple(starts),
    )
