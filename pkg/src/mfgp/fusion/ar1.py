"""Linear autoregressive (AR1) co-kriging over two fidelity levels.

Joint prior over stacked observations ``[y_l; y_h]``::

    cov(f_l, f_l) = k1
    cov(f_l, f_h) = rho * k1
    cov(f_h, f_h) = rho**2 * k1 + k2

with ARD-RBF ``k1`` and ``k2`` and independent noise per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from ..gp_core import (
    ConditioningError,
    KernelParams,
    TrainedGP,
    _as_matrix,
    _log_bounds,
    _minimize,
    _reference_point,
    _refine,
    _sq_dist_terms,
    fit,
    gaussian_lml,
    jittered_cholesky,
    kernel_matrix,
    gradient_weights,
)
from ..gp_core import predict as gp_predict


@dataclass(frozen=True)
class AR1Model:
    x_l: np.ndarray
    x_h: np.ndarray
    targets: np.ndarray
    offset_l: float
    offset_h: float
    params_l: KernelParams
    params_d: KernelParams
    rho: float
    chol_factor: np.ndarray
    alpha: np.ndarray
    log_likelihood: float
    high_only: Optional[TrainedGP] = None

    def predict_high(self, query):
        """Posterior mean and latent variance of ``f_h`` at the query points."""
        if self.high_only is not None:
            return gp_predict(self.high_only, query)
        q = _as_matrix(query, "query")
        k1 = self.params_l
        ks = np.vstack([
            self.rho * kernel_matrix(self.x_l, q, k1),
            self.rho**2 * kernel_matrix(self.x_h, q, k1) + kernel_matrix(self.x_h, q, self.params_d),
        ])
        mean = ks.T @ self.alpha + self.offset_h
        v = solve_triangular(self.chol_factor, ks, lower=True)
        prior = self.rho**2 * k1.signal_variance + self.params_d.signal_variance
        return mean, np.maximum(prior - np.sum(v * v, axis=0), 0.0)


class _JointSystem:
    """Covariance blocks and derivatives for fixed training inputs."""

    def __init__(self, x_l, x_h):
        self.x_l, self.x_h = x_l, x_h
        self.nl, self.nh = x_l.shape[0], x_h.shape[0]
        x = np.vstack([x_l, x_h])
        self.sq = _sq_dist_terms(x, x)
        self.sq_h = self.sq[:, self.nl:, self.nl:]
        self.d = x.shape[1]
        self.eye = np.eye(self.nl + self.nh)

    def covariance(self, p1: KernelParams, p2: KernelParams, rho, noise_l, noise_h):
        nl = self.nl
        k1 = p1.signal_variance * np.exp(-0.5 * np.tensordot(p1.ard_weights, self.sq, axes=1))
        k2 = p2.signal_variance * np.exp(-0.5 * np.tensordot(p2.ard_weights, self.sq_h, axes=1))
        scale = np.ones_like(k1)
        scale[:nl, nl:] = rho
        scale[nl:, :nl] = rho
        scale[nl:, nl:] = rho**2
        k = scale * k1
        k[nl:, nl:] += k2
        noise = np.concatenate([np.full(nl, noise_l), np.full(self.nh, noise_h)])
        return k, k1, k2, scale, noise

    def lml(self, y, p1, p2, rho, noise_l, noise_h, want_grad=True):
        k, k1, k2, scale, noise = self.covariance(p1, p2, rho, noise_l, noise_h)
        kn = k + np.diag(noise)
        chol, rel = jittered_cholesky(kn, float(np.mean(np.diag(k))))
        lml, alpha = gaussian_lml(y, chol)
        if not want_grad:
            return lml, None, chol, alpha, kn
        nl = self.nl
        w = gradient_weights(alpha, chol)
        w1 = w * scale * k1
        w_hh = w[nl:, nl:]
        w2 = w_hh * k2
        diag = np.diag(w)
        grad = np.concatenate([
            -0.25 * p1.ard_weights * np.tensordot(self.sq, w1, axes=([1, 2], [0, 1])),
            [0.5 * np.sum(w1)],
            -0.25 * p2.ard_weights * np.tensordot(self.sq_h, w2, axes=([1, 2], [0, 1])),
            [0.5 * np.sum(w2)],
            [np.sum(w[:nl, nl:] * k1[:nl, nl:]) + rho * np.sum(w_hh * k1[nl:, nl:])],
            [0.5 * noise_l * np.sum(diag[:nl]), 0.5 * noise_h * np.sum(diag[nl:])],
        ])
        return lml, grad, chol, alpha, kn


def fit_ar1(t_l, y_l, t_h, y_h, seed: int = 0, restarts: int = 5, rho: Optional[float] = None,
            noise_variance: Optional[float] = None, low_init: Optional[KernelParams] = None) -> AR1Model:
    """Fit the two-level model by maximising the joint marginal likelihood.

    ``rho=None`` optimises the scaling factor (starting from 1 on every
    restart); a number pins it.  With ``rho == 0`` the likelihood factorises
    into the two levels, which are then fitted separately; the high level
    is exactly a single-fidelity fit on ``(t_h, y_h)`` with ``seed``.

    ``low_init`` (typically the hyperparameters of a low-fidelity-only fit)
    fixes the starting point of ``k1`` on every restart; only ``k2`` is then
    drawn at random.
    """
    x_l = _as_matrix(t_l, "t_l")
    x_h = _as_matrix(t_h, "t_h")
    y_l = np.asarray(y_l, dtype=float).ravel()
    y_h = np.asarray(y_h, dtype=float).ravel()
    if x_l.shape[0] < 1 or x_h.shape[0] < 1:
        raise ValueError("AR1 needs at least one point at each fidelity")
    off_l, off_h = float(np.mean(y_l)), float(np.mean(y_h))
    y = np.concatenate([y_l - off_l, y_h - off_h])
    system = _JointSystem(x_l, x_h)

    if rho is not None and rho == 0:
        low = fit(x_l, y_l, seed=seed + 1, restarts=restarts, noise_variance=noise_variance)
        high = fit(x_h, y_h, seed=seed, restarts=restarts, noise_variance=noise_variance)
        p1, p2 = low.params, high.params
        lml, _, chol, alpha, kn = system.lml(
            y, p1, p2, 0.0, p1.noise_variance, p2.noise_variance, want_grad=False
        )
        return AR1Model(x_l, x_h, y, off_l, off_h, p1, p2, 0.0, chol, alpha,
                        low.log_likelihood + high.log_likelihood, high_only=high)

    d = system.d
    var_l = float(np.var(y_l)) or 1.0
    var_h = float(np.var(y_h)) or 1.0
    b1 = _log_bounds(np.vstack([x_l, x_h]), var_l, fixed_noise=True)
    b2 = _log_bounds(x_h, var_h, fixed_noise=True)
    r1 = _reference_point(np.vstack([x_l, x_h]), var_l)[: d + 1]
    r2 = _reference_point(x_h, var_h)[: d + 1]
    ratio = np.sqrt(var_h / var_l)
    free_rho = rho is None
    free_noise = noise_variance is None
    bounds = list(b1) + list(b2)
    ref = list(r1) + list(r2)
    if free_rho:
        bounds.append((-100.0 * ratio, 100.0 * ratio))
    if free_noise:
        bounds += [(np.log(1e-12 * var_l), np.log(10 * var_l)), (np.log(1e-12 * var_h), np.log(10 * var_h))]
    ref = np.array(ref)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def unpack(z):
        p1 = KernelParams(np.exp(z[:d]), float(np.exp(z[d])))
        p2 = KernelParams(np.exp(z[d + 1:2 * d + 1]), float(np.exp(z[2 * d + 1])))
        i = 2 * d + 2
        r = float(z[i]) if free_rho else float(rho)
        i += int(free_rho)
        if free_noise:
            nl, nh = float(np.exp(z[i])), float(np.exp(z[i + 1]))
        else:
            nl = nh = float(noise_variance)
        return p1, p2, r, nl, nh

    def objective(z):
        try:
            lml, grad, *_ = system.lml(y, *unpack(z))
        except ConditioningError:
            return 1e25, np.zeros_like(z)
        g = list(grad[: 2 * d + 2])
        if free_rho:
            g.append(grad[2 * d + 2])
        if free_noise:
            g += list(grad[2 * d + 3:])
        return -lml, -np.array(g)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        z0 = np.clip(ref + rng.uniform(np.log(1e-2), np.log(1e2), size=ref.size), lo[: ref.size], hi[: ref.size])
        if low_init is not None:
            z0[: d + 1] = np.clip(
                np.log(np.concatenate([low_init.ard_weights, [low_init.signal_variance]])),
                lo[: d + 1], hi[: d + 1],
            )
        tail = []
        if free_rho:
            tail.append(1.0)
        if free_noise:
            start_l = 1e-3 * var_l
            if low_init is not None:
                start_l = min(max(low_init.noise_variance, 1e-12 * var_l), 10 * var_l)
            tail += [np.log(start_l), np.log(1e-3 * var_h)]
        z0 = np.concatenate([z0, tail])
        z, f = _minimize(objective, z0, bounds)
        if f < 1e25 and (best is None or f < best[1]):
            best = (z, f)
    if best is None:
        raise ConditioningError("AR1 joint covariance could not be factorised")

    p1, p2, r, nl, nh = unpack(best[0])
    p1 = KernelParams(p1.ard_weights, p1.signal_variance, nl)
    p2 = KernelParams(p2.ard_weights, p2.signal_variance, nh)
    lml, _, chol, alpha, kn = system.lml(y, p1, p2, r, nl, nh, want_grad=False)
    alpha = _refine(kn, chol, y, alpha)
    return AR1Model(x_l, x_h, y, off_l, off_h, p1, p2, r, chol, alpha, lml)
