"""Monte-Carlo estimators of the smoothed objective, its gradient and Hessian,
plus the closed-form oracle for Gaussian-mixture targets.

The smoothed objective is g(x; t) = -lam * log((p0 * k_t)(x)) where
p0 is the Gibbs density exp(-f/lam)/Z and k_t the isotropic Gaussian kernel
of variance t.  The gradient estimator used throughout is

    grad^(0)(x; t) = (lam / t) * (x - sum_i wbar_i y_i),

the softmax-weighted form whose single step coincides exactly with the
softmax solution update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    ContractViolationError,
    EstimationError,
    Objective,
    RngStream,
    as_vector,
    sample_gaussian,
)
from .objectives import GmmSpec

__all__ = [
    "SmoothingParams",
    "SmoothedEval",
    "GmmSmoothOracle",
    "estimate_smoothed",
    "estimate_smoothed_hessian",
    "gmm_smoothed_exact",
    "weights_from_costs",
]


@dataclass(frozen=True)
class SmoothingParams:
    """Kernel variance t, temperature lam, and sample size for one estimate."""

    t: float
    lam: float
    n_samples: int

    def __post_init__(self):
        if not (self.t > 0):
            raise ContractViolationError(f"kernel variance t must be positive, got {self.t}")
        if not (self.lam > 0):
            raise ContractViolationError(f"temperature must be positive, got {self.lam}")
        if self.n_samples < 2:
            raise ContractViolationError("n_samples must be >= 2")


@dataclass(frozen=True)
class SmoothedEval:
    """One Monte-Carlo evaluation of the smoothed objective.

    ess is the effective sample size (sum w)^2 / sum w^2 of the softmax
    weights, an estimator-health diagnostic in (0, N].
    """

    value: float
    gradient: np.ndarray
    ess: float
    raw_weight_logsum: float


def weights_from_costs(costs: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Normalized Gibbs weights and their log-sum, tolerant of +inf costs.

    +inf costs get exactly zero weight; NaN costs violate the objective
    purity contract; all-non-finite batches cannot be normalized.
    """
    c = np.asarray(costs, dtype=np.float64)
    if np.any(np.isnan(c)):
        raise ContractViolationError("objective returned NaN")
    logw = -c / lam
    finite = np.isfinite(logw)
    if not finite.any():
        raise EstimationError("every sampled cost is non-finite; cannot form weights")
    m = logw[finite].max()
    w = np.exp(logw - m)
    total = w.sum()
    return w / total, float(m + np.log(total))


def estimate_smoothed(
    objective: Objective,
    x,
    params: SmoothingParams,
    rng: RngStream,
    antithetic: bool = False,
) -> SmoothedEval:
    """Monte-Carlo value and gradient of g(x; t) from one Gaussian batch.

    value = -lam * (logsumexp(-f(y_i)/lam) - log N) estimates g(x; t) up to
    the Gibbs normalizer (exactly g for mixture potentials built from their
    own density).  gradient is the softmax-weighted zeroth-order estimator.
    With antithetic=True the batch is mirrored in +/- z pairs at the same
    total size.
    """
    x = as_vector(x, objective.dim)
    if antithetic:
        half = (params.n_samples + 1) // 2
        z = rng.generator().standard_normal((half, objective.dim))
        y = x + np.sqrt(params.t) * np.concatenate([z, -z], axis=0)[: params.n_samples]
    else:
        y = sample_gaussian(x, params.t, params.n_samples, rng)
    costs = objective.batch(y)
    wbar, logsum = weights_from_costs(costs, params.lam)
    value = -params.lam * (logsum - np.log(params.n_samples))
    gradient = (params.lam / params.t) * (x - wbar @ y)
    ess = 1.0 / float(np.sum(wbar * wbar))
    return SmoothedEval(value=float(value), gradient=gradient, ess=ess, raw_weight_logsum=logsum)


def estimate_smoothed_hessian(
    objective: Objective,
    x,
    params: SmoothingParams,
    rng: RngStream,
) -> np.ndarray:
    """Zeroth-order Hessian of g(x; t) via the weighted-covariance identity.

    H = (lam / t^2) (t I - C) with C the softmax-weighted sample covariance;
    the identity needs only function values, no gradients of f.  The result
    is symmetrized so it equals its transpose exactly.
    """
    x = as_vector(x, objective.dim)
    y = sample_gaussian(x, params.t, params.n_samples, rng)
    costs = objective.batch(y)
    wbar, _ = weights_from_costs(costs, params.lam)
    mean = wbar @ y
    dy = y - mean
    cov = (dy.T * wbar) @ dy
    h = (params.lam / params.t**2) * (params.t * np.eye(objective.dim) - cov)
    return 0.5 * (h + h.T)


class GmmSmoothOracle:
    """Closed-form g(x; t), gradient, and Hessian for Gaussian-mixture targets.

    Convolving the mixture with the Gaussian kernel of variance t keeps the
    mixture form with component variances sigma_i^2 + t, so everything is
    exact for any t >= 0; t = 0 recovers the raw potential.
    """

    def __init__(self, spec: GmmSpec):
        self.spec = spec

    def value_grad_hess(self, x, t: float) -> tuple[float, np.ndarray, np.ndarray]:
        if t < 0:
            raise ContractViolationError("kernel variance t must be >= 0")
        spec = self.spec
        x = as_vector(x, spec.dim)
        s = spec.variances + t  # (k,)
        d = spec.dim
        diff = x[None, :] - spec.means  # (k, d)
        sq = np.sum(diff * diff, axis=1)
        logcomp = np.log(spec.weights) - 0.5 * d * np.log(2 * np.pi * s) - sq / (2 * s)
        logp = logsumexp(logcomp)
        resp = np.exp(logcomp - logp)  # posterior responsibilities, sum to 1
        r = diff / s[:, None]  # (k, d)
        rbar = resp @ r
        g = -spec.lam * logp
        grad = spec.lam * rbar
        rr = (r.T * resp) @ r
        hess = spec.lam * (np.sum(resp / s) * np.eye(d) - rr + np.outer(rbar, rbar))
        return float(g), grad, 0.5 * (hess + hess.T)

    def value(self, x, t: float) -> float:
        return self.value_grad_hess(x, t)[0]

    def gradient(self, x, t: float) -> np.ndarray:
        return self.value_grad_hess(x, t)[1]

    def hessian(self, x, t: float) -> np.ndarray:
        return self.value_grad_hess(x, t)[2]

    def min_eigenvalue(self, x, t: float) -> float:
        h = self.hessian(x, t)
        if h.shape == (1, 1):
            return float(h[0, 0])
        return float(np.linalg.eigvalsh(h)[0])


def gmm_smoothed_exact(oracle: GmmSmoothOracle, x, t: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact (value, gradient, Hessian) of the smoothed mixture potential."""
    return oracle.value_grad_hess(x, t)
