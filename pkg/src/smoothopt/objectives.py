"""Benchmark objective zoo: blackbox test functions, Gaussian-mixture
potentials, the checkerboard landscape, and a pendulum swing-up task.

Objectives are immutable after construction and safe for concurrent
evaluation.  Instances are named in experiment configs by string id, e.g.
"ackley:200", "gmm1d:canonical", "pendulum:50:0.1".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import ConfigurationError, ContractViolationError, Objective, as_vector

__all__ = [
    "GmmSpec",
    "CheckerboardSpec",
    "make_blackbox",
    "make_gmm_potential",
    "make_checkerboard",
    "make_pendulum_swingup",
    "make_objective",
    "CANONICAL_GMM_1D",
    "CANONICAL_CHECKER_2D",
]

BLACKBOX_DOMAINS = {
    "ackley": (-32.768, 32.768),
    "levy": (-10.0, 10.0),
    "rastrigin": (-5.12, 5.12),
    "sphere": (-5.12, 5.12),
}


def _ackley(y: np.ndarray) -> np.ndarray:
    s1 = np.sqrt(np.mean(y * y, axis=1))
    s2 = np.mean(np.cos(2 * np.pi * y), axis=1)
    return -20.0 * np.exp(-0.2 * s1) - np.exp(s2) + 20.0 + np.e


def _levy(y: np.ndarray) -> np.ndarray:
    w = 1.0 + (y - 1.0) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:, :-1] + 1.0) ** 2), axis=1)
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


def _rastrigin(y: np.ndarray) -> np.ndarray:
    return 10.0 * y.shape[1] + np.sum(y * y - 10.0 * np.cos(2 * np.pi * y), axis=1)


def _sphere(y: np.ndarray) -> np.ndarray:
    return np.sum(y * y, axis=1)


_BLACKBOX = {"ackley": _ackley, "levy": _levy, "rastrigin": _rastrigin, "sphere": _sphere}


def make_blackbox(name: str, dim: int) -> Objective:
    """Standard literature test function with optimum metadata attached.

    Ackley uses a=20, b=0.2, c=2*pi; Levy uses w_i = 1 + (x_i - 1)/4;
    Rastrigin uses A=10; Sphere is the plain quadratic.
    """
    if name not in _BLACKBOX:
        raise ConfigurationError(f"unknown blackbox function {name!r}; known: {sorted(_BLACKBOX)}")
    if dim < 1:
        raise ConfigurationError("dim must be >= 1")
    fn = _BLACKBOX[name]
    x_opt = np.ones(dim) if name == "levy" else np.zeros(dim)
    return Objective(
        dim=dim,
        eval_one=lambda x, fn=fn: float(fn(x[None, :])[0]),
        eval_batch=fn,
        name=f"{name}:{dim}",
        optimum=(x_opt, 0.0),
        domain=BLACKBOX_DOMAINS[name],
    )


@dataclass(frozen=True)
class GmmSpec:
    """Gaussian mixture defining the Gibbs target p0 analytically.

    weights sum to 1; means has shape (k, d); variances is per-component
    isotropic.  lam is the temperature of the Gibbs density, so the induced
    potential is f(x) = -lam * log p0(x) and exp(-f/lam) is exactly p0.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu[:, None]
        var = np.atleast_1d(np.asarray(self.variances, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)
        if w.size == 0:
            raise ContractViolationError("mixture needs at least one component")
        if not (np.all(w > 0) and abs(w.sum() - 1.0) <= 1e-12):
            raise ContractViolationError("weights must be positive and sum to 1 within 1e-12")
        if mu.shape[0] != w.size or var.shape[0] != w.size:
            raise ContractViolationError("weights, means, variances must have matching component counts")
        if not np.all(var > 0):
            raise ContractViolationError("all component variances must be positive")
        if not (self.lam > 0):
            raise ContractViolationError("temperature lam must be positive")

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def log_density(self, x: np.ndarray, extra_variance: float = 0.0) -> np.ndarray:
        """log p(x; t) for the mixture smoothed by extra isotropic variance.

        x has shape (n, d); convolution with a Gaussian kernel of variance t
        keeps the mixture form with component variances sigma_i^2 + t.
        """
        x = np.asarray(x, dtype=np.float64)
        s = self.variances + extra_variance  # (k,)
        d = self.dim
        sq = ((x[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)  # (n, k)
        logcomp = np.log(self.weights)[None, :] - 0.5 * d * np.log(2 * np.pi * s)[None, :] - sq / (2 * s)[None, :]
        return logsumexp(logcomp, axis=1)

    def tail_probability(self, center: np.ndarray, a: float) -> float:
        """P0(|x - center| >= a) for a 1-d mixture (exact, via erf)."""
        if self.dim != 1:
            raise ContractViolationError("tail_probability implemented for 1-d mixtures only")
        from scipy.stats import norm

        c = float(np.asarray(center).reshape(-1)[0])
        mu = self.means[:, 0]
        sd = np.sqrt(self.variances)
        upper = norm.sf((c + a - mu) / sd)
        lower = norm.cdf((c - a - mu) / sd)
        return float(np.sum(self.weights * (upper + lower)))


def _gmm_mode(spec: GmmSpec) -> tuple[np.ndarray, float]:
    """Numerical mode of the mixture potential: dense grid + local refinement.

    1-d: 10^6-point grid over the mixture support, then bisection on the
    derivative.  2-d: coarse grid then damped Newton on the potential.
    """
    from .smoothing import GmmSmoothOracle

    oracle = GmmSmoothOracle(spec)
    sd_max = float(np.sqrt(spec.variances.max()))
    lo = spec.means.min(axis=0) - 6 * sd_max
    hi = spec.means.max(axis=0) + 6 * sd_max
    if spec.dim == 1:
        xs = np.linspace(lo[0], hi[0], 1_000_001)
        vals = -spec.lam * spec.log_density(xs[:, None])
        x0 = xs[np.argmin(vals)]
        h = xs[1] - xs[0]
        a, b = x0 - h, x0 + h
        ga = oracle.value_grad_hess(np.array([a]), 0.0)[1][0]
        for _ in range(200):
            m = 0.5 * (a + b)
            gm = oracle.value_grad_hess(np.array([m]), 0.0)[1][0]
            if ga * gm <= 0:
                b = m
            else:
                a, ga = m, gm
        x_star = np.array([0.5 * (a + b)])
    else:
        grids = [np.linspace(lo[j], hi[j], 401) for j in range(2)]
        gx, gy = np.meshgrid(grids[0], grids[1], indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        vals = -spec.lam * spec.log_density(pts)
        x_star = pts[np.argmin(vals)].copy()
        for _ in range(200):
            _, grad, hess = oracle.value_grad_hess(x_star, 0.0)
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            x_star = x_star - np.clip(step, -0.5, 0.5)
            if np.linalg.norm(grad) < 1e-13:
                break
    f_star = float(-spec.lam * spec.log_density(x_star[None, :])[0])
    return x_star, f_star


def make_gmm_potential(spec: GmmSpec, find_mode: bool = True) -> Objective:
    """Objective f(x) = -lam * log p0(x) for a Gaussian-mixture p0.

    Optimum metadata is set by numerical mode-finding at construction (1-d and
    2-d only); pass find_mode=False to opt out for higher dimensions.
    """
    if spec.dim > 2 and find_mode:
        raise ConfigurationError("mode-finding supports dim <= 2; pass find_mode=False to opt out")
    optimum = _gmm_mode(spec) if find_mode else None
    sd_max = float(np.sqrt(spec.variances.max()))
    lo = float(spec.means.min() - 4 * sd_max)
    hi = float(spec.means.max() + 4 * sd_max)
    return Objective(
        dim=spec.dim,
        eval_one=lambda x: float(-spec.lam * spec.log_density(x[None, :])[0]),
        eval_batch=lambda ys: -spec.lam * spec.log_density(ys),
        name=f"gmm{spec.dim}d",
        optimum=optimum,
        lipschitz_hint=None,
        domain=(lo, hi),
    )


@dataclass(frozen=True)
class CheckerboardSpec:
    """Quadratic bowl plus an egg-crate of period-spaced local minima."""

    base: float
    amplitude: float
    period: float
    dim: int

    def __post_init__(self):
        if not (self.base > 0 and self.amplitude > 0 and self.period > 0 and self.dim >= 1):
            raise ContractViolationError("checkerboard parameters must all be positive")


def make_checkerboard(spec: CheckerboardSpec) -> Objective:
    """f(x) = base*|x|^2 + amplitude * sum_i (1 - cos(2 pi x_i / period)) / 2."""

    def batch(ys: np.ndarray) -> np.ndarray:
        bowl = spec.base * np.sum(ys * ys, axis=1)
        crate = spec.amplitude * np.sum(1.0 - np.cos(2 * np.pi * ys / spec.period), axis=1) / 2.0
        return bowl + crate

    return Objective(
        dim=spec.dim,
        eval_one=lambda x: float(batch(x[None, :])[0]),
        eval_batch=batch,
        name=f"checker{spec.dim}d",
        optimum=(np.zeros(spec.dim), 0.0),
        domain=(-8.0, 8.0),
    )


def make_pendulum_swingup(horizon: int, dt: float) -> Objective:
    """Torque-sequence swing-up task standing in for external physics benchmarks.

    Dynamics theta'' = sin(theta) + u (unit gravity/length/mass), explicit
    Euler at step dt from theta = pi (hanging down), theta' = 0; theta = 0 is
    upright.  Torques are clamped to [-2, 2] inside eval, so the problem stays
    unconstrained.  Stage costs use the post-step state: cost =
    sum_k [wrap(theta_k)^2 + 0.1 theta'_k^2 + 0.001 u_k^2] * dt.
    """
    if horizon < 1:
        raise ContractViolationError("horizon must be >= 1")
    if not (dt > 0):
        raise ContractViolationError("dt must be positive")

    def batch(us: np.ndarray) -> np.ndarray:
        u = np.clip(us, -2.0, 2.0)
        n = u.shape[0]
        theta = np.full(n, np.pi)
        omega = np.zeros(n)
        cost = np.zeros(n)
        for k in range(horizon):
            uk = u[:, k]
            theta_next = theta + dt * omega
            omega_next = omega + dt * (np.sin(theta) + uk)
            theta, omega = theta_next, omega_next
            err = np.abs((theta + np.pi) % (2 * np.pi) - np.pi)
            cost += (err**2 + 0.1 * omega**2 + 0.001 * uk**2) * dt
        return cost

    return Objective(
        dim=horizon,
        eval_one=lambda x: float(batch(x[None, :])[0]),
        eval_batch=batch,
        name=f"pendulum:{horizon}:{dt:g}",
        domain=(-2.0, 2.0),
    )


# Pinned instances used by the landscape laboratory and regression fixtures.
# The mixture's second component is deliberately broad (variance 1.0): with
# two equal narrow components, the empirical convex radius around the global
# mode dips before the modes merge, while the broad far mode yields the
# monotone coverage growth the laboratory asserts.
CANONICAL_GMM_1D = GmmSpec(
    weights=np.array([0.7, 0.3]),
    means=np.array([-1.0, 2.0]),
    variances=np.array([0.25, 1.0]),
    lam=1.0,
)

CANONICAL_CHECKER_2D = CheckerboardSpec(base=0.05, amplitude=1.0, period=1.0, dim=2)


def make_objective(obj_id: str) -> Objective:
    """Resolve a string id like "ackley:200" or "gmm1d:canonical"."""
    parts = obj_id.split(":")
    kind = parts[0]
    try:
        if kind in _BLACKBOX:
            if len(parts) != 2:
                raise ConfigurationError(f"expected {kind}:<dim>, got {obj_id!r}")
            return make_blackbox(kind, int(parts[1]))
        if kind == "gmm1d":
            if parts[1:] != ["canonical"]:
                raise ConfigurationError(f"unknown gmm1d instance {obj_id!r}; only gmm1d:canonical is defined")
            return make_gmm_potential(CANONICAL_GMM_1D)
        if kind == "checker2d":
            if parts[1:] != ["canonical"]:
                raise ConfigurationError(f"unknown checker2d instance {obj_id!r}")
            return make_checkerboard(CANONICAL_CHECKER_2D)
        if kind == "pendulum":
            if len(parts) != 3:
                raise ConfigurationError(f"expected pendulum:<horizon>:<dt>, got {obj_id!r}")
            return make_pendulum_swingup(int(parts[1]), float(parts[2]))
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"malformed objective id {obj_id!r}") from exc
    raise ConfigurationError(f"unknown objective id {obj_id!r}")
