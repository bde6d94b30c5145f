"""Empirical validation of the gradient-estimator moment bounds and the
optimal-temperature prediction: bias/variance measurement over (N, t, lambda)
grids against the exact mixture oracle.

Bias is reported in both readings of the bound's left side: norm-of-mean
(bias_nom, the quantity that controls descent drift) and mean-of-norm
(bias_mon); assertions use bias_nom.  The temperature sweep measures each
estimator against the target's canonical smoothed gradient (the gradient of
g(x; t) at the objective's own Gibbs temperature), which is what the
estimator is consistent for at the matching temperature: too-cold estimators
collapse onto the batch argmin, too-hot ones estimate the plain smoothed
mean and carry O(lambda^2) sampling noise, so the proxy error is U-shaped
between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .core import ConfigurationError, ContractViolationError, RngStream
from .objectives import GmmSpec, make_gmm_potential
from .smoothing import GmmSmoothOracle, SmoothingParams, estimate_smoothed

__all__ = [
    "MomentSweepConfig",
    "MomentCell",
    "MomentSweepResult",
    "measure_moments",
    "lambda_sweep",
    "LambdaSweepResult",
    "reference_gradient",
    "local_smoothness_bound",
]


@dataclass(frozen=True)
class MomentSweepConfig:
    """Grid of estimator settings probed by the moment harness."""

    objective_id: str
    x_points: tuple
    n_grid: tuple
    t_grid: tuple
    lambda_grid: tuple
    replications: int
    base_seed: int

    def __post_init__(self):
        object.__setattr__(self, "x_points", tuple(np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in self.x_points))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if not (self.x_points and self.n_grid and self.t_grid and self.lambda_grid):
            raise ContractViolationError("all sweep grids must be nonempty")
        if self.replications < 30:
            raise ContractViolationError("need at least 30 replications per cell")


def reference_gradient(spec: GmmSpec, x, t: float, lam: float) -> np.ndarray:
    """Exact gradient of g_lam(x;t) = -lam log((exp(-f/lam) * k_t))(x).

    At the mixture's own temperature the convolution is closed-form; other
    temperatures temper the density to p0^(lam_g/lam), which is no longer a
    mixture, so the gradient is computed by adaptive quadrature (1-d only).
    """
    oracle = GmmSmoothOracle(spec)
    if math.isclose(lam, spec.lam, rel_tol=1e-12):
        return oracle.gradient(x, t)
    if spec.dim != 1:
        raise ConfigurationError("tempered reference gradients are 1-d only")
    xv = float(np.atleast_1d(x)[0])
    c = spec.lam / lam

    def logp0(y: np.ndarray) -> np.ndarray:
        return spec.log_density(np.atleast_1d(y)[:, None])

    def dens(y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return np.exp(c * logp0(y) - (xv - y) ** 2 / (2 * t))

    def dens_d(y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return np.exp(c * logp0(y) - (xv - y) ** 2 / (2 * t)) * (-(xv - y) / t)

    sd = math.sqrt(float(spec.variances.max()))
    lo = min(float(spec.means.min()) - 12 * sd, xv - 10 * math.sqrt(t))
    hi = max(float(spec.means.max()) + 12 * sd, xv + 10 * math.sqrt(t))
    total, _ = quad(lambda y: float(dens(y)[0]), lo, hi, limit=400)
    deriv, _ = quad(lambda y: float(dens_d(y)[0]), lo, hi, limit=400)
    return np.array([-lam * deriv / total])


@dataclass(frozen=True)
class MomentCell:
    x_index: int
    n: int
    t: float
    lam: float
    bias_nom: float  # |mean estimate - reference|
    bias_mon: float  # mean |estimate - reference|
    variance: float  # mean |estimate - mean estimate|^2
    se_bias: float
    se_variance: float


@dataclass
class MomentSweepResult:
    config: MomentSweepConfig
    cells: list[MomentCell]
    reference_gradients: dict = field(default_factory=dict)

    def cell(self, x_index: int, n: int, t: float, lam: float) -> MomentCell:
        for c in self.cells:
            if c.x_index == x_index and c.n == n and math.isclose(c.t, t) and math.isclose(c.lam, lam):
                return c
        raise KeyError((x_index, n, t, lam))

    def variance_slope(self, x_index: int, t: float, lam: float) -> float:
        """Log-log slope of variance against N at one (x, t, lambda)."""
        ns, vs = [], []
        for n in self.config.n_grid:
            c = self.cell(x_index, n, t, lam)
            ns.append(n)
            vs.append(c.variance)
        return float(np.polyfit(np.log(ns), np.log(vs), 1)[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("N,t,lambda,bias_nom,bias_mon,variance,se_bias,se_var\n")
            for c in self.cells:
                fh.write(
                    f"{c.n},{c.t!r},{c.lam!r},{c.bias_nom!r},{c.bias_mon!r},"
                    f"{c.variance!r},{c.se_bias!r},{c.se_variance!r}\n"
                )


def _measure_cell(objective, x, n, t, lam, reps, rng, ref, antithetic=False):
    params = SmoothingParams(t=t, lam=lam, n_samples=n)
    ests = np.empty((reps, x.shape[0]))
    for r in range(reps):
        ests[r] = estimate_smoothed(objective, x, params, rng.derive(r), antithetic=antithetic).gradient
    mean = ests.mean(axis=0)
    dev = ests - mean
    sq = np.sum(dev * dev, axis=1)
    variance = float(sq.mean())
    bias_nom = float(np.linalg.norm(mean - ref))
    bias_mon = float(np.mean(np.linalg.norm(ests - ref, axis=1)))
    se_bias = math.sqrt(variance / reps)
    se_var = float(np.std(sq, ddof=1) / math.sqrt(reps))
    return MomentCell(
        x_index=-1, n=n, t=t, lam=lam,
        bias_nom=bias_nom, bias_mon=bias_mon, variance=variance,
        se_bias=se_bias, se_variance=se_var,
    ), mean


def measure_moments(cfg: MomentSweepConfig, oracle: GmmSmoothOracle) -> MomentSweepResult:
    """Replicated gradient estimates per grid cell, compared to the oracle.

    Each cell gets its own derived stream keyed by grid indices, so the sweep
    parallelizes over cells without changing any number.
    """
    spec = oracle.spec
    objective = make_gmm_potential(spec, find_mode=spec.dim <= 2)
    base = RngStream(cfg.base_seed)
    cells: list[MomentCell] = []
    refs: dict = {}
    for xi, x in enumerate(cfg.x_points):
        for ti, t in enumerate(cfg.t_grid):
            for li, lam in enumerate(cfg.lambda_grid):
                ref = reference_gradient(spec, x, t, lam)
                refs[(xi, t, lam)] = ref
                for ni, n in enumerate(cfg.n_grid):
                    rng = base.derive("moments", xi, ti, li, ni)
                    cell, _ = _measure_cell(objective, x, n, t, lam, cfg.replications, rng, ref)
                    cells.append(
                        MomentCell(
                            x_index=xi, n=cell.n, t=cell.t, lam=cell.lam,
                            bias_nom=cell.bias_nom, bias_mon=cell.bias_mon,
                            variance=cell.variance, se_bias=cell.se_bias,
                            se_variance=cell.se_variance,
                        )
                    )
    return MomentSweepResult(config=cfg, cells=cells, reference_gradients=refs)


def local_smoothness_bound(spec: GmmSpec) -> float:
    """Max |f''| of the raw potential over the fitted convexity ball around
    the mode: the smoothness constant entering the optimal-temperature rule."""
    from .landscape import fit_assumptions_gmm

    return fit_assumptions_gmm(spec).beta


@dataclass
class LambdaSweepResult:
    lambdas: np.ndarray
    proxy_error: np.ndarray
    bias_nom: np.ndarray
    variance: np.ndarray
    beta: float
    t: float
    argmin_lambda: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("lambda,proxy_error,bias_nom,variance\n")
            for row in zip(self.lambdas, self.proxy_error, self.bias_nom, self.variance):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def lambda_sweep(
    oracle: GmmSmoothOracle,
    x,
    t: float,
    n: int = 1000,
    replications: int = 100,
    lambda_grid=None,
    beta: Optional[float] = None,
    base_seed: int = 0,
) -> LambdaSweepResult:
    """Estimator quality as a function of the sampling temperature.

    proxy_error(lambda) = variance + bias_nom^2 against the canonical
    reference gradient of g(x; t); the default grid spans two decades on each
    side of beta * sqrt(t).
    """
    spec = oracle.spec
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if beta is None:
        beta = local_smoothness_bound(spec)
    center = beta * math.sqrt(t)
    if lambda_grid is None:
        lambda_grid = np.geomspace(center / 100, center * 100, 25)
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64)
    objective = make_gmm_potential(spec, find_mode=spec.dim <= 2)
    ref = oracle.gradient(x, t)
    base = RngStream(base_seed)
    bias = np.empty(lambda_grid.shape)
    var = np.empty(lambda_grid.shape)
    for i, lam in enumerate(lambda_grid):
        cell, _ = _measure_cell(objective, x, n, t, float(lam), replications, base.derive("sweep", i), ref)
        bias[i] = cell.bias_nom
        var[i] = cell.variance
    proxy = var + bias**2
    return LambdaSweepResult(
        lambdas=lambda_grid,
        proxy_error=proxy,
        bias_nom=bias,
        variance=var,
        beta=float(beta),
        t=float(t),
        argmin_lambda=float(lambda_grid[int(np.argmin(proxy))]),
    )
