"""The sampling-based optimizer family: dual-annealed DIDA plus the CEM,
CMA-ES, MPPI, SA, and MBD baselines, all instances of one propose/evaluate/
update loop with pluggable schedules and update rules.

Every run is bit-reproducible given (config, seed): schedules are evaluated
in closed form (t0 * gamma**m, never loop-multiplied), sampling consumes a
counter-based stream, and identical engine code paths make the degenerate
equivalences (SA at gamma_lambda=1 vs MPPI, MBD vs constant-lambda DIDA)
exact trajectory identities.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    ConfigurationError,
    ContractViolationError,
    Objective,
    RngStream,
    as_vector,
    sample_gaussian,
    softmax_weights,
)
from .smoothing import weights_from_costs

__all__ = [
    "Schedule",
    "SboConfig",
    "PerIter",
    "RunRecord",
    "StepDiagnostics",
    "sbo_step",
    "run_dida",
    "run_cem",
    "run_cmaes",
    "run_mppi",
    "run_sa",
    "run_mbd",
    "ALGORITHMS",
]

LOW_ESS_THRESHOLD = 5.0


@dataclass(frozen=True)
class Schedule:
    """Parameter schedule for the kernel variance t or the temperature lambda.

    kinds:
        fixed             constant value (None means calibrate from a probe
                          batch at the initial sampling scale);
        geometric         value_at(m) = t0 * gamma**m;
        geometric_floor   geometric, floored at t_floor;
        adaptive_variance lambda_m = std of the current batch costs.
    """

    kind: str
    t0: Optional[float] = None
    gamma: Optional[float] = None
    t_floor: Optional[float] = None
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind == "fixed":
            if self.value is not None and not (self.value > 0):
                raise ContractViolationError("fixed schedule value must be positive")
        elif self.kind in ("geometric", "geometric_floor"):
            # t0 = None defers the level to a probe batch (temperature use).
            if self.t0 is not None and not (self.t0 > 0):
                raise ContractViolationError("geometric schedule needs t0 > 0")
            # gamma = 1 is the degenerate constant schedule (equals fixed).
            if self.gamma is None or not (0 < self.gamma <= 1):
                raise ContractViolationError("geometric schedule needs gamma in (0, 1]")
            if self.kind == "geometric_floor" and self.t0 is not None:
                if self.t_floor is None or not (0 < self.t_floor < self.t0):
                    raise ContractViolationError("geometric_floor needs 0 < t_floor < t0")
        elif self.kind != "adaptive_variance":
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")

    @staticmethod
    def fixed(value: Optional[float] = None) -> "Schedule":
        return Schedule(kind="fixed", value=value)

    @staticmethod
    def geometric(t0: float, gamma: float) -> "Schedule":
        return Schedule(kind="geometric", t0=t0, gamma=gamma)

    @staticmethod
    def geometric_floor(t0: float, gamma: float, t_floor: float) -> "Schedule":
        return Schedule(kind="geometric_floor", t0=t0, gamma=gamma, t_floor=t_floor)

    @staticmethod
    def adaptive_variance() -> "Schedule":
        return Schedule(kind="adaptive_variance")

    @property
    def initial_scale(self) -> float:
        """Sampling scale before the first decay; used to calibrate probes."""
        if self.kind == "fixed":
            if self.value is None:
                raise ConfigurationError("fixed schedule has no value yet")
            return self.value
        if self.kind in ("geometric", "geometric_floor"):
            if self.t0 is None:
                raise ConfigurationError("geometric schedule has no level yet")
            return self.t0
        raise ConfigurationError("adaptive schedule has no static scale")

    def value_at(self, m: int) -> float:
        """Closed-form schedule value at iteration m (1-based)."""
        if self.kind == "fixed":
            return self.initial_scale
        if self.kind == "geometric":
            return self.t0 * self.gamma**m
        if self.kind == "geometric_floor":
            return max(self.t0 * self.gamma**m, self.t_floor)
        raise ConfigurationError("adaptive_variance is computed per batch, not per index")


@dataclass(frozen=True)
class SboConfig:
    """Hyperparameters of one sampling-based optimization run.

    step_rule applies to softmax (gradient-form) updates:
        full_softmax      x <- weighted sample mean (step t/lambda);
        scaled            x <- x - step_c * t_m * grad (the literal
                          quarter-step; divergent for cost-scale lambda);
        damped_softmax    x <- x - step_c * (x - weighted mean), i.e. a
                          step_c * t_m / lambda_m gradient step.
    """

    t_schedule: Schedule
    lambda_schedule: Schedule = field(default_factory=lambda: Schedule.fixed(1.0))
    n_samples: int = 1024
    iterations: int = 300
    update_rule: str = "softmax"
    elite_fraction: float = 0.1
    step_rule: str = "full_softmax"
    step_c: float = 0.25
    cem_frozen_variance: bool = False
    cmaes_softmax_lambda: Optional[float] = None
    cmaes_csa: bool = True

    def __post_init__(self):
        if self.n_samples < 1 or self.iterations < 1:
            raise ContractViolationError("n_samples and iterations must be positive")
        if self.update_rule not in ("softmax", "topk"):
            raise ConfigurationError(f"unknown update rule {self.update_rule!r}")
        if not (0 < self.elite_fraction <= 1):
            raise ContractViolationError("elite_fraction must be in (0, 1]")
        if math.ceil(self.elite_fraction * self.n_samples) < 1:
            raise ContractViolationError("elite_fraction * n_samples must be >= 1")
        if self.step_rule not in ("full_softmax", "scaled", "damped_softmax"):
            raise ConfigurationError(f"unknown step rule {self.step_rule!r}")


@dataclass(frozen=True)
class PerIter:
    iter: int
    t_m: float
    lambda_m: Optional[float]
    cost_at_iterate: float
    best_cost_so_far: float
    ess: float
    low_ess: bool


@dataclass
class RunRecord:
    """Per-iteration bookkeeping of one seeded run; the benchmarking unit.

    wall_time_s is measured but excluded from serialized artifacts so that
    record files are byte-identical across reruns and worker counts.
    """

    algorithm: str
    objective: str
    seed: int
    per_iter: list[PerIter]
    final_x: np.ndarray
    total_evals: int
    wall_time_s: Optional[float] = None

    @property
    def final_best_cost(self) -> float:
        return self.per_iter[-1].best_cost_so_far

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "objective": self.objective,
            "seed": self.seed,
            "per_iter": [
                {
                    "iter": p.iter,
                    "t_m": p.t_m,
                    "lambda_m": p.lambda_m,
                    "cost_at_iterate": p.cost_at_iterate,
                    "best_cost_so_far": p.best_cost_so_far,
                    "ess": p.ess,
                    "low_ess": p.low_ess,
                }
                for p in self.per_iter
            ],
            "final_x": [float(v) for v in self.final_x],
            "total_evals": self.total_evals,
            "wall_time_s": None,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunRecord":
        return RunRecord(
            algorithm=d["algorithm"],
            objective=d["objective"],
            seed=int(d["seed"]),
            per_iter=[PerIter(**p) for p in d["per_iter"]],
            final_x=np.asarray(d["final_x"], dtype=np.float64),
            total_evals=int(d["total_evals"]),
            wall_time_s=d.get("wall_time_s"),
        )


@dataclass(frozen=True)
class StepDiagnostics:
    ess: float
    gradient: Optional[np.ndarray]
    costs: np.ndarray


def _topk_indices(costs: np.ndarray, k: int) -> np.ndarray:
    # Stable sort breaks ties by lowest index; re-sorting the selected indices
    # keeps the elite mean's summation order equal to the batch order, which
    # makes elite_fraction=1 coincide bitwise with the uniform softmax mean.
    order = np.argsort(costs, kind="stable")[:k]
    return np.sort(order)


def sbo_step(
    x,
    objective: Objective,
    t: float,
    lam: float,
    n: int,
    update_rule: str,
    rng: RngStream,
    elite_fraction: float = 0.1,
) -> tuple[np.ndarray, StepDiagnostics]:
    """One propose/evaluate/update step from a Gaussian proposal N(x, t I).

    softmax returns the Gibbs-weighted sample mean; topk returns the plain
    mean of the ceil(elite_fraction * n) lowest-cost samples.  Diagnostics
    carry the effective sample size and, for finite lam, the implied
    zeroth-order gradient (lam/t) (x - x_next).
    """
    x = as_vector(x, objective.dim)
    y = sample_gaussian(x, t, n, rng)
    costs = objective.batch(y)
    if update_rule == "softmax":
        wbar = softmax_weights(costs, lam)
        x_next = wbar @ y
        ess = 1.0 / float(np.sum(wbar * wbar))
    elif update_rule == "topk":
        k = math.ceil(elite_fraction * n)
        idx = _topk_indices(costs, k)
        x_next = np.full(k, 1.0 / k) @ y[idx]
        ess = float(k)
    else:
        raise ConfigurationError(f"unknown update rule {update_rule!r}")
    gradient = (lam / t) * (x - x_next) if np.isfinite(lam) else None
    return x_next, StepDiagnostics(ess=ess, gradient=gradient, costs=costs)


def _resolve_lambda0(
    lam_sched: Schedule,
    objective: Objective,
    x0: np.ndarray,
    probe_t: float,
    n: int,
    rng: RngStream,
) -> tuple[Schedule, int]:
    """Fill a fixed/geometric lambda schedule whose level is left at None by
    probing the cost spread of one batch at the initial sampling scale."""
    if lam_sched.kind == "adaptive_variance":
        return lam_sched, 0
    needs_probe = (lam_sched.kind == "fixed" and lam_sched.value is None) or (
        lam_sched.kind in ("geometric", "geometric_floor") and lam_sched.t0 is None
    )
    if not needs_probe:
        return lam_sched, 0
    y = sample_gaussian(x0, probe_t, n, rng)
    lam0 = float(np.std(objective.batch(y)))
    if lam0 == 0.0:
        lam0 = 1e-12
    if lam_sched.kind == "fixed":
        return replace(lam_sched, value=lam0), n
    return replace(lam_sched, t0=lam0), n


def _run_softmax_family(
    algorithm: str,
    objective: Objective,
    config: SboConfig,
    x0,
    rng: RngStream,
) -> RunRecord:
    """Shared engine for DIDA / MBD / MPPI / SA: Gaussian proposals around the
    iterate with scheduled (t, lambda) and a softmax-derived (or top-k) update."""
    start = time.perf_counter()
    x = as_vector(x0, objective.dim)
    n, iters = config.n_samples, config.iterations
    g = rng.generator()
    lam_sched, probe_evals = _resolve_lambda0(
        config.lambda_schedule, objective, x, config.t_schedule.initial_scale, n, rng.derive("probe")
    )
    evals = probe_evals
    best = objective(x)
    evals += 1
    per_iter: list[PerIter] = []
    for m in range(1, iters + 1):
        t_m = config.t_schedule.value_at(m)
        y = x + np.sqrt(t_m) * g.standard_normal((n, objective.dim))
        costs = objective.batch(y)
        evals += n
        if lam_sched.kind == "adaptive_variance":
            lam_m = float(np.std(costs))
            if lam_m == 0.0:
                # flat batch: any temperature yields the plain mean
                lam_m = 1e-12 * (1.0 + abs(float(np.mean(costs))))
        else:
            lam_m = lam_sched.value_at(m)
        if config.update_rule == "topk":
            k = math.ceil(config.elite_fraction * n)
            idx = _topk_indices(costs, k)
            x = np.full(k, 1.0 / k) @ y[idx]
            ess = float(k)
        else:
            wbar, _ = weights_from_costs(costs, lam_m)
            ess = 1.0 / float(np.sum(wbar * wbar))
            mean_w = wbar @ y
            if config.step_rule == "full_softmax":
                x = mean_w
            elif config.step_rule == "scaled":
                # literal x <- x - c * t * grad^(0) = x - c * lam * (x - mean)
                x = x - config.step_c * lam_m * (x - mean_w)
            else:  # damped_softmax
                x = x - config.step_c * (x - mean_w)
        cost = objective(x)
        evals += 1
        best = min(best, cost)
        per_iter.append(
            PerIter(
                iter=m,
                t_m=t_m,
                lambda_m=lam_m,
                cost_at_iterate=cost,
                best_cost_so_far=best,
                ess=ess,
                low_ess=ess < LOW_ESS_THRESHOLD,
            )
        )
    return RunRecord(
        algorithm=algorithm,
        objective=objective.name,
        seed=rng.seed,
        per_iter=per_iter,
        final_x=x,
        total_evals=evals,
        wall_time_s=time.perf_counter() - start,
    )


def run_dida(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Dual annealing: geometric-floored kernel variance plus per-batch
    temperature lambda_m = std of the sampled costs, with a damped softmax
    step (default quarter-step toward the weighted mean)."""
    if config.t_schedule.kind != "geometric_floor":
        raise ConfigurationError("dida requires a geometric_floor t schedule")
    if config.update_rule != "softmax":
        raise ConfigurationError("dida uses the softmax (gradient-form) update")
    return _run_softmax_family("dida", objective, config, x0, rng)


def run_mbd(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Annealed kernel variance (pure geometric), constant temperature,
    full softmax update each step."""
    if config.t_schedule.kind != "geometric":
        raise ConfigurationError("mbd uses a pure geometric t schedule")
    if config.lambda_schedule.kind != "fixed":
        raise ConfigurationError("mbd uses a fixed temperature")
    cfg = replace(config, update_rule="softmax", step_rule="full_softmax")
    return _run_softmax_family("mbd", objective, cfg, x0, rng)


def run_mppi(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Fixed kernel variance and temperature: the constant-parameter loop."""
    if config.t_schedule.kind != "fixed":
        raise ConfigurationError("mppi uses a fixed t schedule")
    if config.lambda_schedule.kind != "fixed":
        raise ConfigurationError("mppi uses a fixed temperature")
    cfg = replace(config, step_rule="full_softmax")
    return _run_softmax_family("mppi", objective, cfg, x0, rng)


def run_sa(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Fixed kernel variance with a geometrically annealed temperature
    lambda_m = lambda0 * gamma_lambda**m (lambda0 probed when unset)."""
    if config.t_schedule.kind != "fixed":
        raise ConfigurationError("sa uses a fixed t schedule")
    if config.lambda_schedule.kind not in ("geometric", "geometric_floor"):
        raise ConfigurationError("sa needs a geometric lambda schedule")
    cfg = replace(config, step_rule="full_softmax")
    return _run_softmax_family("sa", objective, cfg, x0, rng)


def run_cem(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Cross-entropy method: refit mean and per-coordinate variance to the
    elite set each iteration.  cem_frozen_variance=True keeps the sampling
    variance pinned at its initial value (the fixed-t reading)."""
    start = time.perf_counter()
    mean = as_vector(x0, objective.dim)
    n, iters = config.n_samples, config.iterations
    k = math.ceil(config.elite_fraction * n)
    var = np.full(objective.dim, config.t_schedule.initial_scale)
    g = rng.generator()
    best = objective(mean)
    evals = 1
    per_iter: list[PerIter] = []
    for m in range(1, iters + 1):
        y = mean + np.sqrt(var) * g.standard_normal((n, objective.dim))
        costs = objective.batch(y)
        evals += n
        idx = _topk_indices(costs, k)
        elite = y[idx]
        mean = np.full(k, 1.0 / k) @ elite
        if not config.cem_frozen_variance:
            var = np.maximum(elite.var(axis=0), 1e-12)
        cost = objective(mean)
        evals += 1
        best = min(best, cost)
        per_iter.append(
            PerIter(
                iter=m,
                t_m=float(np.mean(var)),
                lambda_m=None,
                cost_at_iterate=cost,
                best_cost_so_far=best,
                ess=float(k),
                low_ess=k < LOW_ESS_THRESHOLD,
            )
        )
    return RunRecord(
        algorithm="cem",
        objective=objective.name,
        seed=rng.seed,
        per_iter=per_iter,
        final_x=mean,
        total_evals=evals,
        wall_time_s=time.perf_counter() - start,
    )


def cmaes_recombination_weights(n: int, mu: int) -> np.ndarray:
    """Log-linear positive recombination weights over the mu best samples."""
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    return w / w.sum()


def run_cmaes(objective: Objective, config: SboConfig, x0, rng: RngStream) -> RunRecord:
    """Simplified CMA-ES: full covariance with rank-mu update and cumulative
    step-size adaptation.

    Recombination is log-linear over the best floor(N/2) samples by default;
    setting cmaes_softmax_lambda recombines with Gibbs weights over the whole
    batch instead (the taxonomy reading used for benchmark baselines, usually
    together with cmaes_csa=False and initial variance t0).  The covariance
    is repaired by clamping eigenvalues at 1e-12.
    """
    if config.t_schedule.kind != "fixed":
        raise ConfigurationError("cmaes takes its initial variance from a fixed t schedule")
    start = time.perf_counter()
    d = objective.dim
    n, iters = config.n_samples, config.iterations
    mean = as_vector(x0, d)
    sigma = math.sqrt(config.t_schedule.initial_scale)
    C = np.eye(d)
    g = rng.generator()
    mu = max(1, n // 2)
    loglin = cmaes_recombination_weights(n, mu)
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))
    p_sigma = np.zeros(d)
    best = objective(mean)
    evals = 1
    per_iter: list[PerIter] = []
    for m in range(1, iters + 1):
        vals, B = np.linalg.eigh(C)
        vals = np.maximum(vals, 1e-12)
        D = np.sqrt(vals)
        z = g.standard_normal((n, d))
        y = mean + sigma * (z * D) @ B.T
        costs = objective.batch(y)
        evals += n
        if config.cmaes_softmax_lambda is not None:
            w_full = softmax_weights(costs, config.cmaes_softmax_lambda)
            sel = y
            w = w_full
        else:
            idx = _topk_indices(costs, mu)
            sel = y[idx]
            w = loglin
        mu_eff = 1.0 / float(np.sum(w * w))
        old = mean
        mean = w @ sel
        c_mu = min(1.0, max(0.0, 2 * (mu_eff - 2 + 1 / mu_eff) / ((d + 2) ** 2 + mu_eff)))
        if config.cmaes_csa:
            c_sigma = (mu_eff + 2) / (d + mu_eff + 5)
            d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (d + 1)) - 1) + c_sigma
            inv_sqrt = (B / D) @ B.T
            p_sigma = (1 - c_sigma) * p_sigma + math.sqrt(c_sigma * (2 - c_sigma) * mu_eff) * inv_sqrt @ (
                mean - old
            ) / sigma
            sigma = sigma * math.exp((c_sigma / d_sigma) * (np.linalg.norm(p_sigma) / chi_n - 1))
        dy = (sel - old) / sigma
        C = (1 - c_mu) * C + c_mu * (dy.T * w) @ dy
        C = 0.5 * (C + C.T)
        cost = objective(mean)
        evals += 1
        best = min(best, cost)
        per_iter.append(
            PerIter(
                iter=m,
                t_m=float(sigma * sigma),
                lambda_m=config.cmaes_softmax_lambda,
                cost_at_iterate=cost,
                best_cost_so_far=best,
                ess=float(mu_eff),
                low_ess=mu_eff < LOW_ESS_THRESHOLD,
            )
        )
    return RunRecord(
        algorithm="cmaes",
        objective=objective.name,
        seed=rng.seed,
        per_iter=per_iter,
        final_x=mean,
        total_evals=evals,
        wall_time_s=time.perf_counter() - start,
    )


ALGORITHMS = {
    "dida": run_dida,
    "cem": run_cem,
    "cmaes": run_cmaes,
    "mppi": run_mppi,
    "sa": run_sa,
    "mbd": run_mbd,
}
