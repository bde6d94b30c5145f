"""Coverage-optimality laboratory: empirical convex-radius scans, smoothed-
minimizer gap curves, and evaluators for the theory bounds, exported as
plot-ready data.

The empirical side scans the minimum eigenvalue of the smoothed Hessian
around the true optimum, either exactly (mixture oracle, or a spectral
convolution oracle for the checkerboard) or by Monte-Carlo Hessian
estimation.  The theory side evaluates the closed-form radius/gap bounds for
a fitted assumptions object; at the low dimensions shipped here those bounds
are advisory overlays, not hard dominance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigurationError, ContractViolationError, Objective, RngStream
from .objectives import CheckerboardSpec, GmmSpec, _gmm_mode, make_checkerboard
from .smoothing import GmmSmoothOracle, SmoothingParams, estimate_smoothed, estimate_smoothed_hessian

__all__ = [
    "LandscapeAssumptions",
    "LandscapeReport",
    "ScanResult",
    "MinimizerResult",
    "theory_radius",
    "theory_modulus",
    "theory_gap",
    "scan_convex_radius",
    "find_smoothed_minimizer",
    "build_landscape_report",
    "fit_assumptions_gmm",
    "check_soundness",
    "CheckerboardConvOracle",
]


@dataclass(frozen=True)
class LandscapeAssumptions:
    """Constants of the tail and local-regularity assumptions.

    alpha/beta are the strong-convexity and smoothness moduli of the raw
    objective on the d_tau-ball around the optimum; tau and p_out describe
    the Gibbs tail outside that ball; c_alpha and c_e are the bound's free
    factors; lam is the Gibbs temperature.
    """

    alpha: float
    beta: float
    d_tau: float
    tau: float
    p_out: float
    c_alpha: float
    c_e: float
    lam: float
    dim: int

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta >= self.alpha):
            raise ContractViolationError("need 0 < alpha <= beta")
        if not (self.d_tau > 0 and self.tau >= 0):
            raise ContractViolationError("need d_tau > 0 and tau >= 0")
        if not (0 < self.p_out < 1 and 0 < self.c_alpha < 1):
            raise ContractViolationError("p_out and c_alpha must lie in (0, 1)")
        if not (self.c_e > 0 and self.lam > 0 and self.dim >= 1):
            raise ContractViolationError("c_e, lam must be positive and dim >= 1")

    @property
    def kappa0(self) -> float:
        return self.beta / self.alpha

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "d_tau": self.d_tau,
            "tau": self.tau,
            "p_out": self.p_out,
            "c_alpha": self.c_alpha,
            "c_e": self.c_e,
            "lam": self.lam,
            "dim": self.dim,
        }


def theory_radius(a: LandscapeAssumptions, t: float) -> float:
    """Guaranteed strongly-convex radius around the optimum at noise level t:

        C_E * min( sqrt((t + lam/beta) / (lam/beta)), sqrt((t + tau^2)/tau^2) ) * D_tau
    """
    if not (t > 0):
        raise ContractViolationError("t must be positive")
    lb = a.lam / a.beta
    first = math.sqrt((t + lb) / lb)
    if a.tau == 0.0:
        grow = first
    else:
        grow = min(first, math.sqrt((t + a.tau**2) / a.tau**2))
    return a.c_e * grow * a.d_tau


def theory_modulus(a: LandscapeAssumptions, t: float) -> float:
    """Guaranteed strong-convexity modulus inside the radius: C_a*lam/(t+lam/alpha)."""
    if not (t > 0):
        raise ContractViolationError("t must be positive")
    return a.c_alpha * a.lam / (t + a.lam / a.alpha)


def theory_gap(a: LandscapeAssumptions, t: float) -> float:
    """Bound on the smoothed-minimizer shift |x_t^* - x^*| at noise level t:

        min( (1-C_a) t / (4 C_a D_tau), (D_tau+tau)(t+lam/alpha)/(C_a t) )
        + (kappa0 - 1) / (2 C_a) * sqrt(1 / (2 pi (1/t + alpha/lam)))
    """
    if not (t > 0):
        raise ContractViolationError("t must be positive")
    first = (1 - a.c_alpha) * t / (a.c_alpha * 4 * a.d_tau)
    second = (a.d_tau + a.tau) * (t + a.lam / a.alpha) / (a.c_alpha * t)
    asym = (a.kappa0 - 1) / (2 * a.c_alpha) * math.sqrt(1.0 / (2 * math.pi * (1.0 / t + a.alpha / a.lam)))
    return min(first, second) + asym


def _unit_directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    raise ConfigurationError("radius scans are implemented for dim <= 2")


@dataclass
class ScanResult:
    radius: float
    status: str  # "ok" | "inconclusive"
    eig_curve: list[tuple[float, float]]  # (r, min eigenvalue along the worst direction)


def _resolve_oracle(target):
    if isinstance(target, GmmSmoothOracle):
        return target
    if isinstance(target, GmmSpec):
        return GmmSmoothOracle(target)
    if hasattr(target, "min_eigenvalue"):
        return target
    raise ConfigurationError("oracle evaluator needs a mixture spec/oracle or an object with min_eigenvalue(x, t)")


def _mc_min_eig(
    objective: Objective,
    x: np.ndarray,
    t: float,
    lam: float,
    n: int,
    reps: int,
    rng: RngStream,
) -> tuple[float, float]:
    eigs = np.empty(reps)
    for r in range(reps):
        h = estimate_smoothed_hessian(objective, x, SmoothingParams(t=t, lam=lam, n_samples=n), rng.derive(r))
        eigs[r] = h[0, 0] if h.shape == (1, 1) else np.linalg.eigvalsh(h)[0]
    return float(eigs.mean()), float(eigs.std(ddof=1) / math.sqrt(reps))


def scan_convex_radius(
    evaluator: str,
    target,
    x_star,
    t: float,
    radius_grid,
    directions: Optional[int] = None,
    threshold: float = 0.0,
    lam: float = 1.0,
    n_samples: int = 4096,
    base_replications: int = 8,
    max_replications: int = 128,
    rng: Optional[RngStream] = None,
) -> ScanResult:
    """Largest grid radius around x_star on which the smoothed Hessian stays
    positive (min eigenvalue >= threshold along every scanned direction).

    evaluator "oracle" uses an exact Hessian (mixture closed form or a grid
    convolution oracle); "monte_carlo" averages zeroth-order Hessian
    estimates, widening the replication count when the sign of
    (min_eig - threshold) is not resolved at 2 standard errors, and marking
    the scan inconclusive if the cap cannot resolve it.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=np.float64))
    radius_grid = np.asarray(radius_grid, dtype=np.float64)
    if radius_grid.size == 0 or np.any(np.diff(radius_grid) <= 0):
        raise ContractViolationError("radius_grid must be nonempty and increasing")
    dim = x_star.shape[0]
    dirs = _unit_directions(dim, directions or (2 if dim == 1 else 16))
    curve: list[tuple[float, float]] = []
    radius = 0.0
    if evaluator == "oracle":
        oracle = _resolve_oracle(target)
        for r in radius_grid:
            worst = min(oracle.min_eigenvalue(x_star + r * u, t) for u in dirs)
            curve.append((float(r), worst))
            if worst < threshold:
                return ScanResult(radius=radius, status="ok", eig_curve=curve)
            radius = float(r)
        return ScanResult(radius=radius, status="ok", eig_curve=curve)
    if evaluator != "monte_carlo":
        raise ConfigurationError(f"unknown evaluator {evaluator!r}")
    if not isinstance(target, Objective):
        raise ConfigurationError("monte_carlo evaluator needs an Objective target")
    if rng is None:
        rng = RngStream(0)
    for ri, r in enumerate(radius_grid):
        worst = math.inf
        for di, u in enumerate(dirs):
            point = x_star + r * u
            reps = base_replications
            while True:
                m, se = _mc_min_eig(target, point, t, lam, n_samples, reps, rng.derive(ri, di, reps))
                if abs(m - threshold) >= 2 * se:
                    break
                if reps >= max_replications:
                    curve.append((float(r), m))
                    return ScanResult(radius=radius, status="inconclusive", eig_curve=curve)
                reps = min(2 * reps, max_replications)
            worst = min(worst, m)
        curve.append((float(r), worst))
        if worst < threshold:
            return ScanResult(radius=radius, status="ok", eig_curve=curve)
        radius = float(r)
    return ScanResult(radius=radius, status="ok", eig_curve=curve)


@dataclass
class MinimizerResult:
    x_t_star: np.ndarray
    gap: float
    status: str  # "ok" | "failed"


def find_smoothed_minimizer(
    evaluator: str,
    target,
    t: float,
    x_init=None,
    x_star=None,
    lam: float = 1.0,
    n_samples: int = 20000,
    gd_steps: int = 400,
    rng: Optional[RngStream] = None,
) -> MinimizerResult:
    """Minimizer of the smoothed objective and its distance to the raw optimum.

    Oracle mode: 1-d dense grid plus bisection on the exact gradient; 2-d
    damped Newton with backtracking.  Monte-Carlo mode: damped softmax
    descent with a decreasing step.
    """
    if evaluator == "oracle":
        oracle = _resolve_oracle(target)
        spec = oracle.spec if isinstance(oracle, GmmSmoothOracle) else None
        if spec is None:
            raise ConfigurationError("oracle minimizer search needs a mixture oracle")
        if x_star is None:
            x_star = _gmm_mode(spec)[0]
        x_star = np.atleast_1d(np.asarray(x_star, dtype=np.float64))
        if spec.dim == 1:
            sd = math.sqrt(float(spec.variances.max()) + t)
            lo = float(spec.means.min()) - 6 * sd
            hi = float(spec.means.max()) + 6 * sd
            xs = np.linspace(lo, hi, 200_001)
            vals = -spec.lam * spec.log_density(xs[:, None], extra_variance=t)
            x0 = xs[int(np.argmin(vals))]
            h = xs[1] - xs[0]
            a, b = x0 - h, x0 + h
            ga = oracle.gradient(np.array([a]), t)[0]
            for _ in range(200):
                mid = 0.5 * (a + b)
                gm = oracle.gradient(np.array([mid]), t)[0]
                if ga * gm <= 0:
                    b = mid
                else:
                    a, ga = mid, gm
            xt = np.array([0.5 * (a + b)])
            return MinimizerResult(x_t_star=xt, gap=float(np.linalg.norm(xt - x_star)), status="ok")
        # 2-d: damped Newton with backtracking on the oracle value
        x = np.array(x_init, dtype=np.float64) if x_init is not None else x_star.copy()
        for _ in range(1000):
            v, grad, hess = oracle.value_grad_hess(x, t)
            if np.linalg.norm(grad) < 1e-12:
                return MinimizerResult(x_t_star=x, gap=float(np.linalg.norm(x - x_star)), status="ok")
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = grad
            alpha = 1.0
            while alpha > 1e-12 and oracle.value(x - alpha * step, t) > v:
                alpha *= 0.5
            x = x - alpha * step
        return MinimizerResult(x_t_star=x, gap=float(np.linalg.norm(x - x_star)), status="failed")
    if evaluator != "monte_carlo":
        raise ConfigurationError(f"unknown evaluator {evaluator!r}")
    if not isinstance(target, Objective):
        raise ConfigurationError("monte_carlo minimizer search needs an Objective target")
    if x_init is None:
        raise ConfigurationError("monte_carlo minimizer search needs x_init")
    if rng is None:
        rng = RngStream(0)
    x = np.atleast_1d(np.asarray(x_init, dtype=np.float64))
    for k in range(gd_steps):
        ev = estimate_smoothed(target, x, SmoothingParams(t=t, lam=lam, n_samples=n_samples), rng.derive(k))
        c = 0.5 / (1.0 + k / 100.0)
        x = x - c * (t / lam) * ev.gradient
    if x_star is None and target.optimum is not None:
        x_star = target.optimum[0]
    gap = float(np.linalg.norm(x - x_star)) if x_star is not None else math.nan
    return MinimizerResult(x_t_star=x, gap=gap, status="ok")


def fit_assumptions_gmm(spec: GmmSpec, c_alpha: float = 0.5) -> LandscapeAssumptions:
    """Best-effort assumptions fit for a 1-d mixture instance.

    alpha/beta are the extreme curvatures of the raw potential on the largest
    symmetric interval around the mode where it stays convex (d_tau); tau and
    p_out come from the exact mixture tail; c_e uses the sufficient-condition
    shape min(1/9, beta log d / (16 lam d_tau^2)), floored away from zero
    since the high-dimensional regime degenerates at d = 1.  The result is an
    advisory instantiation, not a certified constant set.
    """
    if spec.dim != 1:
        raise ConfigurationError("assumptions fit implemented for 1-d mixtures")
    oracle = GmmSmoothOracle(spec)
    x_star = _gmm_mode(spec)[0]

    def curv(x: float) -> float:
        return oracle.hessian(np.array([x]), 0.0)[0, 0]

    step = 1e-3
    d_tau = 6.0
    for r in np.arange(step, 6.0, step):
        if curv(x_star[0] - r) <= 0 or curv(x_star[0] + r) <= 0:
            d_tau = r - step
            break
    rs = np.arange(-d_tau, d_tau + step / 2, step)
    cs = np.array([curv(x_star[0] + r) for r in rs])
    alpha, beta = float(cs.min()), float(cs.max())
    p_out = spec.tail_probability(x_star, d_tau)
    sd_max = math.sqrt(float(spec.variances.max()))
    a_grid = np.linspace(d_tau, d_tau + 8 * sd_max, 2000)
    tau_sq = 0.0
    for a in a_grid:
        q = spec.tail_probability(x_star, float(a))
        if 0 < q < 1:
            tau_sq = max(tau_sq, a * a / (2 * math.log(1.0 / q)))
    ce_sq = min(1.0 / 9.0, beta * math.log(max(spec.dim, 1)) / (16 * spec.lam * d_tau**2))
    ce = math.sqrt(max(ce_sq, 1e-12))
    return LandscapeAssumptions(
        alpha=alpha,
        beta=beta,
        d_tau=d_tau,
        tau=math.sqrt(tau_sq) * 1.0001,
        p_out=min(max(p_out, 1e-300), 1 - 1e-12),
        c_alpha=c_alpha,
        c_e=ce,
        lam=spec.lam,
        dim=spec.dim,
    )


def check_soundness(
    target,
    assumptions: LandscapeAssumptions,
    t_grid,
    probes_per_t: int = 32,
) -> list[dict]:
    """Spot-check the radius theorem's conclusion: inside the theory radius
    the oracle min eigenvalue should be nonnegative.  Violations are returned,
    never silently dropped; at d = 1-2 the fit is advisory so callers report
    rather than assert."""
    oracle = _resolve_oracle(target)
    spec = oracle.spec if isinstance(oracle, GmmSmoothOracle) else None
    x_star = _gmm_mode(spec)[0] if spec is not None else None
    if x_star is None:
        raise ConfigurationError("soundness check needs a mixture oracle")
    dirs = _unit_directions(x_star.shape[0], 2 if x_star.shape[0] == 1 else 16)
    violations = []
    for t in t_grid:
        r_th = theory_radius(assumptions, float(t))
        for r in np.linspace(0.0, r_th, probes_per_t):
            for u in dirs:
                eig = oracle.min_eigenvalue(x_star + r * u, float(t))
                if eig < 0:
                    violations.append({"t": float(t), "r": float(r), "min_eig": float(eig)})
    return violations


class CheckerboardConvOracle:
    """Numerical smoothing oracle for the 2-d checkerboard potential.

    The Gibbs density exp(-f/lam) is tabulated on a periodic [-extent, extent]^2
    grid and convolved spectrally with the Gaussian kernel (exact for the
    periodized density; the density at the boundary is ~exp(-base*extent^2*
    2/lam) of its peak, which bounds the wrap-around truncation error).
    Hessians come from central differences on the grid, bilinearly
    interpolated between nodes.
    """

    def __init__(self, spec: CheckerboardSpec, lam: float = 1.0, extent: float = 8.0, n_grid: int = 2048):
        if spec.dim != 2:
            raise ConfigurationError("convolution oracle is 2-d only")
        self.spec = spec
        self.lam = lam
        self.extent = extent
        self.n = n_grid
        self.h = 2 * extent / n_grid
        ax = -extent + self.h * np.arange(n_grid)
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        obj = make_checkerboard(spec)
        f = obj.batch(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(n_grid, n_grid)
        self._p0 = np.exp(-f / lam)
        self._axis = ax
        self._cache: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _smoothed_logp(self, t: float) -> np.ndarray:
        freq = 2 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kx = freq[:, None] ** 2
        ky = np.fft.rfftfreq(self.n, d=self.h) ** 2 * (2 * np.pi) ** 2
        mult = np.exp(-0.5 * t * (kx + ky[None, :]))
        pt = np.fft.irfft2(np.fft.rfft2(self._p0) * mult, s=(self.n, self.n))
        return np.log(np.maximum(pt, 1e-300))

    def _hess_grids(self, t: float):
        key = float(t)
        if key not in self._cache:
            if t <= 0:
                raise ContractViolationError("convolution oracle needs t > 0")
            g = -self.lam * self._smoothed_logp(t)
            h = self.h
            hxx = (np.roll(g, -1, axis=0) - 2 * g + np.roll(g, 1, axis=0)) / h**2
            hyy = (np.roll(g, -1, axis=1) - 2 * g + np.roll(g, 1, axis=1)) / h**2
            hxy = (
                np.roll(np.roll(g, -1, 0), -1, 1)
                - np.roll(np.roll(g, -1, 0), 1, 1)
                - np.roll(np.roll(g, 1, 0), -1, 1)
                + np.roll(np.roll(g, 1, 0), 1, 1)
            ) / (4 * h**2)
            self._cache[key] = (hxx, hyy, hxy)
        return self._cache[key]

    def _interp(self, grid: np.ndarray, x: float, y: float) -> float:
        fx = (x + self.extent) / self.h
        fy = (y + self.extent) / self.h
        i0, j0 = int(np.floor(fx)), int(np.floor(fy))
        ux, uy = fx - i0, fy - j0
        i1, j1 = (i0 + 1) % self.n, (j0 + 1) % self.n
        i0, j0 = i0 % self.n, j0 % self.n
        return float(
            grid[i0, j0] * (1 - ux) * (1 - uy)
            + grid[i1, j0] * ux * (1 - uy)
            + grid[i0, j1] * (1 - ux) * uy
            + grid[i1, j1] * ux * uy
        )

    def hessian(self, x, t: float) -> np.ndarray:
        hxx, hyy, hxy = self._hess_grids(t)
        px, py = float(x[0]), float(x[1])
        a = self._interp(hxx, px, py)
        b = self._interp(hyy, px, py)
        c = self._interp(hxy, px, py)
        return np.array([[a, c], [c, b]])

    def min_eigenvalue(self, x, t: float) -> float:
        return float(np.linalg.eigvalsh(self.hessian(x, t))[0])


@dataclass
class LandscapeReport:
    """Per-t empirical and theory curves for coverage radius and gap."""

    t_grid: np.ndarray
    empirical_radius: np.ndarray
    empirical_gap: np.ndarray
    theory_radius: Optional[np.ndarray]
    theory_gap: Optional[np.ndarray]
    statuses: list[str]
    eig_curves: dict[float, list[tuple[float, float]]] = field(default_factory=dict)
    assumptions: Optional[LandscapeAssumptions] = None

    def quantity_rows(self) -> list[tuple[float, str, float, str]]:
        rows = []
        for i, t in enumerate(self.t_grid):
            rows.append((float(t), "emp_radius", float(self.empirical_radius[i]), self.statuses[i]))
            rows.append((float(t), "emp_gap", float(self.empirical_gap[i]), self.statuses[i]))
            thr = float(self.theory_radius[i]) if self.theory_radius is not None else math.nan
            thg = float(self.theory_gap[i]) if self.theory_gap is not None else math.nan
            rows.append((float(t), "thr_radius", thr, self.statuses[i]))
            rows.append((float(t), "thr_gap", thg, self.statuses[i]))
        return rows

    def write_csv(self, quantities_path, curves_path) -> None:
        with open(quantities_path, "w", newline="") as fh:
            fh.write("t,quantity,value,status\n")
            for t, q, v, s in self.quantity_rows():
                fh.write(f"{t!r},{q},{v!r},{s}\n")
        with open(curves_path, "w", newline="") as fh:
            fh.write("t,r,min_eig\n")
            for t in sorted(self.eig_curves):
                for r, e in self.eig_curves[t]:
                    fh.write(f"{t!r},{r!r},{e!r}\n")


def build_landscape_report(
    spec: GmmSpec,
    t_grid,
    assumptions: Optional[LandscapeAssumptions] = None,
    radius_grid=None,
    scan_window: float = 6.0,
    scan_step: float = 1e-3,
) -> LandscapeReport:
    """Run the oracle radius scan and minimizer search for every t.

    Per-t failures are recorded in the status column without aborting the
    rest of the grid.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ContractViolationError("t_grid must be nonempty and increasing")
    oracle = GmmSmoothOracle(spec)
    x_star = _gmm_mode(spec)[0]
    if radius_grid is None:
        radius_grid = np.arange(scan_step, scan_window + scan_step / 2, scan_step)
    emp_r = np.full(t_grid.shape, math.nan)
    emp_g = np.full(t_grid.shape, math.nan)
    statuses: list[str] = []
    curves: dict[float, list[tuple[float, float]]] = {}
    for i, t in enumerate(t_grid):
        try:
            scan = scan_convex_radius("oracle", oracle, x_star, float(t), radius_grid)
            mini = find_smoothed_minimizer("oracle", oracle, float(t), x_star=x_star)
            emp_r[i] = scan.radius
            emp_g[i] = mini.gap
            curves[float(t)] = scan.eig_curve
            statuses.append("ok" if (scan.status == "ok" and mini.status == "ok") else f"{scan.status}/{mini.status}")
        except Exception as exc:  # keep the rest of the grid alive
            statuses.append(f"failed:{type(exc).__name__}")
    thr = thg = None
    if assumptions is not None:
        thr = np.array([theory_radius(assumptions, float(t)) for t in t_grid])
        thg = np.array([theory_gap(assumptions, float(t)) for t in t_grid])
    return LandscapeReport(
        t_grid=t_grid,
        empirical_radius=emp_r,
        empirical_gap=emp_g,
        theory_radius=thr,
        theory_gap=thg,
        statuses=statuses,
        eig_curves=curves,
        assumptions=assumptions,
    )
