"""Shared domain types: deterministic RNG streams, objectives, stable softmax weights.

Everything here is an immutable value type, safe to share across threads.
All reals are 64-bit floats; benchmark deltas are O(0.1) and 32-bit
accumulation error would contaminate the acceptance checks.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ContractViolationError",
    "ConfigurationError",
    "EstimationError",
    "RngStream",
    "Objective",
    "softmax_weights",
    "sample_gaussian",
    "as_vector",
]

_MASK64 = (1 << 64) - 1


class ContractViolationError(ValueError):
    """An operation was called with arguments violating its contract."""


class ConfigurationError(ValueError):
    """A config referenced an unknown id or carried invalid settings."""


class EstimationError(RuntimeError):
    """A Monte-Carlo estimate could not be formed (e.g. no finite costs)."""


def _splitmix64(x: int) -> int:
    # Weyl-sequence finalizer; stable across platforms, used to derive substreams.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")
    return int(key) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream fully determined by (seed, stream_id).

    Backed by Philox4x64: distinct (seed, stream_id) pairs give statistically
    independent streams, and the same pair reproduces the sample sequence
    bit-for-bit on a given platform regardless of how many other streams were
    consumed.  Substreams are derived with a stable 64-bit hash so parallel
    fan-out never changes results.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))

    def derive(self, *keys) -> "RngStream":
        """Child stream keyed by integers and/or strings; order-sensitive."""
        s = self.stream_id & _MASK64
        for k in keys:
            s = _splitmix64(s ^ _key_to_int(k))
        return RngStream(self.seed, s)


def as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate and return a float64 1-d vector with finite entries."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ContractViolationError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ContractViolationError(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ContractViolationError("vector has non-finite entries")
    return v


@dataclass(frozen=True)
class Objective:
    """A pure, dimension-d, real-valued cost function with optional metadata.

    Attributes:
        dim: decision-variable dimension.
        eval_one: maps a length-dim vector to a float; must be pure.
        name: identifier used in configs and run records.
        optimum: optional (minimizer, value) pair when known analytically.
        lipschitz_hint: optional smoothness-scale estimate used by schedules.
        domain: optional symmetric search interval (lo, hi) applied per
            coordinate; used for benchmark initialization and default t0.
        eval_batch: optional vectorized (n, dim) -> (n,) evaluator; falls back
            to a row loop over eval_one.
    """

    dim: int
    eval_one: Callable[[np.ndarray], float]
    name: str
    optimum: Optional[tuple[np.ndarray, float]] = None
    lipschitz_hint: Optional[float] = None
    domain: Optional[tuple[float, float]] = None
    eval_batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ContractViolationError("objective dimension must be >= 1")

    def __call__(self, x) -> float:
        return float(self.eval_one(as_vector(x, self.dim)))

    def batch(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.float64)
        if ys.ndim != 2 or ys.shape[1] != self.dim:
            raise ContractViolationError(f"expected (n, {self.dim}) batch, got {ys.shape}")
        if self.eval_batch is not None:
            out = np.asarray(self.eval_batch(ys), dtype=np.float64)
        else:
            out = np.array([self.eval_one(y) for y in ys], dtype=np.float64)
        return out

    @property
    def half_width(self) -> float:
        if self.domain is None:
            raise ConfigurationError(f"objective {self.name!r} has no search domain")
        lo, hi = self.domain
        return 0.5 * (hi - lo)


def softmax_weights(costs, lam: float) -> np.ndarray:
    """Gibbs weights w_i proportional to exp(-costs_i / lam), normalized to 1.

    Computed with max-subtraction so no intermediate overflows for any cost
    scale.  lam = inf is allowed and yields exactly uniform weights.  Ties and
    shifts behave as the exact formula: adding a constant to all costs leaves
    the weights unchanged up to round-off.
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ContractViolationError("costs must be a nonempty 1-d array")
    if not np.all(np.isfinite(c)):
        raise ContractViolationError("costs must be finite")
    if not (lam > 0):  # rejects NaN as well
        raise ContractViolationError(f"lambda must be positive, got {lam}")
    logw = -c / lam
    if np.isinf(lam):
        logw = np.zeros_like(c)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def sample_gaussian(mean, variance_t: float, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. draws from N(mean, variance_t * I), deterministic given rng."""
    m = as_vector(mean)
    if not (variance_t > 0):
        raise ContractViolationError(f"kernel variance must be positive, got {variance_t}")
    if n < 1:
        raise ContractViolationError("sample count must be >= 1")
    g = rng.generator()
    return m + np.sqrt(variance_t) * g.standard_normal((n, m.shape[0]))
