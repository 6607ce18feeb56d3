"""Noise primitives, tail bounds, privacy budgets and RDP bookkeeping.

All logarithms are natural; epsilons are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BudgetOverflowError, DomainError

__all__ = [
    "PrivacyBudget",
    "RdpCurve",
    "RandomSource",
    "DataDependentLoss",
    "sample_noise",
    "tail_bound",
    "gaussian_tail_exact",
    "laplace_data_dep_dp",
    "rdp_to_dp",
    "compose_rdp",
    "compose_dp",
]

_TWO_POW_53 = float(2**53)


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        eps, delta = float(self.epsilon), float(self.delta)
        if not (eps >= 0.0) or math.isinf(eps):
            raise DomainError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not (0.0 <= delta < 1.0):
            if delta >= 1.0:
                raise BudgetOverflowError(f"delta must be < 1, got {self.delta}")
            raise DomainError(f"delta must be in [0, 1), got {self.delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)

    def __add__(self, other: "PrivacyBudget") -> "PrivacyBudget":
        if not isinstance(other, PrivacyBudget):
            return NotImplemented
        return PrivacyBudget(self.epsilon + other.epsilon, self.delta + other.delta)

    def __iter__(self):
        yield self.epsilon
        yield self.delta


@dataclass(frozen=True)
class RdpCurve:
    """An evaluable RDP curve ``alpha -> epsilon(alpha)`` on ``(1, alpha_max]``."""

    func: Callable[[float], float]
    alpha_max: float = math.inf
    name: str = field(default="", compare=False)

    def __call__(self, alpha: float) -> float:
        alpha = float(alpha)
        if not (alpha > 1.0) or alpha > self.alpha_max:
            raise DomainError(f"order {alpha} outside (1, {self.alpha_max}]")
        value = float(self.func(alpha))
        if value < 0.0 or math.isnan(value):
            raise DomainError(f"RDP curve {self.name or self.func} returned {value} at order {alpha}")
        return value

    eval = __call__

    def __add__(self, other: "RdpCurve") -> "RdpCurve":
        if not isinstance(other, RdpCurve):
            return NotImplemented
        return compose_rdp([self, other])

    @classmethod
    def zero(cls) -> "RdpCurve":
        return cls(lambda a: 0.0, name="zero")

    @classmethod
    def constant(cls, value: float, alpha_max: float = math.inf) -> "RdpCurve":
        value = float(value)
        return cls(lambda a: value, alpha_max=alpha_max, name=f"const({value:g})")

    @classmethod
    def linear(cls, slope: float, alpha_max: float = math.inf) -> "RdpCurve":
        """``alpha * slope``; the Gaussian mechanism has slope ``Delta^2 / (2 sigma^2)``."""
        slope = float(slope)
        if slope < 0:
            raise DomainError("slope must be >= 0")
        return cls(lambda a: a * slope, alpha_max=alpha_max, name=f"linear({slope:g})")

    @classmethod
    def gaussian(cls, sigma: float, l2_sensitivity: float = 1.0) -> "RdpCurve":
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        return cls.linear(l2_sensitivity**2 / (2.0 * sigma**2))


class RandomSource:
    """Seeded stream of uniform variates with index-derived substreams.

    Substream ``i`` of a source keyed ``k`` is keyed ``k + (i,)`` in numpy's
    ``SeedSequence`` tree, so substreams are independent by construction and
    reproducible from ``(seed, path)`` alone.
    """

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed) % 2**64
        self.key = tuple(_key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
        )

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, key={self.key})"

    def substream(self, index: int) -> "RandomSource":
        if index < 0:
            raise DomainError("substream index must be >= 0")
        return RandomSource(self.seed, self.key + (int(index),))

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        return (k + 0.5) / _TWO_POW_53

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def geometric(self, p: float, size=None):
        """Geometric variates on {1, 2, ...} with success probability ``p``."""
        if not (0.0 < p <= 1.0):
            raise DomainError(f"geometric p must be in (0, 1], got {p}")
        if p == 1.0:
            return 1 if size is None else np.ones(size, dtype=np.int64)
        u = self.uniform(size)
        g = np.ceil(np.log(u) / math.log1p(-p))
        g = np.maximum(g, 1).astype(np.int64)
        return int(g) if size is None else g

    def dirichlet(self, alpha, size=None):
        return self._gen.dirichlet(alpha, size=size)

    def multinomial(self, n: int, pvals, size=None):
        return self._gen.multinomial(n, pvals, size=size)

    def permutation(self, n: int):
        return self._gen.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def _check_scale(scale):
    if not (scale > 0) or math.isinf(scale):
        raise DomainError(f"noise scale must be positive and finite, got {scale}")


def sample_noise(kind: str, scale: float, rng: RandomSource, size=None):
    """Draw Laplace(scale) or N(0, scale^2) noise from ``rng``.

    Laplace uses the inverse CDF of one uniform; Gaussian uses the Box-Muller
    transform on pairs of uniforms (no rejection step).
    """
    _check_scale(scale)
    if kind == "laplace":
        v = rng.uniform(size) - 0.5
        return -scale * np.sign(v) * np.log1p(-2.0 * np.abs(v))
    if kind == "gaussian":
        n = 1 if size is None else int(np.prod(size))
        m = (n + 1) // 2
        u1 = rng.uniform(m)
        u2 = rng.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        z *= scale
        return float(z[0]) if size is None else z.reshape(size)
    raise DomainError(f"unknown noise kind {kind!r}")


def tail_bound(kind: str, scale: float, t: float) -> float:
    """Upper-tail probability bound ``Pr[noise > t]``.

    Laplace is exact: ``exp(-t/b) / 2``.  Gaussian is the sub-Gaussian bound
    ``exp(-t^2 / (2 sigma^2))``, which is what the coverage arguments are
    calibrated against; see :func:`gaussian_tail_exact` for the true tail.
    """
    _check_scale(scale)
    if not (t >= 0):
        raise DomainError(f"t must be >= 0, got {t}")
    if kind == "laplace":
        return 0.5 * math.exp(-t / scale)
    if kind == "gaussian":
        return math.exp(-(t * t) / (2.0 * scale * scale))
    raise DomainError(f"unknown noise kind {kind!r}")


def gaussian_tail_exact(scale: float, t: float) -> float:
    _check_scale(scale)
    return 0.5 * math.erfc(t / (scale * math.sqrt(2.0)))


def laplace_data_dep_dp(local_sensitivity: float, phi: float) -> float:
    """Data-dependent epsilon of ``f(X) + Lap(phi)``: local sensitivity over scale."""
    if not (phi > 0):
        raise DomainError(f"phi must be positive, got {phi}")
    if local_sensitivity < 0:
        raise DomainError("local sensitivity must be >= 0")
    return local_sensitivity / phi


class DataDependentLoss:
    """``(dataset, phi) -> epsilon`` at a fixed delta."""

    def __init__(self, func: Callable, delta: float = 0.0):
        self.func = func
        self.delta = float(delta)

    def __call__(self, dataset, phi) -> float:
        eps = float(self.func(dataset, phi))
        if eps < 0 or math.isnan(eps):
            raise DomainError(f"data-dependent loss returned {eps}")
        return eps

    @classmethod
    def laplace(cls, local_sensitivity: Callable) -> "DataDependentLoss":
        return cls(lambda x, phi: laplace_data_dep_dp(local_sensitivity(x), phi), 0.0)


def rdp_to_dp(curve: RdpCurve, alpha: float, delta: float) -> PrivacyBudget:
    """Convert an RDP guarantee at one order to (epsilon, delta)-DP."""
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    value = curve(alpha)
    return PrivacyBudget(value + math.log(1.0 / delta) / (alpha - 1.0), delta)


def compose_rdp(curves: Sequence[RdpCurve]) -> RdpCurve:
    """Pointwise sum; the domain is the intersection of the inputs' domains."""
    curves = list(curves)
    if not curves:
        raise DomainError("cannot compose an empty list of RDP curves")
    alpha_max = min(c.alpha_max for c in curves)
    funcs = tuple(c.func for c in curves)

    def total(alpha):
        return math.fsum(float(f(alpha)) for f in funcs)

    return RdpCurve(total, alpha_max=alpha_max, name="+".join(c.name or "?" for c in curves))


def compose_dp(budgets: Iterable[PrivacyBudget]) -> PrivacyBudget:
    """Basic composition: componentwise sums."""
    budgets = list(budgets)
    if not budgets:
        raise DomainError("cannot compose an empty list of budgets")
    eps = math.fsum(b.epsilon for b in budgets)
    delta = math.fsum(b.delta for b in budgets)
    if delta >= 1.0:
        raise BudgetOverflowError(f"composed delta {delta} >= 1")
    return PrivacyBudget(eps, delta)
