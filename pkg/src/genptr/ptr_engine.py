"""Classic and generalized Propose-Test-Release, plus private hyperparameter selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DomainError
from .mech_core import PrivacyBudget, RandomSource, compose_dp, sample_noise

__all__ = [
    "PtrOutcome",
    "DpTest",
    "GenPtrSpec",
    "TunerResult",
    "classic_ptr",
    "classic_ptr_budget",
    "run_generalized_ptr",
    "gen_ptr_budget",
    "PrivateUpperBound",
    "upper_bound_test",
    "select_hyperparameters",
    "tuner_budget",
    "truncated_geometric_pmf",
    "expected_quantile",
    "default_tau",
    "default_cutoff",
]


@dataclass(frozen=True)
class PtrOutcome:
    """Either Bottom (the refusal output) or Released(value).

    ``info`` carries non-private diagnostics and released side statistics; it
    is not part of the tagged value.
    """

    released: bool
    value: Any = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.released and self.value is not None:
            raise DomainError("a Bottom outcome carries no value")

    @classmethod
    def bottom(cls, **info) -> "PtrOutcome":
        return cls(False, None, info)

    @classmethod
    def release(cls, value, **info) -> "PtrOutcome":
        return cls(True, value, info)

    @property
    def is_bottom(self) -> bool:
        return not self.released

    def __repr__(self):
        return f"Released({self.value!r})" if self.released else "Bottom"


@dataclass(frozen=True)
class DpTest:
    """A randomized test ``run(dataset, rng) -> {0, 1}`` with declared privacy.

    ``false_positive`` is the declared probability of passing when the
    data-dependent loss exceeds the mechanism's budget.  It is a property the
    caller vouches for; nothing here infers it.
    """

    run: Callable[[Any, RandomSource], int]
    budget: PrivacyBudget
    false_positive: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.false_positive < 1.0):
            raise DomainError(f"false-positive rate must be in [0, 1), got {self.false_positive}")

    def __call__(self, dataset, rng: RandomSource) -> int:
        return int(bool(self.run(dataset, rng)))


@dataclass(frozen=True)
class GenPtrSpec:
    mech_budget: PrivacyBudget
    test: DpTest

    def __post_init__(self):
        gen_ptr_budget(self)


def classic_ptr(dataset, beta, eps, delta, query, dist_to_unstable, rng: RandomSource) -> PtrOutcome:
    """Dwork-Lei PTR: test the distance to instability, then add Lap(beta/eps).

    ``dist_to_unstable(dataset)`` must return the exact distance D_beta(X) to
    the nearest dataset whose local sensitivity exceeds ``beta``.
    """
    if not (beta > 0):
        raise DomainError("beta must be positive")
    if not (eps > 0):
        raise DomainError("eps must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must be in (0, 1)")
    dist = dist_to_unstable(dataset)
    if dist < 0:
        raise DomainError("distance to instability must be >= 0")
    noisy = dist + sample_noise("laplace", 1.0 / eps, rng)
    if noisy <= math.log(1.0 / delta) / eps:
        return PtrOutcome.bottom(noisy_distance=noisy)
    return PtrOutcome.release(query(dataset) + sample_noise("laplace", beta / eps, rng), noisy_distance=noisy)


def classic_ptr_budget(eps: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(2.0 * eps, delta)


def run_generalized_ptr(dataset, spec: GenPtrSpec, mechanism, rng: RandomSource) -> PtrOutcome:
    """Run the test on substream 0; only on a pass run the mechanism on substream 1."""
    if not spec.test(dataset, rng.substream(0)):
        return PtrOutcome.bottom()
    return PtrOutcome.release(mechanism(dataset, rng.substream(1)))


def gen_ptr_budget(spec: GenPtrSpec) -> PrivacyBudget:
    """``(eps + eps_hat, delta + delta_hat + delta')``."""
    return compose_dp(
        [spec.mech_budget, spec.test.budget, PrivacyBudget(0.0, spec.test.false_positive)]
    )


@dataclass(frozen=True)
class PrivateUpperBound:
    """A private release of an upper bound on a data-dependent epsilon.

    ``release(dataset, rng)`` must exceed the true loss except with
    probability ``coverage_failure``; the release itself is ``budget``-DP.
    """

    release: Callable[[Any, RandomSource], float]
    budget: PrivacyBudget
    coverage_failure: float


def upper_bound_test(upper: PrivateUpperBound, threshold_eps: float) -> DpTest:
    """Test that passes iff the released upper bound is below ``threshold_eps``."""

    def run(dataset, rng):
        return 1 if upper.release(dataset, rng) < threshold_eps else 0

    return DpTest(run=run, budget=upper.budget, false_positive=upper.coverage_failure)


@dataclass
class TunerResult:
    outcome: PtrOutcome
    best_phi: Any
    trials: int
    history: list


def select_hyperparameters(
    phis: Sequence,
    per_run_budget: PrivacyBudget,
    cutoff: int,
    tau: float,
    score: Callable[[Any], float],
    runner: Callable[[Any, RandomSource], PtrOutcome],
    rng: RandomSource,
) -> TunerResult:
    """Random-stopping tuner over generalized-PTR runs.

    Draws ``G ~ Geometric(tau)`` on {1, 2, ...}, runs ``min(cutoff, G)`` trials
    with uniformly drawn (with replacement) parameters and returns the best
    scoring released candidate.  Bottom trials carry no score; if every trial
    is Bottom the result is Bottom.  Ties go to the earliest trial.

    ``per_run_budget`` is the (eps*, delta*) each runner call is declared
    under; the tuner's total is :func:`tuner_budget`.
    """
    if len(phis) == 0:
        raise DomainError("no hyperparameters to choose from")
    if not (0.0 < tau <= 1.0):
        raise DomainError(f"tau must be in (0, 1], got {tau}")
    if cutoff < 1:
        raise DomainError("cutoff must be >= 1")
    control = rng.substream(0)
    trials = min(int(cutoff), control.geometric(tau))
    picks = control.integers(0, len(phis), size=trials)
    best, best_score, best_phi, history = None, -math.inf, None, []
    for i, k in enumerate(picks):
        phi = phis[int(k)]
        outcome = runner(phi, rng.substream(i + 1))
        s = None if outcome.is_bottom else float(score(outcome.value))
        history.append((phi, s))
        if s is not None and (best is None or s > best_score):
            best, best_score, best_phi = outcome, s, phi
    if best is None:
        return TunerResult(PtrOutcome.bottom(), None, trials, history)
    return TunerResult(best, best_phi, trials, history)


def tuner_budget(eps_star: float, delta_star: float, cutoff: int, delta2: float) -> PrivacyBudget:
    """``(3 eps* + 3 sqrt(2 delta*), sqrt(2 delta*) T + delta2)``."""
    if cutoff < 1:
        raise DomainError("cutoff must be >= 1")
    PrivacyBudget(eps_star, delta_star)
    if delta2 < 0:
        raise DomainError("delta2 must be >= 0")
    root = math.sqrt(2.0 * delta_star)
    return PrivacyBudget(3.0 * eps_star + 3.0 * root, root * cutoff + delta2)


def default_tau(k: int) -> float:
    return 1.0 / (10.0 * k)


def default_cutoff(tau: float, delta2: float) -> int:
    return max(1, math.ceil(math.log(1.0 / delta2) / tau))


def truncated_geometric_pmf(tau: float, cutoff: int) -> np.ndarray:
    """``pmf[g-1] = Pr[min(cutoff, G) = g]`` for g = 1..cutoff."""
    if not (0.0 < tau <= 1.0):
        raise DomainError("tau must be in (0, 1]")
    g = np.arange(1, cutoff + 1)
    pmf = tau * (1.0 - tau) ** (g - 1)
    pmf[-1] = (1.0 - tau) ** (cutoff - 1)
    return pmf


def expected_quantile(tau: float, cutoff: int) -> float:
    """``E[1 - 1/(T_hat + 1)]`` for ``T_hat = min(cutoff, Geometric(tau))``."""
    if cutoff < 1:
        raise DomainError("cutoff must be >= 1")
    pmf = truncated_geometric_pmf(tau, cutoff)
    g = np.arange(1, cutoff + 1)
    return float(np.sum(pmf * (1.0 - 1.0 / (g + 1.0))))
