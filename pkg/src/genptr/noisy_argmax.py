"""Binary report-noisy-max voting.

The gap is ``t = n0 - n1``.  A neighbouring vote profile changes one of the
two counts by one (clamped at zero), which gives four neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DomainError
from .mech_core import PrivacyBudget, RandomSource, sample_noise
from .ptr_engine import PtrOutcome

__all__ = [
    "BinaryVotes",
    "lap_diff_tail",
    "flip_prob",
    "data_dep_dp_vote",
    "loss_envelope",
    "gen_ptr_vote",
    "gen_ptr_vote_budget",
    "classic_ptr_vote",
    "classic_ptr_vote_budget",
    "mc_flip_oracle",
]

# Beyond eps * gap of this size both flip probabilities are below 1e-30.
_TAIL_HORIZON = 80.0


@dataclass(frozen=True)
class BinaryVotes:
    n0: int
    n1: int

    def __post_init__(self):
        for name in ("n0", "n1"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DomainError(f"{name} must be a nonnegative integer, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def gap(self) -> int:
        return self.n0 - self.n1

    @classmethod
    def from_gap(cls, t: int, base: int = 1) -> "BinaryVotes":
        """Profile with gap ``t`` whose smaller count is ``base``."""
        return cls(base + max(t, 0), base + max(-t, 0))

    def swapped(self) -> "BinaryVotes":
        return BinaryVotes(self.n1, self.n0)

    def neighbours(self):
        return (
            BinaryVotes(self.n0 + 1, self.n1),
            BinaryVotes(max(self.n0 - 1, 0), self.n1),
            BinaryVotes(self.n0, self.n1 + 1),
            BinaryVotes(self.n0, max(self.n1 - 1, 0)),
        )

    def argmax(self) -> int:
        return 0 if self.n0 >= self.n1 else 1


def lap_diff_tail(z):
    """``Pr[Z > z]`` for ``Z`` the difference of two unit Laplace variates."""
    if np.ndim(z) == 0:
        return kernels.lap_diff_tail_scalar(float(z))
    z = np.asarray(z, dtype=float)
    return kernels.lap_diff_tail_array(z.ravel()).reshape(z.shape)


def _check_eps(eps):
    if not (eps > 0):
        raise DomainError(f"eps must be positive, got {eps}")


def _output_probs(votes: BinaryVotes, eps: float):
    # Each mass is computed as its own tail so neither suffers from 1 - p cancellation.
    return (
        kernels.lap_diff_tail_scalar(eps * (votes.n1 - votes.n0)),
        kernels.lap_diff_tail_scalar(eps * (votes.n0 - votes.n1)),
    )


def _log_tail(z: float) -> float:
    if z >= 0.0:
        return math.log(2.0 + z) - math.log(4.0) - z
    return math.log1p(-(2.0 - z) * math.exp(z) / 4.0)


def _log_output_probs(votes: BinaryVotes, eps: float):
    # Log masses stay finite where the masses themselves underflow (eps * gap beyond ~740).
    z = eps * (votes.n1 - votes.n0)
    return _log_tail(z), _log_tail(-z)


def flip_prob(votes: BinaryVotes, eps: float) -> float:
    """``Pr[noisy argmax = 0]`` with Laplace(1/eps) noise on each count."""
    _check_eps(eps)
    if math.isinf(eps):
        return 1.0 if votes.n0 > votes.n1 else (0.0 if votes.n0 < votes.n1 else 0.5)
    return _output_probs(votes, eps)[0]


def _approx_term(q, log_q_other, delta):
    num = q - delta
    if num <= 0.0:
        return 0.0
    return max(0.0, math.log(num) - log_q_other)


def data_dep_dp_vote(votes: BinaryVotes, eps: float, delta: float = 0.0) -> float:
    """Data-dependent epsilon of the noisy vote at ``votes``.

    With ``delta == 0`` this is the pure loss over the four neighbours.  With
    ``delta > 0`` it is the smallest epsilon such that both singleton output
    events satisfy ``q <= e^eps q' + delta`` in both directions.
    """
    _check_eps(eps)
    if not (0.0 <= delta < 1.0):
        raise DomainError(f"delta must be in [0, 1), got {delta}")
    p, lp = _output_probs(votes, eps), _log_output_probs(votes, eps)
    worst = 0.0
    for nb in votes.neighbours():
        pn, lpn = _output_probs(nb, eps), _log_output_probs(nb, eps)
        for k in (0, 1):
            if delta == 0.0:
                worst = max(worst, abs(lp[k] - lpn[k]))
            else:
                worst = max(worst, _approx_term(p[k], lpn[k], delta), _approx_term(pn[k], lp[k], delta))
    return worst


def loss_envelope(t_low: float, eps: float, delta: float) -> float:
    """``sup`` of :func:`data_dep_dp_vote` over integer gaps ``>= t_low``.

    Gaps are realised with both counts at least one, so the clamp never
    shrinks the neighbour set; this upper-bounds every profile with that gap.
    The loss is symmetric in the sign of the gap and constant past the tail
    horizon, where the pure loss tends to ``eps``.
    """
    _check_eps(eps)
    horizon = math.ceil(_TAIL_HORIZON / eps) + 2
    start = math.ceil(t_low) if math.isfinite(t_low) else -horizon
    return _envelope_from(max(int(start), -horizon), float(eps), float(delta), horizon)


@lru_cache(maxsize=65536)
def _envelope_from(start: int, eps: float, delta: float, horizon: int) -> float:
    worst = eps if delta == 0.0 else 0.0
    for t in range(start, max(start, 0) + horizon + 1):
        worst = max(worst, data_dep_dp_vote(BinaryVotes.from_gap(t), eps, delta))
    return worst


def _noisy_vote(votes: BinaryVotes, eps_noise: float, rng: RandomSource) -> int:
    noise = sample_noise("laplace", 1.0 / eps_noise, rng, size=2)
    return 0 if votes.n0 + noise[0] >= votes.n1 + noise[1] else 1


def gen_ptr_vote(
    votes: BinaryVotes,
    eps_noise: float,
    eps_tilde: float,
    delta: float,
    eps_budget: float,
    rng: RandomSource,
) -> PtrOutcome:
    """Generalized PTR around the noisy vote.

    Releases a private lower bound on the gap, bounds the data-dependent loss
    over every gap at or above it and releases the noisy vote if that bound
    is within ``eps_budget``.
    """
    _check_eps(eps_noise)
    _check_eps(eps_tilde)
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    test_rng, mech_rng = rng.substream(0), rng.substream(1)
    t_low = (
        abs(votes.gap)
        - math.log(1.0 / delta) / eps_tilde
        + float(sample_noise("laplace", 1.0 / eps_tilde, test_rng))
    )
    eps_p = loss_envelope(t_low, eps_noise, delta)
    if eps_p > eps_budget:
        return PtrOutcome.bottom(gap_lower=t_low, eps_p=eps_p)
    return PtrOutcome.release(_noisy_vote(votes, eps_noise, mech_rng), gap_lower=t_low, eps_p=eps_p)


def gen_ptr_vote_budget(eps_tilde: float, eps_budget: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(eps_tilde + eps_budget, delta)


def classic_ptr_vote(votes: BinaryVotes, eps: float, eps_tilde: float, delta: float, rng: RandomSource) -> PtrOutcome:
    """Distance-to-instability gate around the exact argmax.

    A profile at gap ``t`` is ``max(t - 1, 0)`` moves away from one whose
    argmax can change.  On a pass the exact argmax is released; on a fail a
    uniformly random class is released, so the outcome is never Bottom.
    ``eps`` is accepted for signature parity with :func:`gen_ptr_vote`.
    """
    _check_eps(eps)
    _check_eps(eps_tilde)
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    test_rng, mech_rng = rng.substream(0), rng.substream(1)
    dist = max(abs(votes.gap) - 1, 0)
    noisy = dist + float(sample_noise("laplace", 1.0 / eps_tilde, test_rng))
    if noisy > math.log(1.0 / delta) / eps_tilde:
        return PtrOutcome.release(votes.argmax(), passed=True, noisy_distance=noisy)
    return PtrOutcome.release(int(mech_rng.integers(0, 2)), passed=False, noisy_distance=noisy)


def classic_ptr_vote_budget(eps_tilde: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(eps_tilde, delta)


def mc_flip_oracle(votes: BinaryVotes, eps: float, trials: int, rng: RandomSource, chunk: int = 1 << 20) -> float:
    """Empirical ``Pr[noisy argmax = 0]`` from fresh Laplace pairs."""
    _check_eps(eps)
    if trials < 1:
        raise DomainError("trials must be >= 1")
    wins, done = 0, 0
    while done < trials:
        m = min(chunk, trials - done)
        u = rng.uniform(2 * m)
        wins += kernels.count_noisy_wins(float(votes.n0), float(votes.n1), 1.0 / eps, u[:m], u[m:])
        done += m
    return wins / trials
