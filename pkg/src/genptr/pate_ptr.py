"""PATE label release gated by a private upper bound on its data-dependent RDP.

Per-query RDP is the GNMax data-dependent bound; the total is released with
Gaussian noise scaled by its smooth sensitivity (GNSS) and then converted to
an (epsilon, delta) guarantee that is compared against the proposed budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DomainError
from .mech_core import PrivacyBudget, RandomSource, RdpCurve, rdp_to_dp, sample_noise
from .ptr_engine import PtrOutcome

__all__ = [
    "VoteHistogram",
    "PateConfig",
    "GnssRelease",
    "noisy_label",
    "qtilde",
    "per_query_rdp",
    "total_rdp",
    "count_states",
    "SmoothSensitivity",
    "smooth_sens_rdp",
    "gnss_release",
    "pate_ptr_budget",
    "pate_ptr_run",
    "gaussian_baseline_eps",
    "gaussian_baseline_eps_opt",
    "simulate_consensus",
    "SS_FLOOR",
]

# Keeps log(SS) finite; a constant is 0-smooth, so max(SS, floor) stays beta-smooth.
SS_FLOOR = 1e-300


@dataclass(frozen=True)
class VoteHistogram:
    counts: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in np.asarray(self.counts).ravel())
        if len(c) < 2:
            raise DomainError("a vote histogram needs at least two classes")
        if any(v < 0 for v in c) or any(v != w for v, w in zip(c, np.asarray(self.counts).ravel())):
            raise DomainError("vote counts must be nonnegative integers")
        if sum(c) < 1:
            raise DomainError("a vote histogram needs at least one teacher")
        object.__setattr__(self, "counts", c)

    @property
    def teacher_count(self) -> int:
        return sum(self.counts)

    @property
    def num_classes(self) -> int:
        return len(self.counts)

    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    def canonical(self) -> tuple:
        return tuple(sorted(self.counts, reverse=True))


def _as_hist(h) -> VoteHistogram:
    return h if isinstance(h, VoteHistogram) else VoteHistogram(tuple(h))


@dataclass(frozen=True)
class PateConfig:
    """Noise scales and budgets; ``alpha``, ``sigma_s``, ``sigma2``, ``beta_ss`` and ``delta2`` are derived."""

    sigma1: float
    eps_hat: float
    eps_prime: float
    delta: float
    eps2_uses_sigma1: bool = True
    alpha: float = field(init=False)
    sigma_s: float = field(init=False)
    sigma2: float = field(init=False)
    beta_ss: float = field(init=False)
    delta2: float = field(init=False)

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.eps_hat > 0):
            raise DomainError("sigma1 and eps_hat must be positive")
        if not (self.eps_prime >= 0):
            raise DomainError("eps_prime must be >= 0")
        if not (0.0 < self.delta < 1.0):
            raise DomainError("delta must be in (0, 1)")
        alpha = 2.0 * math.log(2.0 / self.delta) / self.eps_hat + 1.0
        sigma_s = math.sqrt((3.0 * alpha + 2.0) / self.eps_hat)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma_s", sigma_s)
        object.__setattr__(self, "sigma2", sigma_s)
        object.__setattr__(self, "beta_ss", 0.2 / alpha)
        object.__setattr__(self, "delta2", self.delta / 2.0)

    @classmethod
    def from_sigma_s(cls, sigma_s: float, sigma1: float, eps_prime: float, delta: float, **kw) -> "PateConfig":
        """Pick ``eps_hat`` so the derived ``sigma_s`` equals the given value."""
        if not (sigma_s > 0):
            raise DomainError("sigma_s must be positive")
        log2d = math.log(2.0 / delta)
        s2 = sigma_s * sigma_s
        eps_hat = (5.0 + math.sqrt(25.0 + 24.0 * log2d * s2)) / (2.0 * s2)
        return cls(sigma1, eps_hat, eps_prime, delta, **kw)

    @property
    def eps2_sigma(self) -> float:
        return self.sigma1 if self.eps2_uses_sigma1 else self.sigma2


def noisy_label(hist, sigma1: float, rng: RandomSource) -> int:
    """Argmax of Gaussian-perturbed counts; ties go to the lowest index."""
    h = _as_hist(hist)
    if sigma1 < 0:
        raise DomainError("sigma1 must be >= 0")
    counts = h.array()
    if sigma1 > 0:
        counts = counts + sample_noise("gaussian", sigma1, rng, size=counts.shape[0])
    return int(np.argmax(counts))


def qtilde(hist, sigma1: float) -> float:
    """Union bound on ``Pr[noisy label != plurality label]``, capped at 1."""
    if not (sigma1 > 0):
        raise DomainError("sigma1 must be positive")
    return math.exp(kernels.logq_gnmax(_as_hist(hist).array(), float(sigma1)))


def per_query_rdp(hist, sigma1: float, alpha: float, eps2_sigma: float | None = None) -> float:
    """Data-dependent RDP of one GNMax query, never above ``alpha / sigma1^2``."""
    if not (alpha > 1):
        raise DomainError("alpha must be > 1")
    if not (sigma1 > 0):
        raise DomainError("sigma1 must be positive")
    e2 = sigma1 if eps2_sigma is None else eps2_sigma
    logq = kernels.logq_gnmax(_as_hist(hist).array(), float(sigma1))
    return float(kernels.rdp_gnmax_from_logq(logq, float(sigma1), float(alpha), float(e2)))


def _rows(hists) -> np.ndarray:
    hs = [_as_hist(h) for h in hists]
    if not hs:
        return np.zeros((0, 2))
    width = {h.num_classes for h in hs}
    if len(width) != 1:
        raise DomainError("all histograms must have the same number of classes")
    return np.array([h.counts for h in hs], dtype=float)


def total_rdp(hists, sigma1: float, alpha: float, eps2_sigma: float | None = None) -> float:
    if not (alpha > 1):
        raise DomainError("alpha must be > 1")
    rows = _rows(hists)
    if rows.shape[0] == 0:
        return 0.0
    e2 = sigma1 if eps2_sigma is None else eps2_sigma
    return math.fsum(kernels.rdp_gnmax_rows(rows, float(sigma1), float(alpha), float(e2)))


@lru_cache(maxsize=None)
def count_states(K: int, C: int) -> int:
    """Number of histograms of ``K`` votes over ``C`` classes up to relabeling."""
    # Partitions of K into at most C parts.
    table = [1] + [0] * K
    for part in range(1, C + 1):
        for k in range(part, K + 1):
            table[k] += table[k - part]
    return table[K]


def _partitions(K: int, C: int):
    """Nonincreasing C-tuples of nonnegative integers summing to K."""
    if C == 1:
        yield (K,)
        return
    for first in range(K, (K + C - 1) // C - 1, -1):
        for rest in _partitions(K - first, C - 1):
            if rest[0] <= first:
                yield (first,) + rest


def _moves(state: tuple):
    """Canonical states one vote move away."""
    out = set()
    c = len(state)
    for i in range(c):
        if state[i] == 0:
            continue
        for j in range(c):
            if i != j:
                t = list(state)
                t[i] -= 1
                t[j] += 1
                out.add(tuple(sorted(t, reverse=True)))
    out.discard(state)
    return out


class SmoothSensitivity:
    """Per-query smooth sensitivity of GNMax data-dependent RDP at one ``(sigma1, alpha, beta)``.

    The vote-move distance between two canonical (sorted) histograms is half
    the L1 distance of the sorted vectors, since matching sorted orders
    minimises L1 over relabelings.  When the number of canonical states for
    ``(K, C)`` is at most ``state_budget`` the local sensitivity of every
    state is tabulated once and each query is a vectorised maximum.
    Otherwise a breadth-first search over vote moves runs from the query,
    stopping once ``e^(-beta d) * alpha / sigma1^2`` cannot beat the running
    maximum; if the search exceeds ``state_budget`` states the remaining tail
    is bounded by that same cap, which keeps the result an upper bound.
    """

    def __init__(self, sigma1, alpha, beta, eps2_sigma=None, state_budget=250_000):
        if not (beta > 0):
            raise DomainError("beta must be positive")
        if not (sigma1 > 0 and alpha > 1):
            raise DomainError("need sigma1 > 0 and alpha > 1")
        self.sigma1 = float(sigma1)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.eps2_sigma = float(sigma1 if eps2_sigma is None else eps2_sigma)
        self.state_budget = int(state_budget)
        # Same rounding as the kernels so the cap compares exactly with per-query values.
        self.cap = self.alpha / (self.sigma1 * self.sigma1)
        self._rdp: dict = {}
        self._ls: dict = {}
        self._tables: dict = {}
        self._memo: dict = {}
        self.truncated = False

    def _fill_rdp(self, states):
        missing = [s for s in states if s not in self._rdp]
        if missing:
            vals = kernels.rdp_gnmax_rows(np.array(missing, dtype=float), self.sigma1, self.alpha, self.eps2_sigma)
            self._rdp.update(zip(missing, vals.tolist()))

    def local_sensitivity(self, state: tuple) -> float:
        if state not in self._ls:
            nbrs = _moves(state)
            self._fill_rdp([state, *nbrs])
            r = self._rdp[state]
            self._ls[state] = max((abs(self._rdp[t] - r) for t in nbrs), default=0.0)
        return self._ls[state]

    def _table(self, K: int, C: int):
        key = (K, C)
        if key not in self._tables:
            states = list(_partitions(K, C))
            self._fill_rdp(states)
            for s in states:
                self.local_sensitivity(s)
            arr = np.array(states, dtype=float)
            ls = np.array([self._ls[s] for s in states])
            self._tables[key] = (arr, ls)
        return self._tables[key]

    def _bfs(self, start: tuple) -> float:
        best, d = 0.0, 0
        seen = {start}
        layer = [start]
        while layer:
            self._fill_rdp([t for s in layer for t in _moves(s)])
            best = max(best, math.exp(-self.beta * d) * max(self.local_sensitivity(s) for s in layer))
            d += 1
            tail = math.exp(-self.beta * d) * self.cap
            if tail <= best:
                break
            nxt = []
            for s in layer:
                for t in _moves(s):
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
            if len(seen) > self.state_budget:
                self.truncated = True
                # Layer d is collected but unscored: bound it and everything beyond by the cap.
                return max(best, tail)
            layer = nxt
        return best

    def per_query(self, hist) -> float:
        h = _as_hist(hist)
        start = h.canonical()
        if start in self._memo:
            return self._memo[start]
        K, C = h.teacher_count, h.num_classes
        if count_states(K, C) <= self.state_budget:
            arr, ls = self._table(K, C)
            dist = np.abs(arr - np.array(start, dtype=float)).sum(axis=1) / 2.0
            value = float(np.max(np.exp(-self.beta * dist) * ls))
        else:
            value = self._bfs(start)
        self._memo[start] = value
        return value

    def __call__(self, hists) -> float:
        return math.fsum(self.per_query(h) for h in hists)


def smooth_sens_rdp(hists, sigma1, alpha, beta_ss, eps2_sigma=None, state_budget=250_000) -> float:
    """Smooth sensitivity of :func:`total_rdp` as the sum of per-query smooth sensitivities."""
    return SmoothSensitivity(sigma1, alpha, beta_ss, eps2_sigma, state_budget)(hists)


@dataclass(frozen=True)
class GnssRelease:
    mu: float
    rdp_upper: float


def gnss_release(rdp_value: float, ss_value: float, config: PateConfig, rng: RandomSource) -> GnssRelease:
    """Private upper bound on the data-dependent RDP, valid w.p. ``1 - delta2``."""
    if not (ss_value > 0):
        raise DomainError("smooth sensitivity must be positive")
    z = sample_noise("gaussian", 1.0, rng, size=2)
    root = math.sqrt(2.0 * math.log(2.0 / config.delta2))
    mu = math.log(ss_value) + config.beta_ss * config.sigma2 * z[0] + root * config.sigma2 * config.beta_ss
    upper = rdp_value + ss_value * config.sigma_s * z[1] + config.sigma_s * root * math.exp(mu)
    return GnssRelease(float(mu), float(upper))


def pate_ptr_budget(config: PateConfig) -> PrivacyBudget:
    return PrivacyBudget(config.eps_prime + config.eps_hat, config.delta)


def pate_ptr_run(hists, config: PateConfig, rng: RandomSource, smooth: SmoothSensitivity | None = None) -> PtrOutcome:
    """Label every query, privately bound the labelling's epsilon and release iff it fits ``eps_prime``.

    Substream 0 draws the labels and substream 1 the GNSS noise.  ``smooth``
    may be passed to reuse smooth-sensitivity tables across runs at the
    same ``(sigma1, alpha, beta)``.
    """
    hs = [_as_hist(h) for h in hists]
    label_rng = rng.substream(0)
    labels = [noisy_label(h, config.sigma1, label_rng) for h in hs]
    rdp = total_rdp(hs, config.sigma1, config.alpha, config.eps2_sigma)
    if smooth is None:
        smooth = SmoothSensitivity(config.sigma1, config.alpha, config.beta_ss, config.eps2_sigma)
    elif (smooth.sigma1, smooth.alpha, smooth.beta, smooth.eps2_sigma) != (
        config.sigma1,
        config.alpha,
        config.beta_ss,
        config.eps2_sigma,
    ):
        raise DomainError("smooth-sensitivity helper was built for different parameters")
    ss = max(smooth(hs), SS_FLOOR)
    rel = gnss_release(rdp, ss, config, rng.substream(1))
    upper = max(rel.rdp_upper, 0.0)
    eps_sigma1 = rdp_to_dp(RdpCurve.constant(upper), config.alpha, config.delta / 2.0).epsilon
    info = dict(rdp=rdp, smooth_sens=ss, mu=rel.mu, rdp_upper=upper, eps_sigma1=eps_sigma1)
    if config.eps_prime >= eps_sigma1:
        return PtrOutcome.release(labels, **info)
    return PtrOutcome.bottom(**info)


def gaussian_baseline_eps(T: int, sigma1: float, alpha: float, delta: float) -> float:
    """Data-independent epsilon of ``T`` GNMax queries at one RDP order."""
    return rdp_to_dp(RdpCurve.linear(T / sigma1**2), alpha, delta).epsilon


def gaussian_baseline_eps_opt(T: int, sigma1: float, delta: float) -> float:
    """Same, minimised over the order: ``alpha = 1 + sigma1 sqrt(ln(1/delta) / T)``."""
    a = 1.0 + sigma1 * math.sqrt(math.log(1.0 / delta) / T)
    return gaussian_baseline_eps(T, sigma1, a, delta)


def _capped_multinomial(total: int, probs: np.ndarray, cap: int, rng: RandomSource) -> np.ndarray:
    counts = np.asarray(rng.multinomial(total, probs), dtype=np.int64)
    while counts.max() > cap:
        excess = int(np.maximum(counts - cap, 0).sum())
        counts = np.minimum(counts, cap)
        room = counts < cap
        p = np.where(room, probs, 0.0)
        p = p / p.sum() if p.sum() > 0 else room / room.sum()
        counts = counts + rng.multinomial(excess, p)
    return counts


def simulate_consensus(K: int, C: int, T: int, regime: str, rng: RandomSource, threshold: float = 0.375):
    """Synthetic teacher-vote histograms in a high- or low-consensus regime.

    The plurality count is uniform over its feasible range: above
    ``ceil(threshold K)`` for ``high``, below it for ``low``.  The remaining
    votes follow a symmetric Dirichlet-multinomial over the other classes,
    capped at the plurality count.  The plurality class is placed at a
    uniformly random index.
    """
    if C < 2 or K < C:
        raise DomainError("need C >= 2 and K >= C")
    if T < 0:
        raise DomainError("T must be >= 0")
    cut = math.ceil(threshold * K)
    floor_top = -(-K // C)
    if regime == "high":
        lo, hi = max(cut + 1, floor_top), K
    elif regime == "low":
        lo, hi = floor_top, cut - 1
    else:
        raise DomainError(f"regime must be 'high' or 'low', got {regime!r}")
    if lo > hi:
        raise DomainError(f"no {regime}-consensus histogram exists for K={K}, C={C}")
    out = []
    for i in range(T):
        sub = rng.substream(i)
        top = int(sub.integers(lo, hi + 1))
        probs = sub.dirichlet(np.ones(C - 1))
        rest = _capped_multinomial(K - top, probs, top, sub)
        counts = np.insert(rest, 0, top)
        pos = int(sub.integers(0, C))
        counts[[0, pos]] = counts[[pos, 0]]
        out.append(VoteHistogram(tuple(int(v) for v in counts)))
    return out
