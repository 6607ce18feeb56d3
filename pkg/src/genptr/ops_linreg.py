"""One-posterior-sample (OPS) ridge regression with privately released statistics.

The Gibbs posterior ``exp(-gamma (F(theta) + lambda |theta|^2 / 2))`` with
``F(theta) = |y - X theta|^2 / 2`` is the Gaussian
``N(theta*, (gamma (X^T X + lambda I))^-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, InfeasibleCalibrationError, NumericalError
from .mech_core import PrivacyBudget, RandomSource, sample_noise
from .ptr_engine import PtrOutcome, TunerResult, default_cutoff, default_tau, select_hyperparameters

__all__ = [
    "RegressionDataset",
    "OpsParams",
    "SufficientStats",
    "OpsRelease",
    "ridge_solve",
    "gram_min_eig",
    "per_instance_eps",
    "release_lambda_min",
    "lipschitz_sensitivity",
    "release_lipschitz",
    "calibrate_gamma",
    "sample_posterior",
    "output_perturbation_sigma",
    "output_perturbation_baseline",
    "ops_ptr_pipeline",
    "ops_ptr_budget",
    "ops_fixed",
    "ops_ptr_tuned",
    "mse",
]

_NORM_SLACK = 1e-12


@dataclass(frozen=True)
class RegressionDataset:
    X: np.ndarray
    y: np.ndarray
    x_bound: float = 1.0
    y_bound: float = 1.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DomainError("need n >= 1 rows and d >= 1 columns")
        if y.shape[0] != X.shape[0]:
            raise DomainError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (self.x_bound > 0 and self.y_bound > 0):
            raise DomainError("x_bound and y_bound must be positive")
        if np.linalg.norm(X, axis=1).max() > self.x_bound + _NORM_SLACK:
            raise DomainError(f"a row norm exceeds x_bound={self.x_bound}")
        if np.abs(y).max() > self.y_bound + _NORM_SLACK:
            raise DomainError(f"a target exceeds y_bound={self.y_bound}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class OpsParams:
    lam: float
    gamma: float

    def __post_init__(self):
        if not (self.lam >= 0):
            raise DomainError("lambda must be >= 0")
        if not (self.gamma > 0):
            raise DomainError("gamma must be positive")


@dataclass(frozen=True)
class SufficientStats:
    """``lambda_min(X^T X)``, ``|theta*_lambda|`` and the local Lipschitz constant ``L``."""

    lambda_min: float
    theta_norm: float
    lipschitz: float

    def __post_init__(self):
        if self.lambda_min < 0 or self.theta_norm < 0 or self.lipschitz < 0:
            raise DomainError("sufficient statistics must be >= 0")

    @classmethod
    def from_data(cls, data: RegressionDataset, lam: float) -> "SufficientStats":
        theta = ridge_solve(data, lam)
        norm = float(np.linalg.norm(theta))
        return cls(gram_min_eig(data), norm, data.x_bound * (data.x_bound * norm + data.y_bound))


def _gram(data: RegressionDataset, lam: float) -> np.ndarray:
    a = data.X.T @ data.X
    a[np.diag_indices_from(a)] += lam
    return a


def _factor(a: np.ndarray):
    try:
        return linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("X^T X + lambda I is not positive definite") from exc


def ridge_solve(data: RegressionDataset, lam: float) -> np.ndarray:
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    a = _gram(data, lam)
    b = data.X.T @ data.y
    theta = linalg.cho_solve(_factor(a), b, check_finite=False)
    if np.linalg.norm(a @ theta - b) > 1e-8 * max(np.linalg.norm(b), 1e-300):
        raise NumericalError("ridge system is too ill-conditioned to solve accurately")
    return theta


def gram_min_eig(data: RegressionDataset) -> float:
    """Exact ``lambda_min(X^T X)``, clipped at zero."""
    return max(float(linalg.eigvalsh(data.X.T @ data.X, subset_by_index=[0, 0])[0]), 0.0)


def per_instance_eps(stats: SufficientStats, x_bound: float, lam: float, gamma: float, delta: float) -> float:
    """Per-instance epsilon of one posterior sample at ``(lam, gamma)``."""
    lam_star = lam + stats.lambda_min
    if not (lam_star > 0):
        raise DomainError("lambda + lambda_min must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must be in (0, 1)")
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    log2d = math.log(2.0 / delta)
    l2 = stats.lipschitz**2
    x2 = x_bound**2
    return (
        math.sqrt(gamma * l2 * log2d / lam_star)
        + gamma * l2 / (2.0 * (lam_star + x2))
        + (1.0 + log2d * x2) / (2.0 * lam_star)
    )


def _release_scales(eps: float, delta: float):
    """Noise std and downward shift per unit sensitivity at budget ``(eps/4, delta/3)``."""
    log6 = math.log(6.0 / delta)
    quarter = eps / 4.0
    return math.sqrt(log6) / quarter, math.sqrt(2.0 * log6 * math.log(2.0 / delta)) / quarter


def release_lambda_min(
    lambda_min: float, eps: float, delta: float, rng: RandomSource, sensitivity: float = 1.0
) -> float:
    """Private lower bound on ``lambda_min(X^T X)``, clamped at zero."""
    if not (eps > 0):
        raise DomainError("eps must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must be in (0, 1)")
    if math.isinf(eps):
        return float(lambda_min)
    std, shift = _release_scales(eps, delta)
    z = sample_noise("gaussian", 1.0, rng)
    return max(lambda_min + sensitivity * (std * z - shift), 0.0)


def lipschitz_sensitivity(x_bound: float, lam: float, lambda_min_low: float) -> float:
    """Local sensitivity of ``log(y_bound + x_bound |theta*|)``."""
    denom = lam + lambda_min_low
    if not (denom > 0):
        raise DomainError("lambda + lambda_min must be positive")
    return math.log1p(x_bound**2 / denom)


def release_lipschitz(
    data: RegressionDataset,
    theta_norm: float,
    lambda_tilde_min: float,
    lam: float,
    eps: float,
    delta: float,
    rng: RandomSource,
):
    """Private upper bound ``L~ = x_bound e^Delta`` on the local Lipschitz constant.

    Returns ``(L~, Delta)``.
    """
    if not (eps > 0):
        raise DomainError("eps must be positive")
    base = math.log(data.y_bound + data.x_bound * theta_norm)
    if math.isinf(eps):
        return data.x_bound * math.exp(base), base
    s = lipschitz_sensitivity(data.x_bound, lam, lambda_tilde_min)
    std, shift = _release_scales(eps, delta)
    z = sample_noise("gaussian", 1.0, rng)
    big_delta = base + s * (std * z + shift)
    # An overflowing bound is still an upper bound; the pipeline reports it as infeasible.
    if big_delta > 700.0:
        return math.inf, big_delta
    return data.x_bound * math.exp(big_delta), big_delta


def calibrate_gamma(
    stats: SufficientStats,
    x_bound: float,
    lam: float,
    target: PrivacyBudget,
    rtol: float = 1e-9,
    gamma_max: float = 1e15,
) -> float:
    """Largest ``gamma`` whose per-instance epsilon is within ``target.epsilon``.

    Bisection keeps the lower end feasible, so the returned value always
    satisfies the forward check.  ``gamma_max`` caps the search when the
    Lipschitz constant is zero.
    """
    f = lambda g: per_instance_eps(stats, x_bound, lam, g, target.delta)
    if f(0.0) >= target.epsilon:
        raise InfeasibleCalibrationError(
            f"no gamma > 0 reaches epsilon {target.epsilon} at lambda={lam} (floor {f(0.0):.6g})"
        )
    lo, hi = 0.0, 1.0
    while f(hi) <= target.epsilon:
        lo, hi = hi, 2.0 * hi
        if hi > gamma_max:
            return gamma_max
    while hi - lo > rtol * max(lo, 1e-300):
        mid = 0.5 * (lo + hi)
        if f(mid) <= target.epsilon:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise InfeasibleCalibrationError(f"feasible gamma at lambda={lam} is below floating-point resolution")
    return lo


def sample_posterior(data: RegressionDataset, lam: float, gamma: float, rng: RandomSource, size=None):
    """Draw from ``N(theta*, (gamma (X^T X + lambda I))^-1)``; ``size`` adds a leading axis."""
    if not (gamma > 0):
        raise DomainError("gamma must be positive")
    a = _gram(data, lam)
    c = _factor(a)
    theta = linalg.cho_solve(c, data.X.T @ data.y, check_finite=False)
    if math.isinf(gamma):
        return theta if size is None else np.tile(theta, (size, 1))
    m = 1 if size is None else int(size)
    z = sample_noise("gaussian", 1.0, rng, size=(data.d, m))
    low = np.tril(c[0])
    draws = theta[:, None] + linalg.solve_triangular(low.T, z, lower=False) / math.sqrt(gamma)
    return draws[:, 0] if size is None else draws.T


def output_perturbation_sigma(data: RegressionDataset, lam: float, budget: PrivacyBudget) -> float:
    """Gaussian noise scale for ridge output perturbation."""
    if not (lam > 0):
        raise DomainError("output perturbation needs lambda > 0")
    if not (budget.epsilon > 0 and budget.delta > 0):
        raise DomainError("output perturbation needs epsilon > 0 and delta > 0")
    x, y = data.x_bound, data.y_bound
    sens = 2.0 * x * (y + x * (x * y / lam)) / lam
    return sens * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def output_perturbation_baseline(data: RegressionDataset, lam: float, budget: PrivacyBudget, rng: RandomSource):
    sigma = output_perturbation_sigma(data, lam, budget)
    theta = ridge_solve(data, lam)
    if math.isinf(budget.epsilon):
        return theta
    return theta + sample_noise("gaussian", sigma, rng, size=data.d)


@dataclass
class OpsRelease:
    theta: np.ndarray
    lam: float
    gamma: float
    lambda_min_tilde: float
    lipschitz_tilde: float
    budget: PrivacyBudget
    meta: dict = field(default_factory=dict)


def ops_ptr_budget(eps: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(eps, 2.0 * delta)


def ops_ptr_pipeline(data: RegressionDataset, lam: float, eps: float, delta: float, rng: RandomSource) -> OpsRelease:
    """Release ``lambda_min``, then ``L``, calibrate ``gamma`` and draw one posterior sample.

    Substreams: 0 for ``lambda_min``, 1 for ``L``, 2 for the sample.  Raises
    :class:`InfeasibleCalibrationError` when no ``gamma`` fits ``(eps/2, delta/3)``.
    """
    if data.x_bound > 1.0 + _NORM_SLACK:
        raise DomainError("the pipeline assumes x_bound <= 1")
    if not (eps > 0):
        raise DomainError("eps must be positive")
    if not (0.0 < delta < 0.5):
        raise DomainError("delta must be in (0, 1/2)")
    budget = ops_ptr_budget(eps, delta)
    lam_min = gram_min_eig(data)
    lam_tilde = release_lambda_min(lam_min, eps, delta, rng.substream(0))
    theta_hat = ridge_solve(data, lam)
    l_tilde, big_delta = release_lipschitz(
        data, float(np.linalg.norm(theta_hat)), lam_tilde, lam, eps, delta, rng.substream(1)
    )
    if lam + lam_tilde <= 0:
        raise InfeasibleCalibrationError("lambda + released lambda_min is zero")
    if not math.isfinite(l_tilde):
        raise InfeasibleCalibrationError(f"released Lipschitz bound overflows at lambda={lam}")
    norm_tilde = max((l_tilde / data.x_bound - data.y_bound) / data.x_bound, 0.0)
    released = SufficientStats(lam_tilde, norm_tilde, l_tilde)
    gamma = calibrate_gamma(released, data.x_bound, lam, PrivacyBudget(eps / 2.0, delta / 3.0))
    theta = sample_posterior(data, lam, gamma, rng.substream(2))
    return OpsRelease(theta, lam, gamma, lam_tilde, l_tilde, budget, {"log_lipschitz_shifted": big_delta})


def ops_fixed(data: RegressionDataset, lam: float, eps: float, delta: float, rng: RandomSource) -> OpsRelease:
    """Non-adaptive OPS: ``gamma`` calibrated to worst-case statistics.

    Uses ``lambda_min = 0`` and ``|theta*| <= y_bound sqrt(n / lambda)``,
    which holds for every dataset of ``n`` rows, so no statistic is released
    and the sample is ``(eps, delta)``-DP.
    """
    if not (lam > 0):
        raise DomainError("lambda must be positive")
    norm_cap = data.y_bound * math.sqrt(data.n / lam)
    worst = SufficientStats(0.0, norm_cap, data.x_bound * (data.x_bound * norm_cap + data.y_bound))
    gamma = calibrate_gamma(worst, data.x_bound, lam, PrivacyBudget(eps, delta))
    theta = sample_posterior(data, lam, gamma, rng)
    return OpsRelease(theta, lam, gamma, 0.0, worst.lipschitz, PrivacyBudget(eps, delta))


def mse(theta: np.ndarray, data: RegressionDataset) -> float:
    r = data.X @ theta - data.y
    return float(r @ r / data.n)


def ops_ptr_tuned(
    train: RegressionDataset,
    validation: RegressionDataset,
    lambdas,
    eps: float,
    delta: float,
    rng: RandomSource,
    tau: float | None = None,
    cutoff: int | None = None,
) -> TunerResult:
    """Random-stopping search over ``lambdas``, scoring by validation MSE.

    Each trial is one :func:`ops_ptr_pipeline` run at ``(eps, delta)``; a
    trial whose calibration is infeasible counts as Bottom.  The total
    guarantee is ``tuner_budget(eps, 2 delta, cutoff, delta / 2)``.
    """
    lambdas = list(lambdas)
    tau = default_tau(len(lambdas)) if tau is None else tau
    cutoff = default_cutoff(tau, delta / 2.0) if cutoff is None else cutoff

    def runner(lam, sub):
        try:
            return PtrOutcome.release(ops_ptr_pipeline(train, lam, eps, delta, sub))
        except InfeasibleCalibrationError as exc:
            return PtrOutcome.bottom(reason=str(exc))

    return select_hyperparameters(
        lambdas,
        ops_ptr_budget(eps, delta),
        cutoff,
        tau,
        lambda rel: -mse(rel.theta, validation),
        runner,
        rng,
    )
