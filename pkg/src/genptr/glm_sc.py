"""Self-concordant GLM (logistic regression) released by Hessian-shaped output perturbation.

Loss per datum is ``l(u) = log(1 + exp(-u))`` on the margin ``u = y x^T theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from . import kernels
from .errors import DomainError, InfeasibleCalibrationError, NumericalError
from .mech_core import PrivacyBudget, RandomSource, sample_noise
from .ptr_engine import PtrOutcome, TunerResult, default_cutoff, default_tau, select_hyperparameters

__all__ = [
    "GlmDataset",
    "SelfConcordanceParams",
    "LOGISTIC",
    "GlmRelease",
    "logistic_derivatives",
    "objective",
    "fit_regularized",
    "loss_hessian",
    "hessian_min_eig",
    "lambda_min_global_sensitivity",
    "release_lambda_min_glm",
    "glm_data_dep_dp",
    "calibrate_gamma_glm",
    "sample_perturbed",
    "glm_ptr_candidate",
    "glm_ptr_budget",
    "glm_ptr_pipeline",
    "default_lambda_grid",
    "accuracy",
]


@dataclass(frozen=True)
class GlmDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if y.shape[0] != X.shape[0] or X.shape[0] < 1:
            raise DomainError("X and y must have the same nonzero number of rows")
        if not np.all(np.abs(y) == 1.0):
            raise DomainError("labels must be exactly -1 or +1")
        if np.linalg.norm(X, axis=1).max() > 1.0 + 1e-12:
            raise DomainError("every row must have norm <= 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SelfConcordanceParams:
    R: float
    L: float
    beta_smooth: float

    def __post_init__(self):
        if min(self.R, self.L, self.beta_smooth) < 0:
            raise DomainError("self-concordance constants must be >= 0")


LOGISTIC = SelfConcordanceParams(R=1.0, L=1.0, beta_smooth=0.25)


def logistic_derivatives(u):
    """``(l, l', l'', l''')`` at margin(s) ``u``; scalars in, scalars out."""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    out = kernels.logistic_terms(arr.ravel())
    if np.ndim(u) == 0:
        return tuple(float(v) for v in out[:, 0])
    return tuple(out[k].reshape(arr.shape) for k in range(4))


def objective(data: GlmDataset, theta, lam: float) -> float:
    u = data.y * (data.X @ theta)
    return float(kernels.logistic_terms(u)[0].sum() + 0.5 * lam * theta @ theta)


def _grad_hess(data: GlmDataset, theta):
    return kernels.logistic_grad_hess(data.X, data.y, np.ascontiguousarray(theta, dtype=float))


def loss_hessian(data: GlmDataset, theta) -> np.ndarray:
    """``sum_i l''(u_i) x_i x_i^T`` (no regularizer)."""
    return _grad_hess(data, theta)[2]


def fit_regularized(data: GlmDataset, lam: float, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Newton's method with halving backtracking on ``F(theta) + lam |theta|^2 / 2``."""
    if not (lam > 0):
        raise DomainError("lambda must be positive")
    theta = np.zeros(data.d)
    f = objective(data, theta, lam)
    for _ in range(max_iter):
        _, g, h = _grad_hess(data, theta)
        g = g + lam * theta
        if np.linalg.norm(g) <= tol:
            return theta
        h[np.diag_indices_from(h)] += lam
        step = linalg.solve(h, g, assume_a="pos", check_finite=False)
        t = 1.0
        while True:
            cand = theta - t * step
            fc = objective(data, cand, lam)
            # Near the optimum the decrease is below round-off; allow that much slack.
            if fc <= f + 1e-12 * abs(f) or t < 1e-12:
                break
            t *= 0.5
        theta, f = cand, fc
    _, g, _ = _grad_hess(data, theta)
    if np.linalg.norm(g + lam * theta) <= tol:
        return theta
    raise NumericalError(f"Newton did not reach gradient norm {tol} in {max_iter} iterations")


def hessian_min_eig(data_or_hessian, theta=None, tol: float = 1e-8, max_iter: int = 20000) -> float:
    """Smallest eigenvalue of the loss Hessian at ``theta`` by shifted inverse iteration.

    Accepts either a dataset plus ``theta`` or a symmetric PSD matrix.
    """
    if isinstance(data_or_hessian, GlmDataset):
        h = loss_hessian(data_or_hessian, theta)
    else:
        h = np.asarray(data_or_hessian, dtype=float)
    d = h.shape[0]
    scale = max(float(np.trace(h)) / d, 1.0)
    shift = 1e-9 * scale
    v0 = np.linspace(1.0, 2.0, d)
    rho, res, _, status = kernels.inverse_power_min_eig(h, shift, tol, max_iter, v0)
    if status == 1:
        raise NumericalError("Hessian is not positive semidefinite")
    if status == 2:
        raise NumericalError(f"inverse iteration stalled with residual {res:.3g}")
    return max(float(rho), 0.0)


def lambda_min_global_sensitivity(params: SelfConcordanceParams) -> float:
    """Global sensitivity of ``lambda_min`` of the Hessian at the regularized optimum (needs ``lambda >= R L``)."""
    return 2.0 * params.R * params.L + params.beta_smooth


def release_lambda_min_glm(lambda_min: float, gs: float, eps: float, delta: float, rng: RandomSource) -> float:
    """Private lower bound on the Hessian's smallest eigenvalue at budget ``(eps/2, delta/2)``."""
    if not (eps > 0):
        raise DomainError("eps must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must be in (0, 1)")
    if math.isinf(eps):
        return float(lambda_min)
    half = eps / 2.0
    log4 = math.log(4.0 / delta)
    z = sample_noise("gaussian", 1.0, rng)
    noise = math.sqrt(log4) / half * gs * z
    shift = math.sqrt(2.0 * log4 * math.log(1.0 / delta)) * gs / half
    return max(lambda_min + noise - shift, 0.0)


def _eps_terms(params: SelfConcordanceParams, alpha_sc: float, delta: float):
    """``eps(gamma) = a + b gamma + c sqrt(gamma)``."""
    if not (alpha_sc > 0):
        raise DomainError("local strong convexity must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must be in (0, 1)")
    log2d = math.log(2.0 / delta)
    l2 = params.L**2
    a = params.R * (params.L + params.beta_smooth) / alpha_sc * (1.0 + log2d)
    return a, l2 / alpha_sc, math.sqrt(l2 / alpha_sc * log2d)


def glm_data_dep_dp(params: SelfConcordanceParams, alpha_sc: float, gamma: float, delta: float) -> float:
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    a, b, c = _eps_terms(params, alpha_sc, delta)
    return a + b * gamma + c * math.sqrt(gamma)


def calibrate_gamma_glm(
    params: SelfConcordanceParams, alpha_sc: float, target: PrivacyBudget, gamma_max: float = 1e15
) -> float:
    """Largest ``gamma`` with ``glm_data_dep_dp <= target.epsilon``; positive root in ``sqrt(gamma)``."""
    a, b, c = _eps_terms(params, alpha_sc, target.delta)
    slack = target.epsilon - a
    if slack <= 0:
        raise InfeasibleCalibrationError(
            f"epsilon {target.epsilon} is below the gamma-free floor {a:.6g} at strong convexity {alpha_sc:.6g}"
        )
    if b == 0.0:
        return gamma_max if c == 0.0 else min((slack / c) ** 2, gamma_max)
    # Rationalised root avoids cancellation when 4 b slack << c^2.
    r = 2.0 * slack / (c + math.sqrt(c * c + 4.0 * b * slack))
    gamma = min(r * r, gamma_max)
    while glm_data_dep_dp(params, alpha_sc, gamma, target.delta) > target.epsilon:
        gamma = np.nextafter(gamma, 0.0)
    return float(gamma)


def sample_perturbed(data: GlmDataset, theta_star, lam: float, gamma: float, rng: RandomSource, size=None):
    """``theta* + N(0, (gamma (H(theta*) + lam I))^-1)``."""
    if not (gamma > 0):
        raise DomainError("gamma must be positive")
    h = loss_hessian(data, theta_star)
    h[np.diag_indices_from(h)] += lam
    try:
        low = linalg.cholesky(h, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("regularized Hessian is not positive definite") from exc
    m = 1 if size is None else int(size)
    z = sample_noise("gaussian", 1.0, rng, size=(data.d, m))
    draws = theta_star[:, None] + linalg.solve_triangular(low.T, z, lower=False) / math.sqrt(gamma)
    return draws[:, 0] if size is None else draws.T


@dataclass
class GlmRelease:
    theta: np.ndarray
    lam: float
    gamma: float
    lambda_min_p: float
    budget: PrivacyBudget
    meta: dict = field(default_factory=dict)


def glm_ptr_budget(eps: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(eps, 2.0 * delta)


def glm_ptr_candidate(
    data: GlmDataset,
    lam: float,
    eps: float,
    delta: float,
    rng: RandomSource,
    params: SelfConcordanceParams = LOGISTIC,
) -> GlmRelease:
    """One grid point: fit, release ``lambda_min`` (substream 0), calibrate and sample (substream 1)."""
    if lam < params.R * params.L:
        raise DomainError(f"lambda={lam} is below R*L={params.R * params.L}")
    theta_star = fit_regularized(data, lam)
    lam_min = hessian_min_eig(data, theta_star)
    lam_min_p = release_lambda_min_glm(lam_min, lambda_min_global_sensitivity(params), eps, delta, rng.substream(0))
    alpha_sc = lam_min_p + lam
    gamma = calibrate_gamma_glm(params, alpha_sc, PrivacyBudget(eps / 2.0, delta / 2.0))
    theta = sample_perturbed(data, theta_star, lam, gamma, rng.substream(1))
    return GlmRelease(theta, lam, gamma, lam_min_p, glm_ptr_budget(eps, delta), {"alpha_sc": alpha_sc})


def default_lambda_grid(params: SelfConcordanceParams = LOGISTIC):
    return [float(2**k) for k in range(1, 11) if 2**k >= params.R * params.L]


def accuracy(theta, data: GlmDataset) -> float:
    return float(np.mean(np.where(data.X @ theta >= 0.0, 1.0, -1.0) == data.y))


def glm_ptr_pipeline(
    data: GlmDataset,
    lambda_grid,
    eps: float,
    delta: float,
    scorer: Callable[[np.ndarray], float],
    rng: RandomSource,
    params: SelfConcordanceParams = LOGISTIC,
    tau: float | None = None,
    cutoff: int | None = None,
) -> TunerResult:
    """Random-stopping search over ``lambda_grid``; each trial is ``(eps, 2 delta)``-DP."""
    grid = list(lambda_grid)
    if not grid:
        raise DomainError("lambda grid is empty")
    low = [lam for lam in grid if lam < params.R * params.L]
    if low:
        raise DomainError(f"grid values {low} are below R*L={params.R * params.L}")
    tau = default_tau(len(grid)) if tau is None else tau
    cutoff = default_cutoff(tau, delta / 2.0) if cutoff is None else cutoff

    def runner(lam, sub):
        try:
            return PtrOutcome.release(glm_ptr_candidate(data, lam, eps, delta, sub, params))
        except InfeasibleCalibrationError as exc:
            return PtrOutcome.bottom(reason=str(exc))

    return select_hyperparameters(
        grid, glm_ptr_budget(eps, delta), cutoff, tau, lambda rel: scorer(rel.theta), runner, rng
    )
