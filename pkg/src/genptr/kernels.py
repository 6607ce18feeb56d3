"""Hot numeric kernels.

Everything here is written in the subset of Python that numba compiles in
nopython mode, so the same source serves both the JIT path and the plain
numpy fallback (``GENPTR_DISABLE_NUMBA=1``).  Keep these functions free of
Python objects beyond scalars and ndarrays.
"""

import math

import numpy as np

from ._accel import njit

_SQRT_PI = math.sqrt(math.pi)


# --- Laplace-difference tail -------------------------------------------------

@njit
def lap_diff_tail_scalar(z):
    if z >= 0.0:
        return (2.0 + z) * math.exp(-z) / 4.0
    return 1.0 - (2.0 - z) * math.exp(z) / 4.0


@njit
def lap_diff_tail_array(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = lap_diff_tail_scalar(z[i])
    return out


@njit
def laplace_from_uniform(u, scale):
    v = u - 0.5
    if v >= 0.0:
        return -scale * math.log1p(-2.0 * v)
    return scale * math.log1p(2.0 * v)


@njit
def count_noisy_wins(n0, n1, scale, u0, u1):
    """How often ``n0 + Lap(scale) > n1 + Lap(scale)`` given paired uniforms."""
    wins = 0
    for i in range(u0.shape[0]):
        if n0 + laplace_from_uniform(u0[i], scale) > n1 + laplace_from_uniform(u1[i], scale):
            wins += 1
    return wins


# --- GNMax data-dependent RDP ------------------------------------------------

@njit
def log_half_erfc(x):
    """``log(erfc(x) / 2)``, accurate far into the upper tail."""
    if x < 25.0:
        return math.log(0.5 * math.erfc(x))
    x2 = x * x
    series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2)
    return -x2 - math.log(2.0 * x * _SQRT_PI) + math.log(series)


@njit
def log1mexp(x):
    """``log(1 - exp(x))`` for ``x < 0``."""
    if x < -0.6931471805599453:
        return math.log1p(-math.exp(x))
    return math.log(-math.expm1(x))


@njit
def logq_gnmax(counts, sigma):
    """Log of the union bound on ``Pr[noisy argmax != argmax]``, clamped at 0.

    Each pairwise difference ``n_j - n_top`` of Gaussian-perturbed counts has
    standard deviation ``sigma * sqrt(2)``; ``Pr[diff > 0]`` is
    ``erfc(gap / (2 sigma)) / 2``.
    """
    top = 0
    for j in range(counts.shape[0]):
        if counts[j] > counts[top]:
            top = j
    acc = -np.inf
    for j in range(counts.shape[0]):
        if j == top:
            continue
        t = log_half_erfc((counts[top] - counts[j]) / (2.0 * sigma))
        if acc == -np.inf:
            acc = t
        elif t > acc:
            acc = t + math.log1p(math.exp(acc - t))
        else:
            acc = acc + math.log1p(math.exp(t - acc))
    if acc > 0.0:
        return 0.0
    return acc


@njit
def rdp_gnmax_from_logq(logq, sigma, alpha, eps2_sigma):
    """Per-query data-dependent RDP of GNMax at order ``alpha``.

    Uses the data-dependent bound when its preconditions hold, else the
    data-independent ``alpha / sigma^2``; never exceeds the latter.
    ``eps2_sigma`` is the noise scale entering ``eps2 = mu2 / eps2_sigma^2``.
    """
    cap = alpha / (sigma * sigma)
    if logq == -np.inf:
        return 0.0
    if logq >= 0.0:
        return cap
    mu2 = sigma * math.sqrt(-logq)
    mu1 = mu2 + 1.0
    if not (mu1 >= alpha and mu2 > 1.0):
        return cap
    eps1 = mu1 / (sigma * sigma)
    eps2 = mu2 / (eps2_sigma * eps2_sigma)
    log_qmax = (mu2 - 1.0) * eps2 - mu2 * (math.log(mu1 / (mu1 - 1.0)) + math.log(mu2 / (mu2 - 1.0)))
    if not (logq <= log_qmax and -logq > eps2):
        return cap
    log1q = log1mexp(logq)
    log_a = (alpha - 1.0) * (log1q - log1mexp((logq + eps2) * (1.0 - 1.0 / mu2)))
    log_b = (alpha - 1.0) * (eps1 - logq / (mu1 - 1.0))
    x = log1q + log_a
    y = logq + log_b
    if x > y:
        log_s = x + math.log1p(math.exp(y - x))
    else:
        log_s = y + math.log1p(math.exp(x - y))
    val = log_s / (alpha - 1.0)
    if val < 0.0:
        val = 0.0
    if val > cap:
        return cap
    return val


@njit
def rdp_gnmax_rows(counts2d, sigma, alpha, eps2_sigma):
    out = np.empty(counts2d.shape[0])
    for i in range(counts2d.shape[0]):
        out[i] = rdp_gnmax_from_logq(logq_gnmax(counts2d[i], sigma), sigma, alpha, eps2_sigma)
    return out


# --- smallest eigenvalue -----------------------------------------------------

@njit
def _cholesky_lower(a):
    n = a.shape[0]
    low = np.zeros((n, n))
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= low[j, k] * low[j, k]
        if s <= 0.0:
            return low, False
        low[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= low[i, k] * low[j, k]
            low[i, j] = t / low[j, j]
    return low, True


@njit
def _cho_solve(low, b):
    n = low.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= low[i, k] * y[k]
        y[i] = s / low[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= low[k, i] * x[k]
        x[i] = s / low[i, i]
    return x


@njit
def inverse_power_min_eig(h, shift, tol, max_iter, v0):
    """Smallest eigenvalue of symmetric PSD ``h`` by inverse iteration on ``h + shift*I``.

    Returns ``(rayleigh_quotient, residual_norm, iterations, status)`` where
    status is 0 on convergence, 1 if the shifted matrix is not PD and 2 if
    ``max_iter`` was exhausted.
    """
    n = h.shape[0]
    m = h.copy()
    for i in range(n):
        m[i, i] += shift
    low, ok = _cholesky_lower(m)
    if not ok:
        return np.nan, np.inf, 0, 1
    v = v0 / np.linalg.norm(v0)
    rho = 0.0
    res = np.inf
    for it in range(1, max_iter + 1):
        w = _cho_solve(low, v)
        v = w / np.linalg.norm(w)
        hv = h @ v
        rho = v @ hv
        res = np.linalg.norm(hv - rho * v)
        # |rho - lambda_min| <= res for symmetric h, so res bounds the error.
        if res <= tol:
            return rho, res, it, 0
    return rho, res, max_iter, 2


# --- logistic regression -----------------------------------------------------

@njit
def logistic_terms(u):
    """``l, l', l'', l'''`` of ``l(u) = log(1 + exp(-u))``, elementwise."""
    n = u.shape[0]
    out = np.empty((4, n))
    for i in range(n):
        x = u[i]
        if x >= 0.0:
            e = math.exp(-x)
            loss = math.log1p(e)
            s = e / (1.0 + e)  # sigmoid(-x)
            p = 1.0 / (1.0 + e)  # sigmoid(x)
        else:
            e = math.exp(x)
            loss = -x + math.log1p(e)
            s = 1.0 / (1.0 + e)
            p = e / (1.0 + e)
        out[0, i] = loss
        out[1, i] = -s
        out[2, i] = s * p
        out[3, i] = s * p * (s - p)
    return out


@njit
def logistic_grad_hess(x, y, theta):
    """Gradient and Hessian of ``sum_i log(1 + exp(-y_i x_i^T theta))``."""
    n, d = x.shape
    u = (x @ theta) * y
    t = logistic_terms(u)
    grad = np.zeros(d)
    hess = np.zeros((d, d))
    loss = 0.0
    for i in range(n):
        loss += t[0, i]
        g = t[1, i] * y[i]
        w = t[2, i]
        for a in range(d):
            grad[a] += g * x[i, a]
            xa = w * x[i, a]
            for b in range(a, d):
                hess[a, b] += xa * x[i, b]
    for a in range(d):
        for b in range(a):
            hess[a, b] = hess[b, a]
    return loss, grad, hess
