"""Evaluate every kernel on fixed inputs and save the results; run as a script under either backend."""

import sys

import numpy as np

from genptr import _accel, kernels


def evaluate() -> dict:
    g = np.random.default_rng(11)
    out = {"using_numba": np.array(_accel.USING_NUMBA)}
    z = np.concatenate([np.linspace(-40, 40, 801), g.normal(scale=5, size=200)])
    out["lap_tail"] = kernels.lap_diff_tail_array(z)
    u0, u1 = g.uniform(size=50_000), g.uniform(size=50_000)
    out["wins"] = np.array([kernels.count_noisy_wins(n0, 3.0, 0.7, u0, u1) for n0 in (0.0, 3.0, 5.0)])
    xs = np.concatenate([np.linspace(-3, 40, 300), [24.999, 25.0, 25.001, 100.0, 1e3]])
    out["log_half_erfc"] = np.array([kernels.log_half_erfc(x) for x in xs])
    counts = np.vstack([g.multinomial(400, g.dirichlet(np.ones(4)), size=300), [[400, 0, 0, 0], [100, 100, 100, 100]]]).astype(float)
    for sigma, alpha in ((10.0, 8.0), (40.0, 20.0), (2.0, 3.0)):
        out[f"rdp_{sigma}_{alpha}"] = kernels.rdp_gnmax_rows(counts, sigma, alpha, sigma)
    out["logq"] = np.array([kernels.logq_gnmax(c, 10.0) for c in counts])
    eigs = []
    for d in (2, 5, 12):
        a = g.normal(size=(d + 3, d))
        h = a.T @ a
        rho, res, _, status = kernels.inverse_power_min_eig(h, 1e-9, 1e-12, 10_000, np.linspace(1.0, 2.0, d))
        eigs.append([rho, status])
    out["min_eig"] = np.array(eigs)
    x = g.normal(size=(300, 6))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = np.where(g.uniform(size=300) < 0.5, -1.0, 1.0)
    theta = g.normal(size=6)
    loss, grad, hess = kernels.logistic_grad_hess(x, y, theta)
    out["logistic_loss"] = np.array([loss])
    out["logistic_grad"] = grad
    out["logistic_hess"] = hess
    out["logistic_terms"] = kernels.logistic_terms(np.linspace(-50, 50, 1001))
    return out


if __name__ == "__main__":
    np.savez(sys.argv[1], **evaluate())
