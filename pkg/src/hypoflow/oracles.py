"""Closed-form references for the quadratic potential U = c + x^2/2.

There the Langevin process is linear: a Gaussian law stays Gaussian with
mean m' = A m and covariance S' = A S + S A^T + 2 D, A = [[0, 1], [-1, -1]],
D = diag(0, 1). The Gibbs measure is the standard normal on R^2, so the
relative entropy of the time-t law is the Gaussian Kullback-Leibler formula.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

DRIFT = np.array([[0.0, 1.0], [-1.0, -1.0]])
NOISE = np.diag([0.0, 1.0])


def gaussian_law(t, mean0, cov0):
    """Mean and covariance at time t, by matrix exponential (mean) and ODE (covariance)."""
    mean0 = np.asarray(mean0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    mean = expm(DRIFT * t) @ mean0
    if t == 0:
        return mean, cov0.copy()

    def rhs(_, s):
        S = s.reshape(2, 2)
        return (DRIFT @ S + S @ DRIFT.T + 2 * NOISE).ravel()

    sol = solve_ivp(rhs, (0.0, t), cov0.ravel(), method="DOP853", rtol=1e-12, atol=1e-14)
    S = sol.y[:, -1].reshape(2, 2)
    return mean, 0.5 * (S + S.T)


def gaussian_relative_entropy(mean, cov):
    """KL(N(mean, cov) || N(0, I)) in dimension 2."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[0]
    return 0.5 * (np.trace(cov) + mean @ mean - k - np.log(np.linalg.det(cov)))


def gaussian_entropy_at(t, mean0=(0.0, 0.0), cov0=((0.25, 0.0), (0.0, 0.25))):
    m, S = gaussian_law(t, mean0, cov0)
    return float(gaussian_relative_entropy(m, S))


def gaussian_density_ratio(X, Y, mean, cov):
    """N(mean, cov) / N(0, I) evaluated on node arrays."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    P = np.linalg.inv(cov)
    dx, dy = X - mean[0], Y - mean[1]
    q = P[0, 0] * dx * dx + 2 * P[0, 1] * dx * dy + P[1, 1] * dy * dy
    return np.exp(-0.5 * q + 0.5 * (X * X + Y * Y)) / np.sqrt(np.linalg.det(cov))
