"""L2-regularised logistic regression by gradient descent with backtracking.

Works on dense arrays and on scipy sparse matrices alike.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

_ARMIJO = 0.5
_SHRINK = 0.5
_GRAD_TOL = 1e-10


def objective(theta: np.ndarray, Z, y: np.ndarray, sw: np.ndarray, l2: float) -> float:
    """Weighted mean log-loss plus (l2/2)*|w|^2; theta = (w..., bias)."""
    w, b = theta[:-1], theta[-1]
    z = Z @ w + b
    losses = np.logaddexp(0.0, z) - y * z
    return float(np.dot(sw, losses) / sw.sum() + 0.5 * l2 * np.dot(w, w))


def gradient(theta: np.ndarray, Z, y: np.ndarray, sw: np.ndarray, l2: float) -> np.ndarray:
    w, b = theta[:-1], theta[-1]
    r = sw * (expit(Z @ w + b) - y) / sw.sum()
    g = np.empty_like(theta)
    g[:-1] = Z.T @ r + l2 * w
    g[-1] = r.sum()
    return g


def fit(Z, y: np.ndarray, sw: np.ndarray, l2: float, iterations: int) -> np.ndarray:
    theta = np.zeros(Z.shape[1] + 1)
    f = objective(theta, Z, y, sw, l2)
    step = 1.0
    for _ in range(iterations):
        g = gradient(theta, Z, y, sw, l2)
        gg = float(np.dot(g, g))
        if gg < _GRAD_TOL**2:
            break
        step = min(step * 2.0, 1e6)
        while True:
            cand = theta - step * g
            fc = objective(cand, Z, y, sw, l2)
            if fc <= f - _ARMIJO * step * gg or step < 1e-12:
                break
            step *= _SHRINK
        if step < 1e-12:
            break
        theta, f = cand, fc
    return theta


def scores(theta: np.ndarray, Z) -> np.ndarray:
    return expit(Z @ theta[:-1] + theta[-1])
