"""Soft-margin kernel SVM trained by sequential minimal optimization.

The solver works on the dual

    min_a  0.5 a^T Q a - sum(a)    s.t.  0 <= a_i <= C,  sum(y_i a_i) = 0

with ``Q_ij = y_i y_j K(x_i, x_j)``.  Each step picks the maximal-violating
index ``i`` and, among partners ``j``, the one with the largest second-order
decrease of the objective; both moves keep the equality constraint exact.
Iteration stops when the KKT gap ``m(a) - M(a)`` drops below ``tol``, which
bounds every training point's KKT residual by ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)`` for every row pair."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class ConvergenceError(RuntimeError):
    pass


@dataclass
class BinarySolution:
    alpha: np.ndarray
    bias: float
    gradient: np.ndarray
    n_iter: int
    gap: float


def _violators(alpha, y, G, C):
    minus_yg = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return minus_yg, up, low


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
        max_iter: int | None = None) -> BinarySolution:
    """Solve one binary machine given its kernel matrix and +/-1 labels."""
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("binary labels must be +1/-1")
    if max_iter is None:
        max_iter = max(100_000, 1000 * n)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while True:
        minus_yg, up, low = _violators(alpha, y, G, C)
        if not up.any() or not low.any():
            gap = 0.0
        else:
            cand = np.where(up, minus_yg, -np.inf)
            i = int(np.argmax(cand))
            m = cand[i]
            M = float(np.min(np.where(low, minus_yg, np.inf)))
            gap = m - M
        if gap < tol:
            # refresh the incrementally updated gradient before trusting the gap
            G_exact = (y[:, None] * y[None, :] * K) @ alpha - 1.0
            drift = np.max(np.abs(G_exact - G))
            G = G_exact
            if drift < 1e-3 * tol:
                break
            continue
        if it >= max_iter:
            raise ConvergenceError(f"SMO did not reach gap {tol} in {max_iter} iterations "
                                   f"(gap {gap:.3g})")

        # second-order choice of the partner j among lower-set violators
        b = m - minus_yg
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, _TAU)
        score = np.where(low & (minus_yg < m), -(b * b) / a, np.inf)
        j = int(np.argmin(score))

        delta = b[j] / a[j]
        # clip so both variables stay inside [0, C]
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        delta = min(delta, lim_i, lim_j)

        ai = alpha[i] + y[i] * delta
        aj = alpha[j] - y[j] * delta
        if delta == lim_i:
            ai = C if y[i] > 0 else 0.0
        if delta == lim_j:
            aj = 0.0 if y[j] > 0 else C
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += y * (y[i] * d_i * K[:, i] + y[j] * d_j * K[:, j])
        it += 1

    bias = _bias(alpha, y, G, C)
    return BinarySolution(alpha, bias, G, it, gap)


def _bias(alpha, y, G, C) -> float:
    minus_yg, up, low = _violators(alpha, y, G, C)
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(minus_yg[free]))
    hi = np.max(minus_yg[up]) if up.any() else np.min(minus_yg[low])
    lo = np.min(minus_yg[low]) if low.any() else hi
    return float((hi + lo) / 2)


def kkt_residuals(alpha: np.ndarray, y: np.ndarray, decision: np.ndarray, C: float) -> np.ndarray:
    """Per-point violation of the soft-margin KKT conditions.

    ``decision`` holds ``f(x_i)`` including the bias.  Points at the lower
    bound need ``y f >= 1``, points at ``C`` need ``y f <= 1`` and free ones
    need ``y f == 1``.
    """
    margin = y * decision - 1.0
    res = np.abs(margin)
    res = np.where(alpha <= 0, np.maximum(0.0, -margin), res)
    res = np.where(alpha >= C, np.maximum(0.0, margin), res)
    return res
