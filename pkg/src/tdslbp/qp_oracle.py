"""Brute-force reference solver for the ball dual, for small m only.

Every assignment of each coefficient to {lower bound, upper bound, free} is
tried; the free block is solved exactly from its equality-constrained KKT
system using the plain Gram matrix. The feasible candidate with the lowest
objective is the global optimum, since the problem is convex. Cost is
3**m linear solves, so keep m <= 8.
"""

from __future__ import annotations

import itertools

import numpy as np


def dual_objective(K: np.ndarray, alpha: np.ndarray) -> float:
    return float(alpha @ K @ alpha - alpha @ np.diag(K))


def solve_by_enumeration(K: np.ndarray, upper: float, feas_tol: float = 1e-12):
    """Return ``(alpha, objective)`` minimizing the dual over ``0 <= a <= upper, sum a = 1``."""
    K = np.asarray(K, dtype=np.float64)
    m = K.shape[0]
    if m > 10:
        raise ValueError("enumeration oracle is exponential; use m <= 10")
    diag = np.diag(K)
    best_alpha, best_obj = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=m):
        pattern = np.array(pattern)
        at_upper = pattern == 1
        free = pattern == 2
        rest = 1.0 - at_upper.sum() * upper
        if rest < -feas_tol:
            continue
        alpha = np.where(at_upper, upper, 0.0)
        nf = int(free.sum())
        if nf == 0:
            if abs(rest) > feas_tol:
                continue
        else:
            # stationarity of a'Ka - a'diag(K) on the face, plus the sum constraint
            A = np.zeros((nf + 1, nf + 1))
            A[:nf, :nf] = 2.0 * K[np.ix_(free, free)]
            A[:nf, nf] = 1.0
            A[nf, :nf] = 1.0
            b = np.empty(nf + 1)
            b[:nf] = diag[free] - 2.0 * upper * K[np.ix_(free, at_upper)].sum(axis=1)
            b[nf] = rest
            try:
                sol = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                continue
            a_free = sol[:nf]
            if np.any(a_free < -feas_tol) or np.any(a_free > upper + feas_tol):
                continue
            alpha[free] = a_free
        obj = dual_objective(K, alpha)
        if obj < best_obj:
            best_alpha, best_obj = alpha.copy(), obj
    if best_alpha is None:
        raise ValueError("no feasible point found")
    return best_alpha, best_obj
