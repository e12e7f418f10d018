"""Small dense two-phase simplex solver.

Solves ``min c @ x`` subject to ``A @ x = b, x >= 0`` on a full tableau with
Bland's rule, which is plenty for the few hundred columns the stress
feasibility problems produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPSolverError

PIVOT_TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray
    objective: float
    phase1_objective: float
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    piv = T[row]
    for r in range(T.shape[0]):
        if r != row:
            f = T[r, col]
            if f != 0.0:
                T[r] -= f * piv


def _run(T, basis, n_cols, max_iters, tol):
    """Minimise the objective stored in the last row of ``T`` over the first ``n_cols`` columns."""
    it = 0
    m = T.shape[0] - 1
    while True:
        reduced = T[-1, :n_cols]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return "optimal", it
        col = int(entering[0])
        column = T[:m, col]
        pos = column > tol
        if not np.any(pos):
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        # Bland: among ties, leave with the smallest basic variable index
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iters:
            raise LPSolverError(f"simplex exceeded {max_iters} pivots")


def simplex(c, A_eq, b_eq, tol: float = PIVOT_TOL, max_iters: int = 10_000) -> LPResult:
    """Two-phase simplex for a standard-form LP.

    Phase I minimises the sum of one artificial per row; a positive optimum
    (beyond ``tol``) is reported as ``status == "infeasible"``.
    """
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LPSolverError("non-finite LP data")
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # tableau: [A | I | b] with the phase I objective row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    status, it1 = _run(T, basis, n + m, max_iters, tol)
    if status != "optimal":
        raise LPSolverError("phase I reported unbounded, which cannot happen for a consistent tableau")
    phase1 = -T[-1, -1]
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if phase1 > tol * scale:
        x = _extract(T, basis, n)
        return LPResult("infeasible", x, float("nan"), float(phase1), it1)

    # drive artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= n:
            row = T[r, :n]
            nz = np.flatnonzero(np.abs(row) > tol)
            if nz.size:
                col = int(nz[0])
                _pivot(T, r, col)
                basis[r] = col

    # phase II: artificial columns are frozen out
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m):
        if basis[r] < n:
            T[-1] -= c[basis[r]] * T[r]
    T[:, n:n + m] = 0.0
    for r in range(m):
        if basis[r] >= n:
            T[r, basis[r]] = 1.0
    status, it2 = _run(T, basis, n, max_iters, tol)
    x = _extract(T, basis, n)
    if status == "unbounded":
        return LPResult("unbounded", x, float("-inf"), float(phase1), it1 + it2)
    return LPResult("optimal", x, float(c @ x), float(phase1), it1 + it2)


def _extract(T, basis, n):
    x = np.zeros(n)
    for r, j in enumerate(basis):
        if j < n:
            x[j] = T[r, -1]
    return np.maximum(x, 0.0)
