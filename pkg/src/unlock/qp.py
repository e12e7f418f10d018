"""Dense strictly convex QP with identity Hessian.

Solves

    minimise    sum(x**2)
    subject to  E @ x == e
                G @ x >= h

with the dual active-set method of Goldfarb and Idnani. The unconstrained
minimiser ``x = 0`` is dual feasible, so no phase-one problem is needed, and
an inconsistent constraint set is detected when a violated constraint can be
neither reached nor traded against a blocking one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDetected, MaxItersExceeded

_DEP_EPS = 1e-12


@dataclass
class QPResult:
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    active: tuple
    iterations: int

    @property
    def objective(self) -> float:
        return float(self.x @ self.x)


def _unit_rows(A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    norms = np.linalg.norm(A, axis=1) if A.size else np.zeros(len(A))
    safe = np.where(norms > 0, norms, 1.0)
    return A / safe[:, None], b / safe, norms


class _ActiveBasis:
    """Thin QR factorisation ``N = Q R`` of the active constraint normals.

    Appending a normal extends ``Q`` by one re-orthogonalised column and
    ``R^-1`` by one bordered column; removing one refactors from scratch
    (rare, and the sizes are small).
    """

    def __init__(self, n_vars):
        self.n = n_vars
        self.cols = []
        self.Q = np.zeros((n_vars, 0))
        self.Rinv = np.zeros((0, 0))

    def directions(self, n_p):
        """Primal step ``z`` (``n_p`` projected off the active span) and dual step ``r``."""
        if not self.cols:
            return n_p.copy(), np.zeros(0)
        qn = self.Q.T @ n_p
        z = n_p - self.Q @ qn
        return z, self.Rinv @ qn

    def append(self, n_p, z=None):
        k = len(self.cols)
        qn = self.Q.T @ n_p
        if z is None:
            z = n_p - self.Q @ qn
        corr = self.Q.T @ z
        z = z - self.Q @ corr
        qn = qn + corr
        rho = float(np.linalg.norm(z))
        Ri = np.zeros((k + 1, k + 1))
        Ri[:k, :k] = self.Rinv
        Ri[:k, k] = -(self.Rinv @ qn) / rho
        Ri[k, k] = 1.0 / rho
        self.Rinv = Ri
        self.Q = np.column_stack([self.Q, z / rho])
        self.cols.append(n_p)

    def remove(self, idx):
        del self.cols[idx]
        if self.cols:
            self.Q, R = np.linalg.qr(np.column_stack(self.cols))
            self.Rinv = np.linalg.inv(R)
        else:
            self.Q, self.Rinv = np.zeros((self.n, 0)), np.zeros((0, 0))


def qp_solve(eq_rows, eq_rhs, ineq_rows, ineq_rhs, tol: float = 1e-10, max_iters: int = 500,
             n_vars: int | None = None) -> QPResult:
    """Minimum-norm point of a polyhedron.

    Rows are normalised internally, so ``tol`` is a residual in units of the
    constraint value per unit row norm. Raises :class:`InfeasibleDetected`
    when the constraints are inconsistent and :class:`MaxItersExceeded` when
    the active-set loop does not settle.
    """
    E = np.asarray(eq_rows, dtype=float)
    G = np.asarray(ineq_rows, dtype=float)
    if n_vars is None:
        n_vars = E.shape[1] if E.size else (G.shape[1] if G.size else 0)
    E = E.reshape(-1, n_vars)
    G = G.reshape(-1, n_vars)
    En, en, enorm = _unit_rows(E, np.asarray(eq_rhs, dtype=float).reshape(-1))
    Gn, hn, gnorm = _unit_rows(G, np.asarray(ineq_rhs, dtype=float).reshape(-1))
    me, mi = len(En), len(Gn)

    x = np.zeros(n_vars)
    act = []          # constraint ids: k < me equality, me + j inequality j
    u = np.zeros(0)   # multipliers of `act`
    iters = 0

    basis = _ActiveBasis(n_vars)

    for k in range(me):
        if enorm[k] == 0.0:
            if abs(en[k]) > tol:
                raise InfeasibleDetected(f"equality {k} has a zero row and nonzero right-hand side")
            continue
        n_p = En[k]
        z, r = basis.directions(n_p)
        resid = en[k] - n_p @ x
        if np.linalg.norm(z) <= _DEP_EPS:
            if abs(resid) > tol:
                raise InfeasibleDetected(f"equality {k} contradicts earlier equalities")
            continue
        t = resid / (z @ n_p)
        x = x + t * z
        u = np.append(u - t * r, t)
        act.append(k)
        basis.append(n_p, z)

    while True:
        if mi == 0:
            break
        slack = Gn @ x - hn
        worst = float(slack.min())
        if worst >= -tol:
            break
        p = int(np.argmin(slack))  # most violated, lowest index on ties
        n_p = Gn[p]
        u_p = 0.0
        while True:
            iters += 1
            if iters > max_iters:
                raise MaxItersExceeded(f"QP active set did not settle within {max_iters} iterations")
            z, r = basis.directions(n_p)
            s_p = n_p @ x - hn[p]
            zn = z @ n_p
            # zn is |z|^2, so the dependence test has to be on |z| alone
            t2 = -s_p / zn if np.linalg.norm(z) > _DEP_EPS and zn > 0.0 else np.inf
            t1, block = np.inf, -1
            for idx, cid in enumerate(act):
                if cid >= me and r[idx] > _DEP_EPS:
                    ratio = u[idx] / r[idx]
                    if ratio < t1:
                        t1, block = ratio, idx
            t = min(t1, t2)
            if not np.isfinite(t):
                raise InfeasibleDetected(f"inequality {p} cannot be satisfied together with the active set")
            if np.isfinite(t2):
                x = x + t * z
            u = u - t * r
            u_p += t
            if t2 <= t1:
                act.append(me + p)
                u = np.append(u, u_p)
                basis.append(n_p, z)
                break
            del act[block]
            u = np.delete(u, block)
            basis.remove(block)

    mu = np.zeros(me)
    lam = np.zeros(mi)
    for cid, val in zip(act, u):
        if cid < me:
            mu[cid] = val / enorm[cid]
        else:
            lam[cid - me] = max(val, 0.0) / gnorm[cid - me]
    active = tuple(sorted(cid - me for cid in act if cid >= me))
    return QPResult(x, mu, lam, active, iters)


def kkt_residual(res: QPResult, eq_rows, eq_rhs, ineq_rows, ineq_rhs) -> float:
    """Max of stationarity, primal infeasibility, negative multipliers and complementarity.

    Stationarity is measured for the objective ``0.5 * |x|^2`` (the
    multipliers returned by :func:`qp_solve` use that scaling).
    """
    n = len(res.x)
    E = np.asarray(eq_rows, dtype=float).reshape(-1, n)
    G = np.asarray(ineq_rows, dtype=float).reshape(-1, n)
    e = np.asarray(eq_rhs, dtype=float).reshape(-1)
    h = np.asarray(ineq_rhs, dtype=float).reshape(-1)
    grad = res.x - E.T @ res.eq_multipliers - G.T @ res.ineq_multipliers
    parts = [np.abs(grad).max(initial=0.0)]
    if len(e):
        parts.append(np.abs(E @ res.x - e).max())
    if len(h):
        slack = G @ res.x - h
        parts.append(max(0.0, -slack.min()))
        parts.append(max(0.0, -res.ineq_multipliers.min()))
        parts.append(np.abs(res.ineq_multipliers * slack).max())
    return float(max(parts))
