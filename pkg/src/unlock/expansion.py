"""Instantaneous expansive velocities.

The velocity field is the minimum of ``sum |v_i|^2`` subject to

* ``<p_i - p_j, v_i - v_j> == 0`` for every bar, and
* ``<p_i - p_j, v_i - v_j> >= demand(i, j)`` for every strut,

where taut struts demand nothing and ordinary struts demand
``eta * min(1, 1 / length)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleAfterRetries, InfeasibleDetected, MaxItersExceeded, NewtonDidNotConverge, QpDidNotConverge
from .framework import Edge, EdgeKind, Framework, rigidity_matrix
from .geometry import Linkage, coordinate_scale
from .qp import qp_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpansionParams:
    """Knobs of the velocity solver.

    ``eta=None`` means ``0.1 * shortest bar``. ``barrier_weight > 0`` only
    matters for :func:`expansive_velocity_barrier`.
    """

    eta: Optional[float] = None
    barrier_weight: float = 0.0
    qp_tol: float = 1e-10
    max_qp_iters: int = 1000
    max_eta_retries: int = 20

    def __post_init__(self):
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.qp_tol > 0:
            raise ValueError("qp_tol must be positive")
        if self.max_qp_iters < 1:
            raise ValueError("max_qp_iters must be at least 1")
        if self.barrier_weight < 0:
            raise ValueError("barrier_weight must be nonnegative")


@dataclass(frozen=True)
class VelocityField:
    v: np.ndarray
    objective_value: float
    active_struts: tuple
    eta: float = 0.0

    @property
    def flat(self) -> np.ndarray:
        return self.v.reshape(-1)


def _positions(config):
    return config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)


def default_eta(config, framework: Framework) -> float:
    P = _positions(config)
    bars = framework.pairs[framework.bar_mask]
    if len(bars) == 0:
        return 0.1
    lengths = np.linalg.norm(P[bars[:, 0]] - P[bars[:, 1]], axis=1)
    return 0.1 * float(lengths.min())


def strut_demand(config, edge: Edge, eta: float) -> float:
    """Right-hand side of a strut's expansion inequality."""
    if edge.kind is EdgeKind.BAR:
        raise ValueError("bars carry no expansion demand")
    if edge.kind is EdgeKind.TAUT:
        return 0.0
    P = _positions(config)
    length = float(np.linalg.norm(P[edge.i] - P[edge.j]))
    return eta * min(1.0, 1.0 / length)


def strut_demands(config, framework: Framework, eta: float) -> np.ndarray:
    """Vectorised :func:`strut_demand` over the framework's struts (in edge order)."""
    P = _positions(config)
    smask = framework.strut_mask
    pairs = framework.pairs[smask]
    if len(pairs) == 0:
        return np.zeros(0)
    lengths = np.linalg.norm(P[pairs[:, 0]] - P[pairs[:, 1]], axis=1)
    demand = eta * np.minimum(1.0, 1.0 / lengths)
    taut = framework.mask(EdgeKind.TAUT)[smask]
    demand[taut] = 0.0
    return demand


def constraint_residuals(config, framework: Framework, v, eta: float) -> tuple:
    """``(max |bar rate|, min strut slack)`` for a velocity field; slack is rate minus demand."""
    R = rigidity_matrix(config, framework)
    rates = R @ np.asarray(v, dtype=float).reshape(-1)
    bar = framework.bar_mask
    bar_err = float(np.abs(rates[bar]).max(initial=0.0))
    if framework.strut_mask.any():
        slack = rates[framework.strut_mask] - strut_demands(config, framework, eta)
        min_slack = float(slack.min())
    else:
        min_slack = float("inf")
    return bar_err, min_slack


def _solve_hard(config, framework, eta, params):
    R = rigidity_matrix(config, framework)
    bar = framework.bar_mask
    smask = framework.strut_mask
    demand = strut_demands(config, framework, eta)
    n2 = 2 * framework.n
    res = qp_solve(R[bar], np.zeros(int(bar.sum())), R[smask], demand,
                   tol=params.qp_tol, max_iters=params.max_qp_iters, n_vars=n2)
    strut_ids = np.flatnonzero(smask)
    slack = R[smask] @ res.x - demand
    row_norm = np.linalg.norm(R[smask], axis=1) if smask.any() else np.zeros(0)
    tight = np.flatnonzero((res.ineq_multipliers > 0) | (slack <= params.qp_tol * np.maximum(row_norm, 1.0)))
    active = tuple(int(strut_ids[k]) for k in tight)
    return res.x, active


def expansive_velocity(config, framework: Framework, params: ExpansionParams = ExpansionParams()) -> VelocityField:
    """Minimum-norm velocity keeping bars rigid and pushing struts apart.

    If the demand is infeasible, ``eta`` is halved up to
    ``params.max_eta_retries`` times before giving up with
    :class:`InfeasibleAfterRetries`.
    """
    eta = params.eta if params.eta is not None else default_eta(config, framework)
    for attempt in range(params.max_eta_retries + 1):
        try:
            x, active = _solve_hard(config, framework, eta, params)
        except InfeasibleDetected:
            log.debug("expansion QP infeasible at eta=%g, halving", eta)
            eta *= 0.5
            continue
        except MaxItersExceeded as exc:
            raise QpDidNotConverge(str(exc)) from exc
        v = x.reshape(-1, 2)
        return VelocityField(v, float(x @ x), active, eta)
    raise InfeasibleAfterRetries(
        f"no expansive velocity after {params.max_eta_retries} eta halvings; configuration is at or "
        "numerically indistinguishable from an unfolded state")


def _nullspace(A, n):
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    tol = 1e-12 * max(1.0, s.max(initial=0.0))
    rank = int(np.sum(s > tol))
    return vt[rank:].T


def expansive_velocity_barrier(config, framework: Framework, params: ExpansionParams,
                               newton_tol: float = 1e-10, max_newton: int = 200) -> VelocityField:
    """Log-barrier smoothed variant of :func:`expansive_velocity`.

    Minimises ``sum |v|^2 - w * sum log(rate_s - demand_s + shift)`` over the
    bar-preserving subspace by damped Newton, starting from the hard QP
    solution. ``shift`` is half the QP tolerance scale, so the start is
    strictly interior and the result keeps the hard solver's feasibility
    contract. Struts whose rate is fixed by the bars (rows in the bar span,
    e.g. across an exactly straight joint) are left out of the barrier sum.
    """
    w = params.barrier_weight
    if not w > 0:
        raise ValueError("barrier mode needs barrier_weight > 0")
    hard = expansive_velocity(config, framework, params)
    eta = hard.eta
    P = _positions(config)
    R = rigidity_matrix(P, framework)
    n2 = 2 * framework.n
    Z = _nullspace(R[framework.bar_mask], n2)
    S = R[framework.strut_mask] @ Z
    demand = strut_demands(P, framework, eta)
    keep = np.linalg.norm(S, axis=1) > 1e-9 * max(1.0, np.abs(R).max(initial=0.0))
    S, demand = S[keep], demand[keep]
    if S.shape[0] == 0:
        return hard
    scale = coordinate_scale(P)
    shift = 0.5 * params.qp_tol * scale

    def f(y):
        g = S @ y - demand + shift
        if np.any(g <= 0):
            return np.inf
        return float(y @ y - w * np.sum(np.log(g)))

    y = Z.T @ hard.flat
    for it in range(max_newton):
        g = S @ y - demand + shift
        grad = 2 * y - w * S.T @ (1.0 / g)
        H = 2 * np.eye(len(y)) + w * (S.T * (1.0 / g**2)) @ S
        # the start sits a hair inside the boundary, so H can be very ill-conditioned there
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        decrement = float(-grad @ step)
        if decrement / 2 <= newton_tol ** 2 or np.linalg.norm(grad) <= newton_tol:
            break
        t = 1.0
        f0 = f(y)
        while f(y + t * step) > f0 + 0.25 * t * (grad @ step):
            t *= 0.5
            if t < 1e-16:
                raise NewtonDidNotConverge("line search failed in barrier Newton iteration")
        y = y + t * step
    else:
        raise NewtonDidNotConverge(f"barrier Newton did not converge in {max_newton} iterations")
    x = Z @ y
    slack = S @ y - demand
    tight = np.flatnonzero(slack <= params.qp_tol * scale)
    strut_ids = np.flatnonzero(framework.strut_mask)[keep]
    active = tuple(int(strut_ids[k]) for k in tight)
    return VelocityField(x.reshape(-1, 2), float(x @ x), active, eta)
