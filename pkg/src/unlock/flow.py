"""Integrating the expansive velocity field until every chain is unfolded."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleAfterRetries, NumericalError, ProjectionDiverged, QPError, StepSizeUnderflow
from .expansion import ExpansionParams, constraint_residuals, default_eta, expansive_velocity
from .framework import Framework, build_framework, classify_taut_struts
from .geometry import (Linkage, coordinate_scale, is_convexified, is_simple, is_straightened, is_unfolded,
                       pairwise_distances, require_simple)

log = logging.getLogger(__name__)

UNFOLDED = "Unfolded"
MAX_STEPS = "MaxStepsReached"
FAILED = "NumericalFailure"


@dataclass(frozen=True)
class FlowParams:
    """Integration and termination settings.

    ``expand_tol`` is scaled by ``max(1, max |coordinate|)`` of the input.
    ``max_step_fraction`` caps each step's largest vertex displacement at
    that fraction of the shortest bar; ``taut_tol`` defaults to half of
    ``straight_tol``.
    """

    dt_init: float = 10.0
    dt_min: float = 1e-12
    max_steps: int = 20000
    straight_tol: float = 1e-3
    convex_tol: float = 1e-3
    bar_tol: float = 1e-8
    expand_tol: float = 1e-9
    snapshot_every: int = 10
    integrator: str = "rk4"
    max_step_fraction: float = 0.05
    taut_tol: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init):
            raise ValueError("need 0 < dt_min <= dt_init")
        for name in ("straight_tol", "convex_tol", "bar_tol", "expand_tol", "max_step_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError("integrator must be 'rk4' or 'euler'")
        if self.snapshot_every < 1 or self.max_steps < 0:
            raise ValueError("snapshot_every must be >= 1 and max_steps >= 0")

    @property
    def taut(self) -> float:
        return self.taut_tol if self.taut_tol is not None else 0.5 * self.straight_tol


@dataclass(frozen=True)
class StepDiag:
    t: float
    dt: float
    min_strut_slack: float
    max_bar_drift: float


@dataclass(frozen=True)
class Frame:
    t: float
    config: Linkage
    diag: Optional[StepDiag] = None


@dataclass
class MotionTrace:
    frames: list
    outcome: str
    diagnostics: list = field(default_factory=list)
    steps: int = 0
    failure_step: Optional[int] = None
    failure_reason: str = ""
    sections: Optional[int] = None

    @property
    def final(self) -> Linkage:
        return self.frames[-1].config


# ---------------------------------------------------------------------------


def project_bar_lengths(positions, pairs, target_lengths, tol: float = 1e-13, max_iters: int = 20):
    """Gauss-Newton projection back onto the bar-length constraints.

    Each iteration applies the minimum-norm correction of the linearised
    length residuals. Returns ``(positions, iterations)``.
    """
    P = np.array(positions, dtype=float)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    L = np.asarray(target_lengths, dtype=float)
    if len(pairs) == 0:
        return P, 0
    n = len(P)
    rows = np.arange(len(pairs))
    for it in range(max_iters + 1):
        d = P[pairs[:, 0]] - P[pairs[:, 1]]
        ell = np.linalg.norm(d, axis=1)
        r = ell - L
        if np.max(np.abs(r) / L) <= tol:
            return P, it
        if it == max_iters:
            break
        u = d / ell[:, None]
        J = np.zeros((len(pairs), 2 * n))
        J[rows, 2 * pairs[:, 0]] = u[:, 0]
        J[rows, 2 * pairs[:, 0] + 1] = u[:, 1]
        J[rows, 2 * pairs[:, 1]] = -u[:, 0]
        J[rows, 2 * pairs[:, 1] + 1] = -u[:, 1]
        delta, *_ = np.linalg.lstsq(J, -r, rcond=None)
        P = P + delta.reshape(-1, 2)
        if not np.all(np.isfinite(P)):
            break
    raise ProjectionDiverged(f"bar projection did not reach relative error {tol:g} in {max_iters} iterations")


def frozen_chains(config: Linkage, flow: FlowParams) -> tuple:
    """Chains that already satisfy their termination predicate."""
    out = []
    for k, c in enumerate(config.chains):
        done = is_convexified(c, flow.convex_tol) if c.closed else is_straightened(c, flow.straight_tol)
        if done:
            out.append(k)
    return tuple(out)


def prepare_framework(config: Linkage, framework: Framework, flow: FlowParams) -> Framework:
    return classify_taut_struts(config, framework, flow.taut, frozen_chains(config, flow))


def _integrate(P, dt, field_fn, method):
    if method == "euler":
        return P + dt * field_fn(P)
    k1 = field_fn(P)
    k2 = field_fn(P + 0.5 * dt * k1)
    k3 = field_fn(P + 0.5 * dt * k2)
    k4 = field_fn(P + dt * k3)
    return P + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class _StepContext:
    """State that stays fixed over a run: bar targets, tolerances and the base framework."""

    framework: Framework
    bar_pairs: np.ndarray
    bar_lengths: np.ndarray
    expand_abs: float
    eta: float


def _context(linkage: Linkage, framework: Framework, flow: FlowParams, exp: ExpansionParams) -> _StepContext:
    P = linkage.positions
    bars = framework.pairs[framework.bar_mask]
    lengths = np.linalg.norm(P[bars[:, 0]] - P[bars[:, 1]], axis=1)
    eta = exp.eta if exp.eta is not None else default_eta(P, framework)
    return _StepContext(framework, bars, lengths, flow.expand_tol * coordinate_scale(P), eta)


def validate_step(old: Linkage, new: Linkage, ctx: _StepContext, flow: FlowParams) -> str:
    """Empty string if ``new`` is an acceptable successor of ``old``, else the reason."""
    Pn = new.positions
    ell = np.linalg.norm(Pn[ctx.bar_pairs[:, 0]] - Pn[ctx.bar_pairs[:, 1]], axis=1)
    drift = float(np.max(np.abs(ell - ctx.bar_lengths) / ctx.bar_lengths))
    if drift > flow.bar_tol:
        return f"bar drift {drift:.3g}"
    dec = float(np.max(pairwise_distances(old) - pairwise_distances(Pn)))
    if dec > ctx.expand_abs:
        return f"distance decrease {dec:.3g}"
    if not is_simple(new):
        return "simplicity lost"
    return ""


def step(config: Linkage, framework: Framework, flow: FlowParams, exp: ExpansionParams,
         dt: Optional[float] = None, ctx: Optional[_StepContext] = None):
    """Advance one accepted step.

    Returns ``(new_config, dt_used, diag)``. The first stage's field
    decides the trial ``dt``: ``min(dt or dt_init, max_step_fraction *
    shortest bar / max |v|)``; a rejected trial halves ``dt`` down to
    ``dt_min``.
    """
    ctx = ctx or _context(config, framework, flow, exp)
    fw = prepare_framework(config, ctx.framework, flow)
    params = replace(exp, eta=ctx.eta)
    P0 = config.positions
    v0 = expansive_velocity(P0, fw, params)
    params = replace(params, eta=v0.eta)
    vmax = float(np.max(np.linalg.norm(v0.v, axis=1))) if v0.v.size else 0.0
    bar_err, slack = constraint_residuals(P0, fw, v0.v, v0.eta)
    if vmax == 0.0:
        return config, 0.0, StepDiag(0.0, 0.0, slack, 0.0)

    def field_fn(P):
        if P is P0:
            return v0.v
        return expansive_velocity(P, fw, params).v

    cache = {}

    def cached(P):
        key = P.tobytes()
        if key not in cache:
            cache[key] = v0.v if np.array_equal(P, P0) else field_fn(P)
        return cache[key]

    h = min(dt if dt is not None else flow.dt_init, flow.max_step_fraction * float(ctx.bar_lengths.min()) / vmax)
    reason = ""
    while h >= flow.dt_min:
        try:
            P1 = _integrate(P0, h, cached, flow.integrator)
            P1, _ = project_bar_lengths(P1, ctx.bar_pairs, ctx.bar_lengths)
            new = config.with_positions(P1)
            reason = validate_step(config, new, ctx, flow)
        except (QPError, ProjectionDiverged) as exc:
            reason = f"{type(exc).__name__}: {exc}"
        if not reason:
            ell = np.linalg.norm(P1[ctx.bar_pairs[:, 0]] - P1[ctx.bar_pairs[:, 1]], axis=1)
            drift = float(np.max(np.abs(ell - ctx.bar_lengths) / ctx.bar_lengths))
            return new, h, StepDiag(0.0, h, slack, drift)
        log.debug("step rejected at dt=%g: %s", h, reason)
        h *= 0.5
    raise StepSizeUnderflow(f"step size fell below dt_min={flow.dt_min:g} ({reason})")


def run_unfold(linkage: Linkage, flow: FlowParams = FlowParams(), exp: ExpansionParams = ExpansionParams(),
               progress: Optional[Callable] = None) -> MotionTrace:
    """Flow until all open chains are straight and all closed chains convex.

    Frames are stored at ``t = 0``, every ``snapshot_every`` steps and at the
    end; per-step diagnostics are kept in full.
    """
    require_simple(linkage)
    framework = build_framework(linkage, check_simple=False)
    ctx = _context(linkage, framework, flow, exp)
    frames = [Frame(0.0, linkage)]
    diags = []
    config, t = linkage, 0.0
    if is_unfolded(config, flow.straight_tol, flow.convex_tol):
        return MotionTrace(frames, UNFOLDED, diags, 0)
    for k in range(1, flow.max_steps + 1):
        try:
            new, h, diag = step(config, framework, flow, exp, dt=None, ctx=ctx)
        except (NumericalError, InfeasibleAfterRetries) as exc:
            log.info("flow failed at step %d: %s", k, exc)
            if frames[-1].config is not config:
                frames.append(Frame(t, config, diags[-1] if diags else None))
            return MotionTrace(frames, FAILED, diags, k - 1, failure_step=k, failure_reason=str(exc))
        if h == 0.0:
            # zero velocity: nothing left to expand although not all predicates hold
            if frames[-1].config is not config:
                frames.append(Frame(t, config, diags[-1] if diags else None))
            return MotionTrace(frames, FAILED, diags, k - 1, failure_step=k,
                               failure_reason="velocity vanished before the linkage unfolded")
        t += h
        diag = replace(diag, t=t)
        diags.append(diag)
        config = new
        done = is_unfolded(config, flow.straight_tol, flow.convex_tol)
        if done or k % flow.snapshot_every == 0:
            frames.append(Frame(t, config, diag))
        if progress is not None:
            progress(k, t, config)
        if done:
            return MotionTrace(frames, UNFOLDED, diags, k)
    if frames[-1].config is not config:
        frames.append(Frame(t, config, diags[-1] if diags else None))
    return MotionTrace(frames, MAX_STEPS, diags, flow.max_steps)


@dataclass(frozen=True)
class MonotoneReport:
    max_violation: float
    pair: Optional[tuple]
    frames: Optional[tuple]
    passed: bool


def check_monotone_expansion(trace: MotionTrace, tol: float) -> MonotoneReport:
    """Largest decrease of any pairwise distance between consecutive stored frames."""
    worst, pair, frames = 0.0, None, None
    prev = None
    for k, fr in enumerate(trace.frames):
        D = pairwise_distances(fr.config)
        if prev is not None:
            dec = prev - D
            idx = np.unravel_index(int(np.argmax(dec)), dec.shape)
            if dec[idx] > worst:
                worst = float(dec[idx])
                pair = (int(min(idx)), int(max(idx)))
                frames = (k - 1, k)
        prev = D
    return MonotoneReport(worst, pair, frames, worst <= tol)
