"""Pointed pseudotriangulations and the one-degree-of-freedom unfolding backend.

A pointed pseudotriangulation of ``n`` points has ``2n - 3`` non-crossing
edges, every vertex has an incident angle larger than pi, and every bounded
face has exactly three convex corners. Deleting a convex hull edge leaves a
mechanism with a single degree of freedom whose motion is expansive; it is
followed until some vertex's large angle closes to pi, then the edge set is
repaired locally and the next mechanism takes over.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (BarsNotExtendable, DegeneratePosition, FlipNotUnique, NumericalError, ProjectionDiverged,
                     StepSizeUnderflow, UnexpectedDofCount)
from .expansion import VelocityField
from .flow import FAILED, MAX_STEPS, UNFOLDED, FlowParams, Frame, MotionTrace, StepDiag, project_bar_lengths
from .framework import Framework, rigidity_matrix
from .geometry import (Chain, Linkage, coordinate_scale, is_convexified, is_straightened, is_unfolded, orient,
                       pairwise_distances, require_simple, segments_disjoint_or_adjacent, signed_area, trace_faces)

log = logging.getLogger(__name__)

EVENT_TOL = 1e-10
_GAP_EPS = 1e-12


def _norm_pair(i, j):
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class PseudoFace:
    corners: tuple
    chains: tuple  # three vertex sequences, corner to corner along the face boundary


@dataclass(frozen=True)
class Pseudotriangulation:
    n: int
    edges: tuple
    bars: frozenset
    faces: tuple = ()

    def has(self, i, j) -> bool:
        return _norm_pair(i, j) in self.edges


def convex_hull(P) -> list:
    """Hull vertex indices in counterclockwise order (monotone chain, collinear points dropped)."""
    P = np.asarray(P, dtype=float)
    idx = sorted(range(len(P)), key=lambda k: (P[k][0], P[k][1]))
    if len(idx) <= 2:
        return idx

    def build(seq):
        out = []
        for k in seq:
            while len(out) >= 2 and orient(P[out[-2]], P[out[-1]], P[k]) <= 0:
                out.pop()
            out.append(k)
        return out

    lower = build(idx)
    upper = build(reversed(idx))
    return lower[:-1] + upper[:-1]


def hull_edges(P) -> list:
    h = convex_hull(P)
    return sorted(_norm_pair(h[k], h[(k + 1) % len(h)]) for k in range(len(h)))


def angular_gaps(P, edges, v):
    """Sorted incident neighbours of ``v`` and the ccw gap following each one."""
    nbrs = [j if i == v else i for i, j in edges if v in (i, j)]
    if not nbrs:
        return [], []
    ang = sorted((math.atan2(P[w][1] - P[v][1], P[w][0] - P[v][0]), w) for w in nbrs)
    gaps = [(ang[(k + 1) % len(ang)][0] - ang[k][0]) % (2 * math.pi) for k in range(len(ang))]
    if len(ang) == 1:
        gaps = [2 * math.pi]
    return [w for _, w in ang], gaps


def pointed_margin(P, edges, v) -> float:
    """``largest incident angle - pi`` at ``v`` (``pi`` for degree <= 1)."""
    nbrs, gaps = angular_gaps(P, edges, v)
    if len(nbrs) <= 1:
        return math.pi
    return max(gaps) - math.pi


def is_pointed(P, edges, v) -> bool:
    return pointed_margin(P, edges, v) > _GAP_EPS


def check_general_position(P, tol: float = 1e-9) -> None:
    P = np.asarray(P, dtype=float)
    n = len(P)
    scale = coordinate_scale(P)
    for a in range(n):
        for b in range(a + 1, n):
            d = P[b] - P[a]
            rest = P[b + 1:] - P[a]
            cross = d[0] * rest[:, 1] - d[1] * rest[:, 0]
            bad = np.flatnonzero(np.abs(cross) <= tol * scale * scale)
            if bad.size:
                c = b + 1 + int(bad[0])
                raise DegeneratePosition(f"points {a}, {b}, {c} are collinear")


def _faces(P, edges):
    faces, _ = trace_faces(P, edges)
    out = []
    for cyc in faces:
        if signed_area(P, cyc) <= 0:
            continue
        k = len(cyc)
        corners = []
        for t in range(k):
            u, v, w = cyc[t - 1], cyc[t], cyc[(t + 1) % k]
            a = math.atan2(P[u][1] - P[v][1], P[u][0] - P[v][0])
            b = math.atan2(P[w][1] - P[v][1], P[w][0] - P[v][0])
            interior = (a - b) % (2 * math.pi)
            if interior < math.pi - _GAP_EPS:
                corners.append(t)
        chains = []
        for s in range(len(corners)):
            a, b = corners[s], corners[(s + 1) % len(corners)]
            seq = [cyc[a]]
            t = a
            while t != b:
                t = (t + 1) % k
                seq.append(cyc[t])
            chains.append(tuple(seq))
        out.append(PseudoFace(tuple(cyc[t] for t in corners), tuple(chains)))
    return tuple(out)


def build_pointed_pseudotriangulation(config, bars: Sequence, check_position: bool = True,
                                      exclude: Sequence = ()) -> Pseudotriangulation:
    """Greedy pointed pseudotriangulation containing ``bars``.

    Starts from the bars and hull edges and inserts candidate diagonals in
    order of increasing length whenever they cross nothing and keep both
    endpoints pointed. Pairs listed in ``exclude`` are never inserted.
    """
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    n = len(P)
    if check_position:
        check_general_position(P)
    bars = frozenset(_norm_pair(i, j) for i, j in bars)
    edges = set(bars)
    for e in hull_edges(P):
        edges.add(e)
    for v in range(n):
        if not is_pointed(P, edges, v):
            raise BarsNotExtendable(f"vertex {v} is not pointed by bars and hull edges")
    return _complete(P, n, edges, bars, set(map(lambda e: _norm_pair(*e), exclude)))


def _complete(P, n, edges, bars, exclude):
    target = max(2 * n - 3, 1 if n == 2 else 0)
    cands = sorted(
        ((float(np.linalg.norm(P[i] - P[j])), i, j) for i in range(n) for j in range(i + 1, n)
         if (i, j) not in edges and (i, j) not in exclude))
    edges = set(edges)
    for _, i, j in cands:
        if len(edges) >= target:
            break
        if not segments_disjoint_or_adjacent(P, edges, (i, j)):
            continue
        trial = edges | {(i, j)}
        if is_pointed(P, trial, i) and is_pointed(P, trial, j):
            edges = trial
    if len(edges) != target:
        raise BarsNotExtendable(f"greedy insertion stopped at {len(edges)} edges, expected {target}")
    ordered = tuple(sorted(edges))
    return Pseudotriangulation(n, ordered, frozenset(bars), _faces(P, ordered))


@dataclass(frozen=True)
class PTReport:
    edge_count_ok: bool
    pointed_ok: bool
    faces_ok: bool
    noncrossing_ok: bool = True
    bars_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.edge_count_ok and self.pointed_ok and self.faces_ok and self.noncrossing_ok and self.bars_ok


def verify_pseudotriangulation(config, pt: Pseudotriangulation) -> PTReport:
    """Independent check of the edge count, pointedness and three-corner face conditions."""
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    n = len(P)
    edges = list(pt.edges)
    edge_count_ok = len(edges) == 2 * n - 3
    pointed_ok = all(is_pointed(P, edges, v) for v in range(n))
    faces = _faces(P, edges)
    faces_ok = len(faces) > 0 and all(len(f.corners) == 3 for f in faces)
    noncrossing = all(segments_disjoint_or_adjacent(P, edges[:k], edges[k]) for k in range(len(edges)))
    bars_ok = all(b in set(edges) for b in pt.bars)
    return PTReport(edge_count_ok, pointed_ok, faces_ok, noncrossing, bars_ok)


# ---------------------------------------------------------------------------
# mechanisms


@dataclass(frozen=True)
class Mechanism:
    pt: Pseudotriangulation
    removed_edge: tuple
    pin: tuple

    @property
    def edges(self) -> tuple:
        return tuple(e for e in self.pt.edges if e != self.removed_edge)


def gauge_fixed_matrix(P, edges, pin) -> np.ndarray:
    """Rigidity rows of ``edges`` plus three rows pinning vertex ``pin[0]`` and the direction to ``pin[1]``."""
    n = len(P)
    fw = Framework.from_pairs(n, bars=edges)
    R = rigidity_matrix(P, fw)
    a, b = pin
    G = np.zeros((3, 2 * n))
    G[0, 2 * a] = 1.0
    G[1, 2 * a + 1] = 1.0
    d = P[b] - P[a]
    G[2, 2 * b] = -d[1]
    G[2, 2 * b + 1] = d[0]
    return np.vstack([R, G])


def nullspace_report(P, edges, pin):
    """Singular values (one per column) and the right singular vectors of the gauge-fixed matrix."""
    M = gauge_fixed_matrix(P, edges, pin)
    cols = M.shape[1]
    if M.shape[0] < cols:
        M = np.vstack([M, np.zeros((cols - M.shape[0], cols))])
    _, s, vt = np.linalg.svd(M)
    return s, vt


def dof_count(P, edges, pin, rel_tol: float = 1e-10) -> int:
    s, _ = nullspace_report(P, edges, pin)
    return int(np.sum(s < rel_tol * s.max()))


def make_mechanism(pt: Pseudotriangulation, config, hull_edge: Optional[tuple] = None) -> Mechanism:
    """Drop one non-bar convex hull edge (lowest index unless ``hull_edge`` is given) and fix the gauge."""
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    hull = [e for e in hull_edges(P) if e in set(pt.edges) and e not in pt.bars]
    if hull_edge is not None:
        hull_edge = _norm_pair(*hull_edge)
        if hull_edge not in hull:
            raise ValueError(f"{hull_edge} is not a removable hull edge of this pseudotriangulation")
        removed = hull_edge
    elif hull:
        removed = hull[0]
    else:
        raise UnexpectedDofCount("every hull edge is a bar; no mechanism can be formed")
    rest = [e for e in pt.edges if e != removed]
    if pt.bars:
        pin = min(pt.bars)
    else:
        pin = rest[0]
    dof = dof_count(P, rest, pin)
    if dof != 1:
        raise UnexpectedDofCount(f"gauge-fixed mechanism has {dof} degrees of freedom, expected 1")
    return Mechanism(pt, removed, pin)


def mechanism_velocity(config, mechanism: Mechanism) -> VelocityField:
    """Unit-norm motion of the mechanism, oriented so the removed hull edge lengthens."""
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    s, vt = nullspace_report(P, mechanism.edges, mechanism.pin)
    small = np.flatnonzero(s < 1e-10 * s.max())
    if small.size != 1:
        raise UnexpectedDofCount(f"gauge-fixed mechanism has {small.size} degrees of freedom, expected 1")
    v = vt[small[0]].reshape(-1, 2)
    i, j = mechanism.removed_edge
    rate = float((P[i] - P[j]) @ (v[i] - v[j]))
    if rate < 0:
        v = -v
    v = v / np.linalg.norm(v)
    return VelocityField(v, float(np.sum(v * v)), (), 0.0)


# ---------------------------------------------------------------------------
# flow between events


@dataclass(frozen=True)
class AlignmentEvent:
    """Two mechanism edges at ``vertex`` became collinear at ``t_event``.

    ``config_after`` is a configuration slightly past the event, where the
    combinatorial repair is decided.
    """

    t_event: float
    vertex: int
    edges: tuple
    config_at_event: np.ndarray
    config_after: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Terminated:
    t: float
    config: np.ndarray


@dataclass
class SectionResult:
    outcome: object  # AlignmentEvent or Terminated
    samples: list = field(default_factory=list)  # (t, positions, StepDiag) per accepted step


def event_function(P, edges, n):
    """Smallest pointedness margin over all vertices and the vertex attaining it (lowest index on ties)."""
    best, arg = math.inf, -1
    for v in range(n):
        m = pointed_margin(P, edges, v)
        if m < best - 1e-15:
            best, arg = m, v
    return best, arg


def large_angle_pairs(P, edges, n) -> dict:
    """For every vertex of degree >= 2, the neighbours ``(a, b)`` bounding its largest ccw gap."""
    out = {}
    for v in range(n):
        nbrs, gaps = angular_gaps(P, edges, v)
        if len(nbrs) >= 2:
            k = int(np.argmax(gaps))
            out[v] = (nbrs[k], nbrs[(k + 1) % len(nbrs)])
    return out


def _ccw_angle(P, v, a, b):
    ta = math.atan2(P[a][1] - P[v][1], P[a][0] - P[v][0])
    tb = math.atan2(P[b][1] - P[v][1], P[b][0] - P[v][0])
    return (tb - ta) % (2 * math.pi)


def tracked_margin(P, pairs: dict, ref: Optional[dict] = None):
    """Signed version of :func:`event_function` following fixed angle pairs.

    The ccw angle from ``a`` to ``b`` at ``v`` minus pi changes sign when the
    two edges pass through alignment, unlike the largest gap itself. With
    ``ref`` (angles at a nearby configuration) the angle is unwrapped
    relative to it, so edges separating from a common direction do not jump
    by 2 pi.
    """
    best, arg = math.inf, -1
    for v, (a, b) in pairs.items():
        g = _ccw_angle(P, v, a, b)
        if ref is not None:
            g0 = ref[v]
            g = g0 + (g - g0 + math.pi) % (2 * math.pi) - math.pi
        m = g - math.pi
        if m < best - 1e-15:
            best, arg = m, v
    return best, arg


def aligned_edges(P, edges, v):
    """The two edges bounding the largest angle at ``v``."""
    nbrs, gaps = angular_gaps(P, edges, v)
    k = int(np.argmax(gaps))
    a, b = nbrs[k], nbrs[(k + 1) % len(nbrs)]
    return _norm_pair(v, a), _norm_pair(v, b)


def _rk4(P, h, vel):
    k1 = vel(P)
    k2 = vel(P + 0.5 * h * k1)
    k3 = vel(P + 0.5 * h * k2)
    k4 = vel(P + h * k3)
    return P + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def flow_to_alignment(config, mechanism: Mechanism, params: FlowParams = FlowParams(), t0: float = 0.0,
                      done=None, max_steps: int = 100000) -> SectionResult:
    """Follow the mechanism until a vertex's large angle closes to pi.

    Only the mechanism's own edges are monitored. ``done(P)`` is the global
    termination predicate; it is checked after every step and before an
    event is reported, so termination wins a tie. Each step is RK4 on the
    unit-speed field followed by projection onto the rigid edge lengths;
    steps that shrink a pairwise distance by more than ``expand_tol`` are
    retried with half the step.
    """
    P0 = np.array(config.positions if isinstance(config, Linkage) else config, dtype=float)
    n = len(P0)
    mech_edges = list(mechanism.edges)
    rigid = np.array(mech_edges, dtype=int).reshape(-1, 2)
    lengths = np.linalg.norm(P0[rigid[:, 0]] - P0[rigid[:, 1]], axis=1)
    expand_abs = params.expand_tol * coordinate_scale(P0)
    ref = [None]

    def vel(P):
        v = mechanism_velocity(P, mechanism).v
        if ref[0] is not None and float(np.sum(v * ref[0])) < 0:
            v = -v
        return v

    def advance(P, h):
        Q = _rk4(P, h, vel)
        Q, _ = project_bar_lengths(Q, rigid, lengths)
        return Q

    def past(P, h_event, h_scale):
        # nudge beyond the event until the closing angle has clearly flipped
        delta = 1e-6 * max(h_scale, 1e-12)
        Q = advance(P, h_event)
        for _ in range(30):
            try:
                Q = advance(P, h_event + delta)
            except (ProjectionDiverged, UnexpectedDofCount):
                break
            if tracked_margin(Q, pairs, ref_angles)[0] < -1e-9:
                break
            delta *= 2.0
        return Q

    f0, v0 = event_function(P0, mech_edges, n)
    if f0 <= EVENT_TOL:
        ev = AlignmentEvent(t0, v0, aligned_edges(P0, mech_edges, v0), P0, P0)
        return SectionResult(ev)
    if done is not None and done(P0):
        return SectionResult(Terminated(t0, P0))

    P, t = P0, t0
    samples = []
    min_len = float(lengths.min())
    for _ in range(max_steps):
        vcur = vel(P)
        ref[0] = vcur
        # choose the monitored angles a hair along the motion, where ties at a degenerate start are broken
        Pp = P + 1e-7 * min_len / max(float(np.abs(vcur).max()), 1e-300) * vcur
        pairs = large_angle_pairs(Pp, mech_edges, n)
        ref_angles = {v: _ccw_angle(Pp, v, a, b) for v, (a, b) in pairs.items()}
        h = min(params.dt_init, params.max_step_fraction * min_len / max(float(np.abs(vcur).max()), 1e-300))
        D = pairwise_distances(P)
        while True:
            if h < params.dt_min:
                raise StepSizeUnderflow(f"mechanism step fell below dt_min={params.dt_min:g}")
            try:
                Q = advance(P, h)
            except (ProjectionDiverged, UnexpectedDofCount):
                h *= 0.5
                continue
            f1, _ = tracked_margin(Q, pairs, ref_angles)
            dec = float(np.max(D - pairwise_distances(Q)))
            if f1 > EVENT_TOL and dec > expand_abs:
                h *= 0.5
                continue
            break
        rate = _pair_rates(P, vcur)
        if f1 > EVENT_TOL:
            t += h
            P = Q
            samples.append((t, P, StepDiag(t, h, rate, _drift(P, rigid, lengths))))
            if done is not None and done(P):
                return SectionResult(Terminated(t, P), samples)
            continue
        # the event lies in (0, h]: bisect on the step length
        lo, hi, Qhi = 0.0, h, Q
        while hi - lo > 1e-14 * max(1.0, h):
            mid = 0.5 * (lo + hi)
            Qm = advance(P, mid)
            fm, _ = tracked_margin(Qm, pairs, ref_angles)
            if fm > EVENT_TOL:
                lo = mid
            else:
                hi, Qhi = mid, Qm
                if fm >= -EVENT_TOL:
                    break
        t_ev = t + hi
        samples.append((t_ev, Qhi, StepDiag(t_ev, hi, rate, _drift(Qhi, rigid, lengths))))
        if done is not None and done(Qhi):
            return SectionResult(Terminated(t_ev, Qhi), samples)
        _, vert = tracked_margin(Qhi, pairs, ref_angles)
        edges = tuple(_norm_pair(vert, w) for w in pairs[vert])
        return SectionResult(AlignmentEvent(t_ev, vert, edges, Qhi, past(P, hi, h)), samples)
    raise StepSizeUnderflow("mechanism flow exceeded its step budget without an event")


def _pair_rates(P, v):
    """Smallest ``d/dt |p_i - p_j|^2 / 2`` over all pairs (nonnegative for expansive motions)."""
    n = len(P)
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, 1)
    d = P[:, None, :] - P[None, :, :]
    dv = v[:, None, :] - v[None, :, :]
    return float(np.einsum("ijk,ijk->ij", d, dv)[iu].min())


def _drift(P, rigid, lengths):
    ell = np.linalg.norm(P[rigid[:, 0]] - P[rigid[:, 1]], axis=1)
    return float(np.max(np.abs(ell - lengths) / lengths))


def _valid(P, edges, bars):
    pt = Pseudotriangulation(len(P), tuple(sorted(edges)), frozenset(bars), _faces(P, tuple(sorted(edges))))
    return pt if verify_pseudotriangulation(P, pt).ok else None


def local_revise(pt: Pseudotriangulation, event: AlignmentEvent, removed_edge: Optional[tuple] = None
                 ) -> Pseudotriangulation:
    """Flip at an alignment event.

    One aligned non-bar edge is deleted and the unique edge restoring a
    pointed pseudotriangulation just past the event is inserted. When the
    event comes from a mechanism, pass its ``removed_edge``: the flip is
    then done on the mechanism's edges and the hull edge is put back.
    """
    P = np.asarray(event.config_after if event.config_after is not None else event.config_at_event, dtype=float)
    removed = _norm_pair(*removed_edge) if removed_edge is not None else None
    base = set(pt.edges) - ({removed} if removed else set())
    options = [e for e in event.edges if e not in pt.bars]
    if not options:
        raise FlipNotUnique(f"both aligned edges at vertex {event.vertex} are bars; nothing to flip")
    options.sort(key=lambda e: (-float(np.linalg.norm(P[e[0]] - P[e[1]])), e))
    last = None
    for drop in options:
        remaining = base - {drop}
        extra = {removed} if removed and removed != drop else set()
        found = []
        for i in range(pt.n):
            for j in range(i + 1, pt.n):
                e = (i, j)
                if e in remaining or e == drop or e in extra:
                    continue
                trial = remaining | extra | {e}
                if not segments_disjoint_or_adjacent(P, remaining | extra, e):
                    continue
                if is_pointed(P, trial, i) and is_pointed(P, trial, j):
                    cand = _valid(P, trial, pt.bars)
                    if cand is not None:
                        found.append(cand)
        if len(found) == 1:
            return found[0]
        last = FlipNotUnique(f"removing {drop} leaves {len(found)} valid replacements")
    raise last


def _pin_for(pt: Pseudotriangulation, removed: tuple) -> tuple:
    if pt.bars:
        return min(pt.bars)
    return next(e for e in pt.edges if e != removed)


def revise_with_lookahead(pt: Pseudotriangulation, event: AlignmentEvent, removed_edge: Optional[tuple] = None,
                          probe: float = 1e-4):
    """Flip chosen by where the next mechanism actually goes.

    At the event itself the position is degenerate, so validity is judged
    at a probe point a short step along each candidate's own motion. Drops
    are tried longest first, replacements shortest first. The flip acts on
    the mechanism's edges; the pseudotriangulation is completed by a non-bar
    hull edge (``removed_edge`` preferred), which the next mechanism leaves
    out again. The first candidate valid at its probe point wins. Returns
    ``(pt, mechanism, probe_configuration)``.
    """
    P = np.asarray(event.config_at_event, dtype=float)
    n = pt.n
    drops = sorted((e for e in event.edges if e not in pt.bars),
                   key=lambda e: (-float(np.linalg.norm(P[e[0]] - P[e[1]])), e))
    if not drops:
        raise FlipNotUnique(f"both aligned edges at vertex {event.vertex} are bars; nothing to flip")
    lengths = [float(np.linalg.norm(P[i] - P[j])) for i, j in pt.edges]
    step = probe * min(lengths)
    removed = _norm_pair(*removed_edge) if removed_edge is not None else None
    mech_edges = set(pt.edges) - ({removed} if removed else set())
    hull_now = hull_edges(P)
    for drop in drops:
        base = mech_edges - {drop}
        adds = sorted(((float(np.linalg.norm(P[i] - P[j])), (i, j)) for i in range(n) for j in range(i + 1, n)
                       if (i, j) not in base and (i, j) != drop))
        for _, e in adds:
            moving = base | {e}
            hulls = [h for h in hull_now if h not in moving and h not in pt.bars]
            if removed is not None and removed not in moving and removed not in hulls:
                hulls.append(removed)
            hulls.sort(key=lambda h: (h != removed, h))
            for h in hulls:
                edges = tuple(sorted(moving | {h}))
                trial = Pseudotriangulation(n, edges, pt.bars)
                mech = Mechanism(trial, h, _pin_for(trial, h))
                try:
                    v = mechanism_velocity(P, mech).v
                except UnexpectedDofCount:
                    continue
                Q = P + step / max(float(np.abs(v).max()), 1e-300) * v
                if h not in hull_edges(Q):
                    continue
                cand = _valid(Q, edges, pt.bars)
                if cand is None:
                    continue
                return cand, Mechanism(cand, h, mech.pin), Q
    raise FlipNotUnique(f"no replacement at vertex {event.vertex} gives a valid mechanism")


# ---------------------------------------------------------------------------
# full run


@dataclass(frozen=True)
class StreinuParams:
    flow: FlowParams = FlowParams(dt_init=1.0, max_step_fraction=0.05)
    max_sections: int = 2000
    hull_edge: Optional[tuple] = None


class _Reduction:
    """Bookkeeping for joints that have become exactly straight.

    A straight joint is frozen: the vertex is dropped from the mechanism
    point set and carried along at a fixed ratio between its two nearest
    live neighbours on the chain.
    """

    def __init__(self, linkage: Linkage):
        self.linkage = linkage
        self.dead = {}  # vertex -> (left live, right live, ratio)
        self._rebuild()

    def _rebuild(self):
        n = self.linkage.n
        self.live = [v for v in range(n) if v not in self.dead]
        self.index = {v: k for k, v in enumerate(self.live)}
        bars = []
        for off, c in zip(self.linkage.offsets, self.linkage.chains):
            seq = [off + k for k in range(len(c)) if off + k not in self.dead]
            pairs = list(zip(seq[:-1], seq[1:]))
            if c.closed and len(seq) >= 3:
                pairs.append((seq[-1], seq[0]))
            bars.extend(_norm_pair(self.index[a], self.index[b]) for a, b in pairs)
        self.bars = sorted(set(bars))

    def progress_terms(self, P_full, flow: FlowParams) -> list:
        """Unfinished chains in reduced indices: ``("open", a, b)`` or ``("closed", cycle)``."""
        out = []
        for off, c in zip(self.linkage.offsets, self.linkage.chains):
            sub = Chain(P_full[off:off + len(c)], c.closed)
            if c.closed:
                if not is_convexified(sub, flow.convex_tol):
                    out.append(("closed", [self.index[off + k] for k in range(len(c)) if off + k not in self.dead]))
            elif not is_straightened(sub, flow.straight_tol):
                out.append(("open", self.index[off], self.index[off + len(c) - 1]))
        return out

    def reduce(self, P_full):
        return P_full[self.live]

    def expand(self, P_red):
        P = np.zeros((self.linkage.n, 2))
        P[self.live] = P_red
        for v, (a, b, lam) in self.dead.items():
            P[v] = P[a] + lam * (P[b] - P[a])
        return P

    def neighbours(self, v):
        """Nearest live vertices before and after ``v`` along its chain."""
        c = self.linkage.chain_of(v)
        off = self.linkage.offsets[c]
        length = len(self.linkage.chains[c])
        closed = self.linkage.chains[c].closed
        local = v - off

        def walk(step):
            k = local
            while True:
                k += step
                if closed:
                    k %= length
                elif not (0 <= k < length):
                    return None
                if off + k not in self.dead:
                    return off + k

        return walk(-1), walk(+1)

    def fuse(self, v, P_full):
        a, b = self.neighbours(v)
        dead_items = dict(self.dead)
        seg = P_full[b] - P_full[a]
        lam = float(np.dot(P_full[v] - P_full[a], seg) / np.dot(seg, seg))
        dead_items[v] = (a, b, lam)
        # re-anchor previously frozen vertices that hung on v
        for w, (x, y, mu) in list(dead_items.items()):
            if w == v:
                continue
            if x == v or y == v:
                q = P_full[w]
                dead_items[w] = (a, b, float(np.dot(q - P_full[a], seg) / np.dot(seg, seg)))
        self.dead = dead_items
        self._rebuild()


def progress_rate(P, v, terms) -> float:
    """Growth rate of unfinished chains' end-to-end distances plus unfinished polygons' areas."""
    rate = 0.0
    for term in terms:
        if term[0] == "open":
            _, a, b = term
            d = P[b] - P[a]
            rate += float(d @ (v[b] - v[a])) / max(float(np.linalg.norm(d)), 1e-300)
        else:
            cyc = term[1]
            A = np.sign(signed_area(P, cyc)) or 1.0
            for k in range(len(cyc)):
                i, j = cyc[k], cyc[(k + 1) % len(cyc)]
                # d/dt of the shoelace term x_i y_j - x_j y_i
                rate += 0.5 * A * float(v[i][0] * P[j][1] + P[i][0] * v[j][1] - v[j][0] * P[i][1] - P[j][0] * v[i][1])
    return rate


def _choose_mechanism(pt, P, removable, first, terms, forced=False) -> Mechanism:
    """Keep ``first`` while it still makes progress; otherwise take the removable hull edge that makes the most."""
    scored = []
    for h in ([first] if first in removable else []) + [e for e in removable if e != first]:
        try:
            mech = make_mechanism(pt, P, h)
            v = mechanism_velocity(P, mech).v
        except UnexpectedDofCount:
            continue
        rate = progress_rate(P, v, terms)
        if h == first and (forced or rate > 1e-9):
            return mech
        scored.append((-rate, h, mech))
    if not scored:
        raise UnexpectedDofCount("no removable hull edge yields a one-degree-of-freedom mechanism")
    return min(scored, key=lambda x: (x[0], x[1]))[2]


def run_streinu_unfold(linkage: Linkage, params: StreinuParams = StreinuParams()) -> MotionTrace:
    """Unfold by a sequence of pseudotriangulation mechanisms.

    Between events the current mechanism is followed; at an event where two
    bars align, the joint is frozen straight and the pseudotriangulation is
    rebuilt on the remaining points; otherwise :func:`local_revise` flips one
    edge. ``trace.sections`` counts the mechanisms followed.
    """
    require_simple(linkage)
    flow = params.flow
    P_full = linkage.positions.copy()
    frames = [Frame(0.0, linkage)]
    diags = []
    if is_unfolded(linkage, flow.straight_tol, flow.convex_tol):
        return MotionTrace(frames, UNFOLDED, diags, 0, sections=0)
    check_general_position(P_full)
    red = _Reduction(linkage)
    t = 0.0
    sections = 0
    steps = 0

    def done(P_red):
        cfg = linkage.with_positions(red.expand(P_red))
        return is_unfolded(cfg, flow.straight_tol, flow.convex_tol)

    pt = None
    removed_hint = params.hull_edge
    P_after = None
    while True:
        if sections >= params.max_sections:
            return _finish(frames, diags, linkage, P_full, t, MAX_STEPS, steps, sections,
                           reason=f"section budget {params.max_sections} exhausted")
        P_red = red.reduce(P_full)
        # after an event, combinatorial choices are made just past it, where the position is generic
        P_comb = P_red if P_after is None else P_after
        P_after = None
        try:
            if pt is None or not verify_pseudotriangulation(P_comb, pt).ok:
                pt = build_pointed_pseudotriangulation(P_comb, red.bars, check_position=False)
            first = params.hull_edge if sections == 0 and params.hull_edge else removed_hint
            removable = [e for e in hull_edges(P_comb) if e in pt.edges and e not in pt.bars]
            terms = red.progress_terms(P_full, flow)
            mech = _choose_mechanism(pt, P_comb, removable, first, terms,
                                     forced=sections == 0 and params.hull_edge is not None)
            removed_hint = mech.removed_edge
            res = flow_to_alignment(P_red, mech, flow, t0=t, done=done)
        except NumericalError as exc:
            log.info("streinu run failed in section %d: %s", sections + 1, exc)
            return _finish(frames, diags, linkage, P_full, t, FAILED, steps, sections, reason=str(exc))
        except (BarsNotExtendable, DegeneratePosition) as exc:
            return _finish(frames, diags, linkage, P_full, t, FAILED, steps, sections, reason=str(exc))
        sections += 1
        for ts, Ps, dg in res.samples:
            steps += 1
            diags.append(dg)
            if steps % flow.snapshot_every == 0:
                frames.append(Frame(ts, linkage.with_positions(red.expand(Ps)), dg))
        out = res.outcome
        if isinstance(out, Terminated):
            P_full = red.expand(out.config)
            t = out.t
            return _finish(frames, diags, linkage, P_full, t, UNFOLDED, steps, sections)
        P_full = red.expand(out.config_at_event)
        t = out.t_event
        cfg = linkage.with_positions(P_full)
        if not frames or frames[-1].t != t:
            frames.append(Frame(t, cfg, diags[-1] if diags else None))
        e1, e2 = out.edges
        if e1 in pt.bars and e2 in pt.bars:
            vertex = red.live[out.vertex]
            red.fuse(vertex, P_full)
            P_full = red.expand(red.reduce(P_full))
            pt = None
            if is_unfolded(linkage.with_positions(P_full), flow.straight_tol, flow.convex_tol):
                return _finish(frames, diags, linkage, P_full, t, UNFOLDED, steps, sections)
            continue
        try:
            pt, nxt, P_after = revise_with_lookahead(pt, out, removed_edge=mech.removed_edge)
            removed_hint = nxt.removed_edge
        except FlipNotUnique as exc:
            log.debug("look-ahead flip failed (%s); rebuilding past the event", exc)
            P_after = out.config_after
            drop = [e for e in out.edges if e not in pt.bars]
            try:
                pt = build_pointed_pseudotriangulation(out.config_after, red.bars, check_position=False,
                                                       exclude=drop)
            except BarsNotExtendable:
                pt = None


def _finish(frames, diags, linkage, P_full, t, outcome, steps, sections, reason=""):
    cfg = linkage.with_positions(P_full)
    if frames[-1].t != t or frames[-1].config != cfg:
        frames.append(Frame(t, cfg, diags[-1] if diags else None))
    failure = steps + 1 if outcome == FAILED else None
    return MotionTrace(frames, outcome, diags, steps, failure_step=failure, failure_reason=reason, sections=sections)
