"""Planarization of stressed frameworks and Maxwell-Cremona liftings.

Crossing edges are cut at their intersection points, faces are traced with
the usual "turn to the next edge clockwise" rule, and an equilibrium stress
is integrated across the dual graph into a piecewise-linear height function
that is zero on the outer face. Sign convention: a positive stress makes
the terrain locally convex across its edge, a negative one concave.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePosition, LiftClosureError
from .framework import Framework, StressAssignment, equilibrium_residual
from .geometry import Linkage, coordinate_scale, segment_intersection, signed_area, trace_faces


@dataclass(frozen=True)
class PlanarFramework:
    """Plane graph with stresses inherited from a (possibly crossing) framework.

    ``edges[k] = (a, b)`` with ``a < b``; ``parent[k]`` is the id of the
    original edge it was cut from and ``parent_omega[k]`` that edge's stress.
    ``omega[k]`` is the piece's own stress coefficient, scaled by
    ``|parent| / |piece|`` so every piece carries the parent's force. ``faces`` are
    vertex cycles traced with the face on the left; ``outer`` indexes the
    unbounded one. ``half_faces`` maps each directed edge ``(u, v)`` to the
    face on its left.
    """

    vertices: np.ndarray
    edges: tuple
    parent: tuple
    parent_omega: np.ndarray
    omega: np.ndarray
    faces: tuple
    outer: int
    half_faces: dict
    n_original: int

    @property
    def n_faces(self) -> int:
        return len(self.faces)


def _rightnormal(d):
    return np.array([d[1], -d[0]])


def planarize(config, framework: Framework, stress: StressAssignment | None = None) -> PlanarFramework:
    """Cut every proper crossing and trace the faces of the resulting plane graph.

    Rejects overlapping edges, edges passing through a vertex and points where
    three or more edges cross (:class:`DegeneratePosition`).
    """
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    n = framework.n
    omega_in = np.zeros(len(framework.edges)) if stress is None else np.asarray(stress.omega, dtype=float)
    pairs = framework.pairs
    scale = coordinate_scale(P)
    eps = 1e-9 * scale

    cuts = {k: [] for k in range(len(pairs))}
    points = []
    for a in range(len(pairs)):
        i, j = pairs[a]
        for b in range(a + 1, len(pairs)):
            k, l = pairs[b]
            kind = segment_intersection((P[i], P[j]), (P[k], P[l]))
            if not kind:
                continue
            shared = {i, j} & {k, l}
            if kind.tag == "overlap":
                raise DegeneratePosition(f"edges {tuple(pairs[a])} and {tuple(pairs[b])} overlap")
            if kind.tag == "shared_endpoint" and shared:
                continue
            q = np.array(kind.point)
            for v in (i, j, k, l):
                if np.linalg.norm(q - P[v]) <= eps:
                    raise DegeneratePosition(
                        f"edges {tuple(pairs[a])} and {tuple(pairs[b])} touch at vertex {v}")
            for other in points:
                if np.linalg.norm(q - other) <= eps:
                    raise DegeneratePosition(f"three or more edges cross at {tuple(q)}")
            vid = n + len(points)
            points.append(q)
            for e, (s, t) in ((a, (i, j)), (b, (k, l))):
                d = P[t] - P[s]
                cuts[e].append((float(np.dot(q - P[s], d) / np.dot(d, d)), vid))

    V = np.vstack([P] + [p[None, :] for p in points]) if points else P.copy()
    edges, parent, omega = [], [], []
    for e, (s, t) in enumerate(pairs):
        chain = [int(s)] + [vid for _, vid in sorted(cuts[e])] + [int(t)]
        full = np.linalg.norm(P[t] - P[s])
        for u, v in zip(chain[:-1], chain[1:]):
            edges.append((min(u, v), max(u, v)))
            parent.append(e)
            omega.append(omega_in[e] * full / np.linalg.norm(V[v] - V[u]))
    faces, half_faces = trace_faces(V, edges)
    areas = [signed_area(V, f) for f in faces]
    used = {v for e in edges for v in e}
    # Euler's formula holds exactly for a connected plane graph
    if len(used) != len(V) or len(V) - len(edges) + len(faces) != 2:
        raise DegeneratePosition("plane graph must be connected with every vertex on an edge")
    # the unbounded face is the only one traced clockwise (a tree has one face of zero area)
    outer = int(np.argmin(areas))
    return PlanarFramework(V, tuple(edges), tuple(parent), omega_in[list(parent)] if parent else np.zeros(0),
                           np.asarray(omega, dtype=float),
                           tuple(faces), outer, half_faces, n)


def planar_equilibrium_residual(pf: PlanarFramework) -> float:
    fw = Framework.from_pairs(len(pf.vertices), bars=pf.edges)
    order = [fw.edge_id(a, b) for a, b in pf.edges]
    w = np.zeros(len(fw.edges))
    w[order] = pf.omega
    return equilibrium_residual(pf.vertices, fw, w)


@dataclass(frozen=True)
class Terrain:
    face_gradients: np.ndarray
    face_offsets: np.ndarray
    vertex_heights: np.ndarray
    closure_residual: float


def maxwell_cremona_lift(pf: PlanarFramework, tol: float = 1e-9) -> Terrain:
    """Integrate stress-weighted gradient jumps from the outer face inward.

    Crossing the directed edge ``u -> v`` from its left face to its right
    face adds ``omega * rightnormal(p_v - p_u)`` to the gradient. A mismatch
    on any non-tree dual edge larger than ``tol`` (relative to the largest
    jump) raises :class:`LiftClosureError`.
    """
    V = pf.vertices
    F = pf.n_faces
    w = {}
    for (a, b), om in zip(pf.edges, pf.omega):
        w[(a, b)] = om
        w[(b, a)] = om
    grad = np.full((F, 2), np.nan)
    off = np.full(F, np.nan)
    grad[pf.outer] = 0.0
    off[pf.outer] = 0.0
    adj = {}
    for (u, v), f in pf.half_faces.items():
        g = pf.half_faces[(v, u)]
        adj.setdefault(f, []).append((u, v, g))
    queue = deque([pf.outer])
    while queue:
        f = queue.popleft()
        for u, v, g in adj.get(f, ()):
            if not np.isnan(off[g]):
                continue
            jump = w[(u, v)] * _rightnormal(V[v] - V[u])
            grad[g] = grad[f] + jump
            off[g] = off[f] + (grad[f] - grad[g]) @ V[u]
            queue.append(g)
    resid = 0.0
    big = 1e-300
    for (u, v), f in pf.half_faces.items():
        g = pf.half_faces[(v, u)]
        jump = w[(u, v)] * _rightnormal(V[v] - V[u])
        big = max(big, float(np.abs(jump).max()))
        resid = max(resid, float(np.abs(grad[g] - grad[f] - jump).max()))
        resid = max(resid, abs(float(grad[f] @ V[u] + off[f] - grad[g] @ V[u] - off[g])))
    if resid > tol * max(1.0, big):
        raise LiftClosureError(f"lifting does not close up (residual {resid:.3g}); stress is not in equilibrium")
    heights = np.zeros(len(V))
    seen = np.zeros(len(V), dtype=bool)
    for (u, v), f in sorted(pf.half_faces.items()):
        if not seen[u]:
            heights[u] = grad[f] @ V[u] + off[f]
            seen[u] = True
    return Terrain(grad, off, heights, resid)


@dataclass(frozen=True)
class LiftReport:
    max_closure_residual: float
    is_flat: bool
    mountain_valley_consistent: bool


def verify_lift(pf: PlanarFramework, t: Terrain, tol: float = 1e-9) -> LiftReport:
    """Re-derive heights along a vertex spanning tree and audit the creases.

    The residual is the worst disagreement between the terrain's vertex
    heights and (a) heights propagated from the outer face along edges using
    the face planes, and (b) the per-edge plane increments. Crease signs use
    planes refitted to each face's vertex heights.
    """
    V = pf.vertices
    H = t.vertex_heights
    nbrs = {}
    for (u, v), f in pf.half_faces.items():
        nbrs.setdefault(u, []).append((v, f))
    start = pf.faces[pf.outer][0]
    prop = np.full(len(V), np.nan)
    prop[start] = 0.0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v, f in sorted(nbrs.get(u, ())):
            if np.isnan(prop[v]):
                prop[v] = prop[u] + t.face_gradients[f] @ (V[v] - V[u])
                queue.append(v)
    resid = float(np.nanmax(np.abs(prop - H))) if len(V) else 0.0
    for (u, v), f in pf.half_faces.items():
        resid = max(resid, abs(float(H[v] - H[u] - t.face_gradients[f] @ (V[v] - V[u]))))

    is_flat = bool(np.all(np.abs(H) <= tol))

    planes = {}
    for k, face in enumerate(pf.faces):
        if k == pf.outer:
            planes[k] = np.zeros(2)
            continue
        idx = list(face)
        A = np.column_stack([V[idx], np.ones(len(idx))])
        sol, *_ = np.linalg.lstsq(A, H[idx], rcond=None)
        planes[k] = sol[:2]
    consistent = True
    wmax = float(np.abs(pf.omega).max(initial=0.0))
    for (a, b), om in zip(pf.edges, pf.omega):
        if abs(om) <= tol * max(1.0, wmax):
            continue
        f, g = pf.half_faces[(a, b)], pf.half_faces[(b, a)]
        crease = float((planes[g] - planes[f]) @ _rightnormal(V[b] - V[a]))
        if np.sign(crease) != np.sign(om):
            consistent = False
            break
    return LiftReport(resid, is_flat, consistent)
