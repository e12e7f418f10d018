"""Core 2D types and predicates.

Positions are kept as ``(n, 2)`` float arrays. A :class:`Linkage` is a tuple
of :class:`Chain` objects; its vertices are indexed globally by concatenating
the chains in input order, and its segments likewise (segment ``k`` of a chain
joins vertex ``k`` to ``k + 1``, the closing segment of a closed chain is last).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import StructuralError

COLLINEAR_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class IntersectionKind:
    """Result of :func:`segment_intersection`.

    ``tag`` is one of ``"none"``, ``"proper"``, ``"shared_endpoint"`` or
    ``"overlap"``. ``point`` is set for the two point-like tags, ``segment``
    (a pair of points) for overlaps.
    """

    tag: str
    point: Optional[Point2] = None
    segment: Optional[tuple] = None

    def __bool__(self):
        return self.tag != "none"


NO_INTERSECTION = IntersectionKind("none")


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class Chain:
    """An open or closed polygonal chain."""

    __slots__ = ("vertices", "closed")

    def __init__(self, vertices, closed: bool = False):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise StructuralError(f"chain vertices must have shape (n, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise StructuralError("chain vertices must be finite")
        need = 3 if closed else 2
        if len(v) < need:
            kind = "closed" if closed else "open"
            raise StructuralError(f"{kind} chain needs at least {need} vertices, got {len(v)}")
        seg = np.roll(v, -1, axis=0) - v if closed else np.diff(v, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0.0):
            k = int(np.argmin(lengths))
            raise StructuralError(f"segment {k} has zero length")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "closed", bool(closed))

    def __setattr__(self, name, value):
        raise AttributeError("Chain is immutable")

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        if not isinstance(other, Chain):
            return NotImplemented
        return self.closed == other.closed and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((self.closed, self.vertices.tobytes()))

    def __repr__(self):
        return f"Chain({self.vertices.tolist()!r}, closed={self.closed})"

    @property
    def n_segments(self) -> int:
        return len(self.vertices) if self.closed else len(self.vertices) - 1

    def segment_pairs(self):
        """Local vertex index pairs of the chain's segments."""
        n = len(self.vertices)
        pairs = [(k, k + 1) for k in range(n - 1)]
        if self.closed:
            pairs.append((n - 1, 0))
        return pairs

    def bar_lengths(self) -> np.ndarray:
        v = self.vertices
        seg = np.roll(v, -1, axis=0) - v if self.closed else np.diff(v, axis=0)
        return np.hypot(seg[:, 0], seg[:, 1])


class Linkage:
    """A collection of disjoint chains.

    Simplicity is *not* checked on construction (analysis of degenerate
    inputs needs unchecked linkages); use :func:`is_simple` or
    :func:`require_simple`.
    """

    __slots__ = ("chains", "_offsets")

    def __init__(self, chains: Sequence[Chain]):
        chains = tuple(chains)
        if not chains:
            raise StructuralError("a linkage needs at least one chain")
        for c in chains:
            if not isinstance(c, Chain):
                raise StructuralError(f"expected Chain, got {type(c).__name__}")
        offsets = np.cumsum([0] + [len(c) for c in chains])
        object.__setattr__(self, "chains", chains)
        object.__setattr__(self, "_offsets", tuple(int(o) for o in offsets))

    def __setattr__(self, name, value):
        raise AttributeError("Linkage is immutable")

    def __eq__(self, other):
        if not isinstance(other, Linkage):
            return NotImplemented
        return self.chains == other.chains

    def __hash__(self):
        return hash(self.chains)

    def __repr__(self):
        return f"Linkage({list(self.chains)!r})"

    @property
    def n(self) -> int:
        return self._offsets[-1]

    @property
    def offsets(self) -> tuple:
        """Global index of the first vertex of each chain (plus a final sentinel)."""
        return self._offsets

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate([c.vertices for c in self.chains], axis=0)

    def with_positions(self, positions) -> "Linkage":
        """Same combinatorics, new vertex coordinates."""
        p = np.asarray(positions, dtype=float)
        if p.shape != (self.n, 2):
            raise StructuralError(f"expected positions of shape {(self.n, 2)}, got {p.shape}")
        o = self._offsets
        return Linkage(Chain(p[o[k]:o[k + 1]], c.closed) for k, c in enumerate(self.chains))

    def chain_of(self, vertex: int) -> int:
        return int(np.searchsorted(self._offsets, vertex, side="right") - 1)

    def bars(self) -> list:
        """Global ``(i, j)`` vertex pairs (``i < j``) of every chain segment, in segment order."""
        out = []
        for off, c in zip(self._offsets, self.chains):
            for a, b in c.segment_pairs():
                i, j = off + a, off + b
                out.append((min(i, j), max(i, j)))
        return out

    def segments(self) -> list:
        """Global ``(i, j)`` vertex pairs in segment-id order, oriented along the chain."""
        out = []
        for off, c in zip(self._offsets, self.chains):
            out.extend((off + a, off + b) for a, b in c.segment_pairs())
        return out

    def bar_lengths(self) -> np.ndarray:
        return np.concatenate([c.bar_lengths() for c in self.chains])


# ---------------------------------------------------------------------------
# predicates


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _orient_value(a, b, c):
    det = _cross(a, b, c)
    scale = max(abs(a[0]), abs(a[1]), abs(b[0]), abs(b[1]), abs(c[0]), abs(c[1]))
    if abs(det) <= COLLINEAR_EPS * scale * scale:
        return 0
    return 1 if det > 0 else -1


def orient(a, b, c) -> int:
    """Sign of the signed area of triangle ``abc``.

    Values with magnitude below ``1e-12 * scale**2`` (``scale`` being the
    largest coordinate magnitude involved) are reported as collinear.
    """
    return _orient_value(a, b, c)


def _same_point(p, q):
    scale = max(1.0, abs(p[0]), abs(p[1]), abs(q[0]), abs(q[1]))
    return abs(p[0] - q[0]) <= COLLINEAR_EPS * scale and abs(p[1] - q[1]) <= COLLINEAR_EPS * scale


def _on_segment(p, a, b):
    """``p`` (known collinear with ``ab``) lies within the closed segment."""
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segment_intersection(s1, s2) -> IntersectionKind:
    """Classify how two closed segments meet.

    Each segment is a pair of points. A touching point that is an endpoint of
    both segments is ``shared_endpoint``; any other single contact point
    (crossing or T-junction) is ``proper``.
    """
    a, b = (tuple(map(float, s1[0])), tuple(map(float, s1[1])))
    c, d = (tuple(map(float, s2[0])), tuple(map(float, s2[1])))
    o1, o2 = _orient_value(a, b, c), _orient_value(a, b, d)
    o3, o4 = _orient_value(c, d, a), _orient_value(c, d, b)

    if o1 == 0 and o2 == 0 and o3 == 0 and o4 == 0:
        return _collinear_overlap(a, b, c, d)

    if o1 * o2 > 0 or o3 * o4 > 0:
        return NO_INTERSECTION

    if o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        # strict crossing
        r = (b[0] - a[0], b[1] - a[1])
        s = (d[0] - c[0], d[1] - c[1])
        denom = r[0] * s[1] - r[1] * s[0]
        t = ((c[0] - a[0]) * s[1] - (c[1] - a[1]) * s[0]) / denom
        return IntersectionKind("proper", Point2(a[0] + t * r[0], a[1] + t * r[1]))

    # exactly one endpoint touches the other segment
    for p, (u, v), oo in ((c, (a, b), o1), (d, (a, b), o2), (a, (c, d), o3), (b, (c, d), o4)):
        if oo == 0 and _on_segment(p, u, v):
            pt = Point2(*p)
            ends1 = _same_point(pt, a) or _same_point(pt, b)
            ends2 = _same_point(pt, c) or _same_point(pt, d)
            if ends1 and ends2:
                return IntersectionKind("shared_endpoint", pt)
            return IntersectionKind("proper", pt)
    return NO_INTERSECTION


def _collinear_overlap(a, b, c, d):
    # project onto the dominant axis of ab
    ax = 0 if abs(b[0] - a[0]) >= abs(b[1] - a[1]) else 1
    lo1, hi1 = sorted((a, b), key=lambda p: p[ax])
    lo2, hi2 = sorted((c, d), key=lambda p: p[ax])
    lo = lo1 if lo1[ax] >= lo2[ax] else lo2
    hi = hi1 if hi1[ax] <= hi2[ax] else hi2
    if lo[ax] > hi[ax]:
        return NO_INTERSECTION
    if _same_point(lo, hi):
        pt = Point2(*lo)
        ends1 = _same_point(pt, a) or _same_point(pt, b)
        ends2 = _same_point(pt, c) or _same_point(pt, d)
        tag = "shared_endpoint" if ends1 and ends2 else "proper"
        return IntersectionKind(tag, pt)
    return IntersectionKind("overlap", segment=(Point2(*lo), Point2(*hi)))


@dataclass(frozen=True)
class SimplicityReport:
    simple: bool
    segments: Optional[tuple] = None
    kind: Optional[IntersectionKind] = None

    def __bool__(self):
        return self.simple


def _adjacent_segment_pairs(linkage: Linkage):
    """Map from (seg_a, seg_b), a < b, to the shared global vertex."""
    adj = {}
    base = 0
    off = 0
    for c in linkage.chains:
        m = c.n_segments
        for k in range(m - 1):
            adj[(base + k, base + k + 1)] = off + k + 1
        if c.closed and m >= 3:
            adj[(base, base + m - 1)] = off
        base += m
        off += len(c)
    return adj


def is_simple(linkage: Linkage) -> SimplicityReport:
    """All-pairs segment test.

    Chain-consecutive segments may meet only at their shared vertex; every
    other pair must be disjoint (a single touching point already counts as
    a violation). Returns the first violating pair in lexicographic order.
    """
    P = linkage.positions
    segs = linkage.segments()
    adj = _adjacent_segment_pairs(linkage)
    m = len(segs)
    if m < 2:
        return SimplicityReport(True)
    idx = np.asarray(segs)
    A, B = P[idx[:, 0]], P[idx[:, 1]]
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    scale = max(1.0, float(np.max(np.abs(P))))
    pad = 1e-12 * scale
    # bounding-box prefilter
    overlap = ((lo[:, None, 0] <= hi[None, :, 0] + pad) & (lo[None, :, 0] <= hi[:, None, 0] + pad)
               & (lo[:, None, 1] <= hi[None, :, 1] + pad) & (lo[None, :, 1] <= hi[:, None, 1] + pad))
    cand = np.argwhere(np.triu(overlap, k=1))
    for s, t in cand:
        s, t = int(s), int(t)
        kind = segment_intersection((A[s], B[s]), (A[t], B[t]))
        if not kind:
            continue
        shared = adj.get((s, t))
        if shared is not None and kind.tag == "shared_endpoint" and _same_point(kind.point, P[shared]):
            continue
        return SimplicityReport(False, (s, t), kind)
    return SimplicityReport(True)


def require_simple(linkage: Linkage) -> None:
    from .errors import SimplicityError

    rep = is_simple(linkage)
    if not rep:
        s, t = rep.segments
        raise SimplicityError(
            f"linkage is not simple: segment {s} and segment {t} intersect ({rep.kind.tag} at {rep.kind.point or rep.kind.segment})",
            segments=rep.segments, kind=rep.kind)


def interior_angles(points) -> np.ndarray:
    """Unsigned angle in ``[0, pi]`` at every interior vertex of an open polyline."""
    p = np.asarray(points, dtype=float)
    u = p[:-2] - p[1:-1]
    w = p[2:] - p[1:-1]
    cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    dot = np.einsum("ij,ij->i", u, w)
    return np.abs(np.arctan2(cross, dot))


def turning_angles(points, closed: bool) -> np.ndarray:
    """Signed exterior turn at each vertex (interior vertices only for open chains)."""
    p = np.asarray(points, dtype=float)
    if closed:
        e_in = p - np.roll(p, 1, axis=0)
        e_out = np.roll(p, -1, axis=0) - p
    else:
        e_in = p[1:-1] - p[:-2]
        e_out = p[2:] - p[1:-1]
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.einsum("ij,ij->i", e_in, e_out)
    return np.arctan2(cross, dot)


def is_straightened(chain: Chain, tol: float) -> bool:
    """Every interior angle of the open chain is within ``tol`` radians of pi."""
    if chain.closed:
        raise ValueError("is_straightened applies to open chains only")
    if len(chain) < 3:
        return True
    return bool(np.all(np.pi - interior_angles(chain.vertices) <= tol))


def is_convexified(chain: Chain, tol: float) -> bool:
    """Closed chain is a convex polygon, collinear vertices allowed.

    All turns that are not within ``tol`` of straight share one sign and the
    total turning is one full winding.
    """
    if not chain.closed:
        raise ValueError("is_convexified applies to closed chains only")
    turns = turning_angles(chain.vertices, closed=True)
    bent = turns[np.abs(turns) > tol]
    if len(bent) and not (np.all(bent > 0) or np.all(bent < 0)):
        return False
    return abs(abs(float(np.sum(turns))) - 2 * math.pi) <= max(tol, 1e-9)


def is_unfolded(linkage: Linkage, straight_tol: float, convex_tol: float) -> bool:
    for c in linkage.chains:
        if c.closed:
            if not is_convexified(c, convex_tol):
                return False
        elif not is_straightened(c, straight_tol):
            return False
    return True


def pairwise_distances(linkage_or_positions) -> np.ndarray:
    """Euclidean distance matrix over global vertex indices."""
    if isinstance(linkage_or_positions, Linkage):
        P = linkage_or_positions.positions
    else:
        P = np.asarray(linkage_or_positions, dtype=float)
    diff = P[:, None, :] - P[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def coordinate_scale(positions) -> float:
    """``max(1, max |coordinate|)``, the scale used by relative tolerances."""
    P = np.asarray(positions, dtype=float)
    return max(1.0, float(np.max(np.abs(P)))) if P.size else 1.0


def segments_disjoint_or_adjacent(P, edges, candidate) -> bool:
    """``candidate`` edge crosses none of ``edges`` except at shared endpoints."""
    i, j = candidate
    for a, b in edges:
        if len({a, b, i, j}) < 4:
            shared = ({a, b} & {i, j}).pop()
            other1 = i if j == shared else j
            other2 = a if b == shared else b
            # reject collinear overlap
            if orient(P[shared], P[other1], P[other2]) == 0:
                u = P[other1] - P[shared]
                w = P[other2] - P[shared]
                if np.dot(u, w) > 0:
                    return False
            continue
        if segment_intersection((P[i], P[j]), (P[a], P[b])):
            return False
    return True


def signed_area(V, face) -> float:
    """Shoelace area of a vertex cycle (positive when counterclockwise)."""
    pts = V[list(face)]
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def trace_faces(V, edges):
    """Faces of a plane straight-line graph.

    Returns ``(faces, half_faces)``: each face is the vertex cycle with the
    face on its left, and ``half_faces[(u, v)]`` is the face left of the
    directed edge ``u -> v``. Bounded faces come out counterclockwise.
    """
    nbrs = {}
    for a, b in edges:
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    order = {}
    for v, ns in nbrs.items():
        ns = sorted(set(ns), key=lambda w: math.atan2(V[w][1] - V[v][1], V[w][0] - V[v][0]))
        order[v] = ns
    pos = {v: {w: k for k, w in enumerate(ns)} for v, ns in order.items()}

    half_faces = {}
    faces = []
    for a, b in sorted(edges):
        for start in ((a, b), (b, a)):
            if start in half_faces:
                continue
            fid = len(faces)
            cycle = []
            u, v = start
            while (u, v) not in half_faces:
                half_faces[(u, v)] = fid
                cycle.append(u)
                ns = order[v]
                # face on the left: leave v along the neighbour just clockwise of the way back to u
                w = ns[(pos[v][u] - 1) % len(ns)]
                u, v = v, w
            faces.append(tuple(cycle))
    return faces, half_faces
