"""Bar-and-strut frameworks induced by a linkage, rigidity matrices and equilibrium stresses."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lp
from .errors import LPSolverError, StructuralError
from .geometry import Linkage, interior_angles, require_simple


class EdgeKind(enum.Enum):
    BAR = "bar"
    STRUT = "strut"
    TAUT = "taut_strut"


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    kind: EdgeKind

    @property
    def is_bar(self) -> bool:
        return self.kind is EdgeKind.BAR


@dataclass(frozen=True)
class Framework:
    """Graph on ``n`` vertices with bar/strut labelled edges.

    ``chains`` records ``(offset, length, closed)`` for each chain of the
    source linkage, or is empty for hand-built analysis frameworks.
    """

    n: int
    edges: tuple
    chains: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        index = {}
        for k, e in enumerate(self.edges):
            if not (0 <= e.i < e.j < self.n):
                raise StructuralError(f"edge {k} = ({e.i}, {e.j}) must satisfy 0 <= i < j < n")
            if (e.i, e.j) in index:
                raise StructuralError(f"duplicate edge ({e.i}, {e.j})")
            index[(e.i, e.j)] = k
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_pairs(cls, n: int, bars: Sequence = (), struts: Sequence = ()) -> "Framework":
        edges = [Edge(min(i, j), max(i, j), EdgeKind.BAR) for i, j in bars]
        edges += [Edge(min(i, j), max(i, j), EdgeKind.STRUT) for i, j in struts]
        edges.sort(key=lambda e: (e.i, e.j))
        return cls(n, tuple(edges))

    def edge_id(self, i: int, j: int) -> int:
        return self._index[(min(i, j), max(i, j))]

    @property
    def pairs(self) -> np.ndarray:
        return np.array([(e.i, e.j) for e in self.edges], dtype=int).reshape(-1, 2)

    def mask(self, *kinds: EdgeKind) -> np.ndarray:
        return np.array([e.kind in kinds for e in self.edges], dtype=bool)

    @property
    def bar_mask(self) -> np.ndarray:
        return self.mask(EdgeKind.BAR)

    @property
    def strut_mask(self) -> np.ndarray:
        return self.mask(EdgeKind.STRUT, EdgeKind.TAUT)

    def counts(self) -> dict:
        out = {k.value: 0 for k in EdgeKind}
        for e in self.edges:
            out[e.kind.value] += 1
        return {"n": self.n, "bars": out["bar"], "struts": out["strut"] + out["taut_strut"],
                "taut_struts": out["taut_strut"]}

    def with_kinds(self, kinds) -> "Framework":
        edges = tuple(Edge(e.i, e.j, k) for e, k in zip(self.edges, kinds))
        return Framework(self.n, edges, self.chains)


def build_framework(linkage: Linkage, check_simple: bool = True, extra_bars: Sequence = ()) -> Framework:
    """Bars are the chain segments, struts every other vertex pair.

    ``extra_bars`` adds further bars (analysis inputs such as a braced
    square); they are not chain segments and do not affect taut detection.
    """
    if check_simple:
        require_simple(linkage)
    n = linkage.n
    bars = set(linkage.bars())
    for i, j in extra_bars:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise StructuralError(f"extra bar ({i}, {j}) out of range")
        bars.add((min(i, j), max(i, j)))
    edges = tuple(
        Edge(i, j, EdgeKind.BAR if (i, j) in bars else EdgeKind.STRUT)
        for i, j in itertools.combinations(range(n), 2)
    )
    chains = tuple((off, len(c), c.closed) for off, c in zip(linkage.offsets, linkage.chains))
    return Framework(n, edges, chains)


def _straight_flags(P, offset, length, closed, tol):
    """Per local vertex: True when the chain is straight there within ``tol``."""
    pts = P[offset:offset + length]
    flags = np.zeros(length, dtype=bool)
    if closed:
        ext = np.concatenate([pts[-1:], pts, pts[:1]])
        flags[:] = np.pi - interior_angles(ext) <= tol
    elif length >= 3:
        flags[1:-1] = np.pi - interior_angles(pts) <= tol
    return flags


def classify_taut_struts(config, framework: Framework, tol: float, frozen_chains: Sequence[int] = ()) -> Framework:
    """Mark struts that span a straight subchain.

    A strut ``(i, j)`` within one chain is taut when every interior vertex of
    the subchain between ``i`` and ``j`` is straight within ``tol`` radians
    (for closed chains either of the two arcs qualifies). Struts between
    vertices of a chain listed in ``frozen_chains`` are taut as well.
    """
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    where = {}
    flags = {}
    for c, (off, length, closed) in enumerate(framework.chains):
        for v in range(length):
            where[off + v] = (c, v)
        flags[c] = _straight_flags(P, off, length, closed, tol)
    frozen = set(frozen_chains)
    kinds = []
    for e in framework.edges:
        if e.kind is EdgeKind.BAR:
            kinds.append(EdgeKind.BAR)
            continue
        taut = False
        if e.i in where and e.j in where:
            ci, a = where[e.i]
            cj, b = where[e.j]
            if ci == cj:
                off, length, closed = framework.chains[ci]
                f = flags[ci]
                if ci in frozen:
                    taut = True
                elif closed:
                    lo, hi = min(a, b), max(a, b)
                    arc1 = f[lo + 1:hi]
                    arc2 = np.concatenate([f[hi + 1:], f[:lo]])
                    taut = bool(np.all(arc1)) or bool(np.all(arc2))
                else:
                    taut = bool(np.all(f[min(a, b) + 1:max(a, b)]))
        kinds.append(EdgeKind.TAUT if taut else EdgeKind.STRUT)
    return framework.with_kinds(kinds)


def rigidity_matrix(config, framework: Framework) -> np.ndarray:
    """Row ``e = (i, j)`` holds ``p_i - p_j`` in the columns of ``i`` and ``p_j - p_i`` in those of ``j``.

    Columns are ordered ``(x_0, y_0, x_1, y_1, ...)``.
    """
    P = config.positions if isinstance(config, Linkage) else np.asarray(config, dtype=float)
    pairs = framework.pairs
    m = len(pairs)
    R = np.zeros((m, 2 * framework.n))
    if m == 0:
        return R
    d = P[pairs[:, 0]] - P[pairs[:, 1]]
    rows = np.arange(m)
    R[rows, 2 * pairs[:, 0]] = d[:, 0]
    R[rows, 2 * pairs[:, 0] + 1] = d[:, 1]
    R[rows, 2 * pairs[:, 1]] = -d[:, 0]
    R[rows, 2 * pairs[:, 1] + 1] = -d[:, 1]
    return R


@dataclass(frozen=True)
class StressAssignment:
    """One stress per framework edge; ``normalization`` is the sum of absolute values."""

    omega: np.ndarray
    normalization: float

    @classmethod
    def zero(cls, framework: Framework) -> "StressAssignment":
        return cls(np.zeros(len(framework.edges)), 0.0)

    @classmethod
    def from_values(cls, omega) -> "StressAssignment":
        w = np.asarray(omega, dtype=float)
        return cls(w, float(np.abs(w).sum()))

    def scaled(self, c: float) -> "StressAssignment":
        return StressAssignment.from_values(c * self.omega)


def equilibrium_residual(config, framework: Framework, omega) -> float:
    """Largest per-coordinate imbalance of ``transpose(R) @ omega``."""
    R = rigidity_matrix(config, framework)
    if R.size == 0:
        return 0.0
    return float(np.max(np.abs(R.T @ np.asarray(omega, dtype=float))))


def find_equilibrium_stress(config, framework: Framework, tol: float = 1e-9) -> Optional[StressAssignment]:
    """Return a nonzero equilibrium stress (struts nonnegative), or ``None``.

    Stresses carried by bars alone form a linear space and are found from the
    nullspace of the bar columns. Otherwise any nonzero stress loads some
    strut, so the sum of strut stresses is pinned to one and the remaining
    feasibility LP (bar stresses split into positive and negative parts) is
    handed to the simplex solver. The witness is rescaled to ``sum |w| = 1``
    with its first significant entry positive when the sign is free.
    A :class:`~unlock.errors.LPSolverError` signals a numerical failure,
    never "no stress".
    """
    R = rigidity_matrix(config, framework)
    m = len(framework.edges)
    if m == 0:
        return None
    bar = framework.bar_mask
    bar_ids = np.flatnonzero(bar)
    strut_ids = np.flatnonzero(~bar)
    scale = max(1.0, float(np.abs(R).max(initial=0.0)))

    if bar_ids.size:
        sub = R.T[:, bar_ids]
        _, s, vt = np.linalg.svd(sub, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * scale))
        if rank < bar_ids.size:
            omega = np.zeros(m)
            omega[bar_ids] = vt[rank]
            return _normalized(omega, signed=True)
    if strut_ids.size == 0:
        return None

    cols = np.concatenate([R.T[:, strut_ids], R.T[:, bar_ids], -R.T[:, bar_ids]], axis=1)
    norm_row = np.zeros(cols.shape[1])
    norm_row[:strut_ids.size] = 1.0
    A = np.vstack([cols / scale, norm_row])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    res = lp.simplex(np.zeros(A.shape[1]), A, b, tol=tol)
    if res.status == "infeasible":
        return None
    if res.status != "optimal":
        raise LPSolverError(f"stress LP ended with status {res.status}")
    x = res.x
    k, nb = strut_ids.size, bar_ids.size
    omega = np.zeros(m)
    omega[strut_ids] = x[:k]
    omega[bar_ids] = x[k:k + nb] - x[k + nb:]
    omega = _polish(R, omega, framework)
    return _normalized(omega, signed=False)


def _normalized(omega, signed):
    total = float(np.abs(omega).sum())
    if total <= 0.0:
        raise LPSolverError("stress solver returned a vanishing witness")
    omega = omega / total
    if signed:
        big = np.flatnonzero(np.abs(omega) > 1e-9)
        if omega[big[0]] < 0:
            omega = -omega
    omega[np.abs(omega) < 1e-15] = 0.0
    return StressAssignment(omega, float(np.abs(omega).sum()))


def _polish(R, omega, framework):
    """Re-solve on the witness support so equilibrium holds to round-off."""
    support = np.flatnonzero(np.abs(omega) > 1e-12)
    if support.size == 0:
        return omega
    sub = R.T[:, support]
    # nullspace vector of the support columns closest to the simplex witness
    _, s, vt = np.linalg.svd(sub, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(s.max(initial=0.0), 1.0)))
    null = vt[rank:]
    if null.shape[0] == 0:
        return omega
    w = omega[support]
    proj = null.T @ (null @ w)
    if np.linalg.norm(proj - w) > 1e-6 * max(np.linalg.norm(w), 1e-300):
        return omega
    out = np.zeros_like(omega)
    out[support] = proj
    struts = framework.strut_mask
    out[struts] = np.where(out[struts] < 0, np.maximum(out[struts], 0.0), out[struts])
    return out
