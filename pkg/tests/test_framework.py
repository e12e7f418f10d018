import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from _gen import random_linkage, random_open_chain
from unlock.errors import SimplicityError, StructuralError
from unlock.framework import (EdgeKind, Framework, StressAssignment, build_framework, classify_taut_struts,
                              equilibrium_residual, find_equilibrium_stress, rigidity_matrix)
from unlock.geometry import Chain, Linkage
from unlock.lp import simplex

SQUARE = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)


def braced_square():
    return Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)])


def test_build_framework_counts():
    fw = build_framework(Linkage([Chain([(0, 0), (1, 0), (1, 1)])]))
    assert fw.counts() == {"n": 3, "bars": 2, "struts": 1, "taut_struts": 0}
    assert [(e.i, e.j) for e in fw.edges if not e.is_bar] == [(0, 2)]
    fw = build_framework(Linkage([Chain([(0, 0), (4, 0), (2, 3)], closed=True)]))
    assert fw.counts()["bars"] == 3 and fw.counts()["struts"] == 0


def test_two_segments_by_enumeration():
    L = Linkage([Chain([(0, 0), (1, 0)]), Chain([(0, 1), (1, 1)])])
    fw = build_framework(L)
    pairs = list(itertools.combinations(range(4), 2))
    bars = {(0, 1), (2, 3)}
    struts = [p for p in pairs if p not in bars]
    assert len(struts) == 4
    assert sorted((e.i, e.j) for e in fw.edges if not e.is_bar) == struts


def test_edge_count_identity_and_cross_chain_struts():
    rng = np.random.default_rng(2)
    for _ in range(20):
        L = random_linkage(rng)
        fw = build_framework(L)
        n = L.n
        assert len(fw.edges) == n * (n - 1) // 2
        assert {(e.i, e.j) for e in fw.edges if e.is_bar} == set(L.bars())


def test_build_framework_rejects_non_simple():
    with pytest.raises(SimplicityError):
        build_framework(Linkage([Chain([(0, 0), (2, 0), (1, 1), (1, -1)])]))
    with pytest.raises(StructuralError):
        Framework.from_pairs(3, bars=[(0, 1), (1, 0)])


def test_classify_taut_struts():
    straight = Linkage([Chain([(0, 0), (1, 0), (2, 0)])])
    fw = classify_taut_struts(straight, build_framework(straight), 1e-6)
    assert fw.edges[fw.edge_id(0, 2)].kind is EdgeKind.TAUT
    ell = Linkage([Chain([(0, 0), (1, 0), (1, 1)])])
    fw = classify_taut_struts(ell, build_framework(ell), 1e-6)
    assert fw.edges[fw.edge_id(0, 2)].kind is EdgeKind.STRUT
    # only the middle-left angle straight: (0,2) taut, (1,3) and (0,3) not
    L = Linkage([Chain([(0, 0), (1, 0), (2, 0), (2, 1)])])
    fw = classify_taut_struts(L, build_framework(L), 1e-6)
    kinds = {(e.i, e.j): e.kind for e in fw.edges}
    assert kinds[(0, 2)] is EdgeKind.TAUT
    assert kinds[(1, 3)] is EdgeKind.STRUT
    assert kinds[(0, 3)] is EdgeKind.STRUT


def test_rigidity_matrix_single_bar():
    fw = Framework.from_pairs(2, bars=[(0, 1)])
    R = rigidity_matrix(np.array([(0.0, 0.0), (1.0, 0.0)]), fw)
    # p_i - p_j in the columns of i, p_j - p_i in those of j
    assert np.array_equal(R, [[-1.0, 0.0, 1.0, 0.0]])


def test_rigidity_matrix_row_semantics():
    rng = np.random.default_rng(0)
    L = random_open_chain(rng, 6)
    fw = build_framework(L)
    P = L.positions
    v = rng.normal(size=P.shape)
    R = rigidity_matrix(P, fw)
    for k, e in enumerate(fw.edges):
        assert R[k] @ v.reshape(-1) == pytest.approx((P[e.i] - P[e.j]) @ (v[e.i] - v[e.j]), abs=1e-12)


def test_rigidity_matrix_annihilates_rigid_motions():
    rng = np.random.default_rng(1)
    for _ in range(10):
        L = random_linkage(rng)
        P = L.positions
        R = rigidity_matrix(P, build_framework(L))
        scale = np.abs(R).max() * np.abs(P).max()
        for v in (np.tile([1.0, 0.0], (len(P), 1)), np.tile([0.0, 1.0], (len(P), 1)), np.c_[-P[:, 1], P[:, 0]]):
            assert np.abs(R @ v.reshape(-1)).max() <= 1e-10 * max(1.0, scale)


def test_braced_square_stress_by_substitution():
    fw = braced_square()
    omega = np.array([1.0 if not ({e.i, e.j} in ({0, 2}, {1, 3})) else -1.0 for e in fw.edges])
    R = rigidity_matrix(SQUARE, fw)
    assert np.abs(R.T @ omega).max() == 0.0


def test_find_stress_braced_square():
    fw = braced_square()
    s = find_equilibrium_stress(SQUARE, fw)
    assert s is not None
    assert s.normalization == pytest.approx(1.0)
    assert equilibrium_residual(SQUARE, fw, s.omega) <= 1e-9
    diag = [fw.edge_id(0, 2), fw.edge_id(1, 3)]
    sides = [k for k in range(6) if k not in diag]
    # the stress space is one-dimensional here, so the witness is +-(1, -1) / 6
    assert np.allclose(np.abs(s.omega), 1 / 6)
    assert np.all(np.sign(s.omega[sides]) == -np.sign(s.omega[diag[0]]))


def test_braced_square_with_struts_sign_constraint():
    # diagonals as struts: the stress must put a nonnegative value on them
    fw = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3)], struts=[(0, 2), (1, 3)])
    s = find_equilibrium_stress(SQUARE, fw)
    assert s is not None
    assert equilibrium_residual(SQUARE, fw, s.omega) <= 1e-9
    assert s.omega[fw.strut_mask].min() >= -1e-12
    assert s.normalization == pytest.approx(1.0)


def test_no_stress_single_bar_and_chains():
    fw = Framework.from_pairs(2, bars=[(0, 1)])
    assert find_equilibrium_stress(np.array([(0.0, 0.0), (1.0, 0.0)]), fw) is None
    rng = np.random.default_rng(4)
    for _ in range(10):
        L = random_open_chain(rng, int(rng.integers(3, 8)))
        assert find_equilibrium_stress(L.positions, build_framework(L)) is None


def _scipy_stress_exists(P, fw):
    """Independent LP: maximise total strut stress, or any bar stress, under equilibrium and box bounds."""
    R = rigidity_matrix(P, fw)
    m = len(fw.edges)
    strut = fw.strut_mask
    bounds = [(0, 1) if strut[k] else (-1, 1) for k in range(m)]
    best = 0.0
    for k in range(m):
        for sign in ((1.0,) if strut[k] else (1.0, -1.0)):
            c = np.zeros(m)
            c[k] = -sign
            res = linprog(c, A_eq=R.T, b_eq=np.zeros(R.shape[1]), bounds=bounds, method="highs")
            if res.status == 0:
                best = max(best, -res.fun)
    return best > 1e-7


def test_stress_verdict_matches_scipy():
    rng = np.random.default_rng(8)
    cases = [(SQUARE, braced_square()),
             (SQUARE, Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3)], struts=[(0, 2), (1, 3)]))]
    for _ in range(8):
        L = random_linkage(rng, max_total=7)
        cases.append((L.positions, build_framework(L)))
    for _ in range(6):
        P = rng.uniform(0, 3, size=(5, 2))
        pairs = list(itertools.combinations(range(5), 2))
        pick = rng.permutation(len(pairs))[:8]
        cases.append((P, Framework.from_pairs(5, bars=[pairs[k] for k in pick[:6]],
                                              struts=[pairs[k] for k in pick[6:]])))
    for P, fw in cases:
        ours = find_equilibrium_stress(P, fw)
        assert (ours is not None) == _scipy_stress_exists(P, fw)
        if ours is not None:
            assert equilibrium_residual(P, fw, ours.omega) <= 1e-9
            assert ours.omega[fw.strut_mask].min(initial=0.0) >= -1e-12


def test_simplex_against_linprog():
    rng = np.random.default_rng(3)
    for _ in range(30):
        m, n = int(rng.integers(1, 5)), int(rng.integers(2, 8))
        A = rng.normal(size=(m, n))
        x0 = np.abs(rng.normal(size=n))
        b = A @ x0
        c = np.abs(rng.normal(size=n)) + rng.normal(size=n) * 0.3
        ours = simplex(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        if ref.status == 0:
            assert ours.status == "optimal"
            assert ours.objective == pytest.approx(ref.fun, abs=1e-7)
            assert np.abs(A @ ours.x - b).max() <= 1e-8
            assert ours.x.min() >= -1e-9
        elif ref.status == 3:
            assert ours.status == "unbounded"
    infeasible = simplex(np.zeros(2), np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert infeasible.status == "infeasible"


def test_stress_assignment_helpers():
    fw = braced_square()
    z = StressAssignment.zero(fw)
    assert z.normalization == 0.0 and len(z.omega) == 6
    s = StressAssignment.from_values([1, -2, 0, 0, 0, 0])
    assert s.normalization == 3.0
    assert s.scaled(2.0).normalization == 6.0
