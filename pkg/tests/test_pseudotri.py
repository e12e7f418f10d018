import itertools
import math

import numpy as np
import pytest

from _gen import general_position_points, random_open_chain, trace_invariants
from unlock.errors import DegeneratePosition, FlipNotUnique
from unlock.flow import UNFOLDED, check_monotone_expansion
from unlock.framework import Framework, rigidity_matrix
from unlock.geometry import Chain, Linkage, is_straightened, segment_intersection
from unlock.pseudotri import (AlignmentEvent, Mechanism, Pseudotriangulation, Terminated,
                              build_pointed_pseudotriangulation, dof_count, flow_to_alignment, gauge_fixed_matrix,
                              hull_edges, is_pointed, local_revise, make_mechanism, mechanism_velocity,
                              run_streinu_unfold, verify_pseudotriangulation)


def brute_force_pointed_sets(P, bars=()):
    """Every non-crossing edge set of size 2n - 3 that contains the bars and leaves all vertices pointed."""
    n = len(P)
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for S in itertools.combinations(pairs, 2 * n - 3):
        if not set(bars) <= set(S):
            continue
        crossing = False
        for (a, b), (c, d) in itertools.combinations(S, 2):
            if {a, b} & {c, d}:
                continue
            if segment_intersection((P[a], P[b]), (P[c], P[d])):
                crossing = True
                break
        if crossing:
            continue
        if all(is_pointed(P, S, v) for v in range(n)):
            out.append(tuple(sorted(S)))
    return out


def test_triangle():
    P = np.array([(0, 0), (1, 0), (0, 1)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [])
    assert pt.edges == ((0, 1), (0, 2), (1, 2))
    assert len(pt.faces) == 1
    assert verify_pseudotriangulation(P, pt).ok


def test_convex_quadrilateral_matches_enumeration():
    P = np.array([(0, 0), (2, 0), (2.2, 1.8), (0.1, 2)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [])
    valid = brute_force_pointed_sets(P)
    assert len(valid) == 2
    assert pt.edges in valid
    assert set(hull_edges(P)) < set(pt.edges)
    assert len(pt.faces) == 2 and all(len(f.corners) == 3 for f in pt.faces)


def test_interior_point_matches_enumeration():
    P = np.array([(0, 0), (4, 0), (2, 3), (2, 1)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [])
    valid = brute_force_pointed_sets(P)
    assert len(valid) == 3
    assert pt.edges in valid
    spokes = [e for e in pt.edges if 3 in e]
    assert len(spokes) == 2


def test_bars_are_kept_and_position_checked():
    P = np.array([(0, 0), (4, 0), (2, 3), (2, 1)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [(2, 3)])
    assert (2, 3) in pt.edges and pt.bars == frozenset({(2, 3)})
    with pytest.raises(DegeneratePosition):
        build_pointed_pseudotriangulation(np.array([(0, 0), (1, 0), (2, 0), (0, 1)], dtype=float), [])


def test_triangulation_is_not_pointed():
    P = np.array([(0, 0), (2, 0), (2, 2), (0, 2), (1, 0.9)], dtype=float)
    edges = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4), (2, 4), (3, 4)]
    rep = verify_pseudotriangulation(P, Pseudotriangulation(5, tuple(edges), frozenset()))
    assert not rep.pointed_ok
    assert not rep.edge_count_ok


def test_deleted_edge_fails_count():
    P = np.array([(0, 0), (2, 0), (2.2, 1.8), (0.1, 2)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [])
    short = Pseudotriangulation(4, pt.edges[:-1], pt.bars)
    assert not verify_pseudotriangulation(P, short).edge_count_ok


def test_random_chains_give_valid_pts():
    rng = np.random.default_rng(17)
    for _ in range(15):
        n = int(rng.integers(3, 10))
        P = general_position_points(rng, n)
        order = np.argsort(P[:, 0])
        bars = [(int(min(a, b)), int(max(a, b))) for a, b in zip(order[:-1], order[1:])]
        pt = build_pointed_pseudotriangulation(P, bars)
        rep = verify_pseudotriangulation(P, pt)
        assert rep.ok, rep
        assert len(pt.edges) == 2 * n - 3


def test_triangle_mechanism_velocity():
    P = np.array([(0, 0), (1, 0), (1, 1)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [(0, 1), (1, 2)])
    m = make_mechanism(pt, P)
    assert m.removed_edge == (0, 2) and m.pin == (0, 1)
    v = mechanism_velocity(P, m).v
    assert np.linalg.norm(v) == pytest.approx(1.0)
    # vertex 2 turns about vertex 1
    assert np.allclose(v[:2], 0.0, atol=1e-12)
    assert abs(v[2] @ (P[2] - P[1])) <= 1e-12
    h = 1e-6
    assert np.linalg.norm(P[2] + h * v[2] - P[0]) > np.linalg.norm(P[2] - P[0])
    neg = P - h * v
    assert np.linalg.norm(neg[2] - neg[0]) < np.linalg.norm(P[2] - P[0])


def test_quadrilateral_mechanism_rank():
    P = np.array([(0, 0), (2, 0), (2.2, 1.8), (0.1, 2)], dtype=float)
    pt = build_pointed_pseudotriangulation(P, [])
    m = make_mechanism(pt, P)
    assert m.removed_edge in hull_edges(P)
    R = rigidity_matrix(P, Framework.from_pairs(4, bars=m.edges))
    assert np.linalg.matrix_rank(R) == 2 * 4 - 4
    assert dof_count(P, m.edges, m.pin) == 1
    M = gauge_fixed_matrix(P, m.edges, m.pin)
    assert M.shape == (4 + 3, 8)


def test_mechanism_edges_stay_rigid():
    rng = np.random.default_rng(4)
    for _ in range(10):
        L = random_open_chain(rng, int(rng.integers(3, 9)))
        P = L.positions
        m = make_mechanism(build_pointed_pseudotriangulation(P, L.bars()), P)
        v = mechanism_velocity(P, m).v
        for i, j in m.edges:
            assert abs((P[i] - P[j]) @ (v[i] - v[j])) <= 1e-10
        i, j = m.removed_edge
        assert (P[i] - P[j]) @ (v[i] - v[j]) > 0


def test_gauge_independence_up_to_scale():
    rng = np.random.default_rng(5)
    for _ in range(8):
        L = random_open_chain(rng, int(rng.integers(4, 8)))
        P = L.positions
        m = make_mechanism(build_pointed_pseudotriangulation(P, L.bars()), P)
        other = next(e for e in m.edges if e != m.pin)
        m2 = Mechanism(m.pt, m.removed_edge, other)
        v1, v2 = mechanism_velocity(P, m).v, mechanism_velocity(P, m2).v
        pairs = np.array(list(itertools.combinations(range(len(P)), 2)))
        d = P[pairs[:, 0]] - P[pairs[:, 1]]
        r1 = np.einsum("ij,ij->i", d, v1[pairs[:, 0]] - v1[pairs[:, 1]])
        r2 = np.einsum("ij,ij->i", d, v2[pairs[:, 0]] - v2[pairs[:, 1]])
        c = (r1 @ r2) / (r2 @ r2)
        assert c > 0
        assert np.abs(r1 - c * r2).max() <= 1e-8


def test_flow_to_right_angle_event():
    P = np.array([(0, 0), (1, 0), (1, 1)], dtype=float)
    m = make_mechanism(build_pointed_pseudotriangulation(P, [(0, 1), (1, 2)]), P)
    ev = flow_to_alignment(P, m).outcome
    assert isinstance(ev, AlignmentEvent)
    assert ev.vertex == 1 and set(ev.edges) == {(0, 1), (1, 2)}
    # unit-speed rotation on the unit circle from 90 to 180 degrees
    assert ev.t_event == pytest.approx(math.pi / 2, abs=1e-6)
    Q = ev.config_at_event
    a, b = Q[0] - Q[1], Q[2] - Q[1]
    angle = math.atan2(abs(a[0] * b[1] - a[1] * b[0]), a @ b)
    assert math.pi - angle <= 1e-9


def test_termination_wins_over_alignment():
    P = np.array([(0, 0), (1, 0), (1, 1)], dtype=float)
    m = make_mechanism(build_pointed_pseudotriangulation(P, [(0, 1), (1, 2)]), P)
    res = flow_to_alignment(P, m, done=lambda Q: is_straightened(Chain(Q), 1e-3))
    assert isinstance(res.outcome, Terminated)


def test_already_aligned_start_is_immediate_event():
    P = np.array([(0, 0), (1, 0), (2, 0)], dtype=float)
    pt = Pseudotriangulation(3, ((0, 1), (0, 2), (1, 2)), frozenset({(0, 1), (1, 2)}))
    ev = flow_to_alignment(P, Mechanism(pt, (0, 2), (0, 1))).outcome
    assert isinstance(ev, AlignmentEvent)
    assert ev.t_event == 0.0 and ev.vertex == 1


def _kite(dl):
    return np.array([(0, 0), (1, dl), (1, 2), (2, 0)], dtype=float)


def test_local_revise_flip_and_involution():
    bars = frozenset({(0, 1)})
    before = Pseudotriangulation(4, ((0, 1), (0, 2), (1, 2), (1, 3), (2, 3)), bars)
    assert verify_pseudotriangulation(_kite(-1e-3), before).ok
    # vertex 1 crosses the segment 0-3: edges (0,1) and (1,3) align there
    ev = AlignmentEvent(0.0, 1, ((0, 1), (1, 3)), _kite(0.0), _kite(1e-3))
    after = local_revise(before, ev)
    assert set(before.edges) - set(after.edges) == {(1, 3)}
    assert set(after.edges) - set(before.edges) == {(0, 3)}
    assert len(after.edges) == len(before.edges) == 2 * 4 - 3
    assert verify_pseudotriangulation(_kite(1e-3), after).ok
    # brute force: the flipped set is the only valid one that swaps an aligned edge for another
    near = [S for S in brute_force_pointed_sets(_kite(1e-3), bars)
            if len(set(S) ^ set(before.edges)) == 2 and set(before.edges) - set(S) <= set(ev.edges)]
    assert near == [after.edges]
    back = local_revise(after, AlignmentEvent(0.0, 0, ((0, 1), (0, 3)), _kite(0.0), _kite(-1e-3)))
    assert back.edges == before.edges


def test_local_revise_bars_only_is_not_flippable():
    pt = Pseudotriangulation(3, ((0, 1), (0, 2), (1, 2)), frozenset({(0, 1), (1, 2)}))
    P = np.array([(0, 0), (1, 0), (2, 0)], dtype=float)
    with pytest.raises(FlipNotUnique):
        local_revise(pt, AlignmentEvent(0.0, 1, ((0, 1), (1, 2)), P, P))


def test_streinu_l_chain_one_section():
    tr = run_streinu_unfold(Linkage([Chain([(0, 0), (1, 0), (1, 1)])]))
    assert tr.outcome == UNFOLDED and tr.sections == 1


def test_streinu_already_unfolded():
    tr = run_streinu_unfold(Linkage([Chain([(0, 0), (1, 0), (2, 0.0)])]))
    assert tr.outcome == UNFOLDED and tr.sections == 0


def test_streinu_random_chain_invariants():
    rng = np.random.default_rng(2)
    for _ in range(3):
        n = int(rng.integers(4, 7))
        tr = run_streinu_unfold(random_open_chain(rng, n))
        assert tr.outcome == UNFOLDED
        assert 0 < tr.sections <= 4 * n * n
        simple, drift = trace_invariants(tr)
        assert simple and drift <= 1e-8
        assert check_monotone_expansion(tr, 1e-6).passed


def test_streinu_polygon():
    L = Linkage([Chain([(0, 0), (4, 2), (0, 4), (1.5, 2)], closed=True)])
    tr = run_streinu_unfold(L)
    assert tr.outcome == UNFOLDED
    assert check_monotone_expansion(tr, 1e-6).passed


def test_streinu_rejects_collinear_input():
    tr_in = Linkage([Chain([(0, 0), (1, 0), (2, 0), (2, 1)])])
    with pytest.raises(DegeneratePosition):
        run_streinu_unfold(tr_in)


def test_streinu_deterministic():
    L = random_open_chain(np.random.default_rng(8), 5)
    a, b = run_streinu_unfold(L), run_streinu_unfold(L)
    assert a.sections == b.sections
    assert all(x.config.positions.tobytes() == y.config.positions.tobytes() for x, y in zip(a.frames, b.frames))
