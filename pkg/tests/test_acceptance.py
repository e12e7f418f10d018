"""End-to-end acceptance criteria; each test reports one PASS/FAIL line at the end of the run."""

import filecmp
import math
import os
import subprocess
import sys
import time
from importlib import resources

import numpy as np

from _gen import (general_position_points, qp_oracle, random_linkage, random_open_chain, random_polygon, random_qp,
                  trace_invariants)
from unlock.flow import UNFOLDED, check_monotone_expansion, run_unfold
from unlock.framework import Framework, StressAssignment, build_framework, equilibrium_residual, \
    find_equilibrium_stress
from unlock.geometry import interior_angles, is_convexified, is_straightened, pairwise_distances
from unlock.io import load_linkage
from unlock.lifting import maxwell_cremona_lift, planarize, verify_lift
from unlock.pseudotri import (build_pointed_pseudotriangulation, make_mechanism, nullspace_report,
                              run_streinu_unfold, verify_pseudotriangulation)
from unlock.qp import kkt_residual, qp_solve

DATA = resources.files("unlock") / "data"
SQUARE = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)

MONOTONE_TOL = 1e-6
BAR_TOL = 1e-8
ANGLE_TOL = 1e-3


def _trace_checks(trace):
    simple, drift = trace_invariants(trace)
    mono = check_monotone_expansion(trace, MONOTONE_TOL)
    return simple, drift, mono.max_violation


def _flow_suite(linkages, runner, final_ok):
    worst_drift = worst_mono = 0.0
    failures = []
    t0 = time.perf_counter()
    for k, L in enumerate(linkages):
        tr = runner(L)
        simple, drift, mono = _trace_checks(tr)
        worst_drift, worst_mono = max(worst_drift, drift), max(worst_mono, mono)
        ok = tr.outcome == UNFOLDED and final_ok(tr.final) and simple and drift <= BAR_TOL and mono <= MONOTONE_TOL
        if not ok:
            failures.append((k, L.n, tr.outcome))
    return failures, worst_drift, worst_mono, time.perf_counter() - t0


def test_straightening_open_chains(acceptance):
    rng = np.random.default_rng(2024)
    chains = [random_open_chain(rng, 4 + k % 9) for k in range(25)]

    def straight(L):
        return all(np.max(math.pi - interior_angles(c.vertices)) <= ANGLE_TOL for c in L.chains)

    failures, drift, mono, secs = _flow_suite(chains, run_unfold, straight)
    ok = not failures and secs <= 300
    acceptance("straightening (25 open chains, n 4..12, cdr)", ok,
               f"failures={failures} max_bar_drift={drift:.2e} max_monotone_violation={mono:.2e} time={secs:.0f}s")
    assert ok


def test_convexifying_polygons(acceptance):
    rng = np.random.default_rng(2025)
    polys = [random_polygon(rng, 4 + k % 9) for k in range(25)]
    failures, drift, mono, secs = _flow_suite(
        polys, run_unfold, lambda L: all(is_convexified(c, ANGLE_TOL) for c in L.chains))
    ok = not failures and secs <= 300
    acceptance("convexification (25 polygons, n 4..12, cdr)", ok,
               f"failures={failures} max_bar_drift={drift:.2e} max_monotone_violation={mono:.2e} time={secs:.0f}s")
    assert ok


def _min_cross_chain_distance(L):
    D = pairwise_distances(L)
    owner = np.concatenate([[k] * len(c) for k, c in enumerate(L.chains)])
    return float(D[owner[:, None] != owner[None, :]].min())


def test_multi_chain_untangling(acceptance):
    L = load_linkage(DATA / "fig1_reconstruction.json").linkage
    tr = run_unfold(L)
    chain_ok = all(is_straightened(c, ANGLE_TOL) for c in tr.final.chains if not c.closed)
    d0, d1 = _min_cross_chain_distance(L), _min_cross_chain_distance(tr.final)
    simple, drift, mono = _trace_checks(tr)
    ok = tr.outcome == UNFOLDED and chain_ok and d1 > d0 and simple
    acceptance("multi-chain untangling (3 triangles + open chain)", ok,
               f"outcome={tr.outcome} steps={tr.steps} chain_straight={chain_ok} "
               f"min_cross_distance {d0:.4f} -> {d1:.4f} bar_drift={drift:.2e} monotone={mono:.2e}")
    assert ok


def test_stress_certificate(acceptance):
    rng = np.random.default_rng(7)
    found = []
    for k in range(50):
        L = random_linkage(rng, max_total=10)
        if find_equilibrium_stress(L.positions, build_framework(L)) is not None:
            found.append(k)
    fw = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)])
    s = find_equilibrium_stress(SQUARE, fw)
    resid = equilibrium_residual(SQUARE, fw, s.omega) if s is not None else math.inf
    fw2 = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3)], struts=[(0, 2), (1, 3)])
    s2 = find_equilibrium_stress(SQUARE, fw2)
    resid2 = equilibrium_residual(SQUARE, fw2, s2.omega) if s2 is not None else math.inf
    min_strut = float(s2.omega[fw2.strut_mask].min()) if s2 is not None else -math.inf
    ok = not found and resid <= 1e-9 and resid2 <= 1e-9 and min_strut >= -1e-12
    acceptance("stress certificate (50 random linkages + braced square)", ok,
               f"linkages_with_stress={found} braced_residual={resid:.1e} "
               f"strut_braced_residual={resid2:.1e} min_strut_stress={min_strut:.3g}")
    assert ok


def test_maxwell_cremona_round_trip(acceptance):
    fw = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)])
    s = find_equilibrium_stress(SQUARE, fw)
    pf = planarize(SQUARE, fw, s)
    terrain = maxwell_cremona_lift(pf)
    rep = verify_lift(pf, terrain)
    h = terrain.vertex_heights
    centre = int(np.argmin(np.linalg.norm(pf.vertices - 0.5, axis=1)))
    highest = h[centre] > np.delete(h, centre).max()
    flat = verify_lift(pf0 := planarize(SQUARE, fw, StressAssignment.zero(fw)), maxwell_cremona_lift(pf0))
    ok = rep.max_closure_residual <= 1e-9 and not rep.is_flat and highest and flat.is_flat
    acceptance("Maxwell-Cremona round trip (braced square)", ok,
               f"closure_residual={rep.max_closure_residual:.1e} non_flat={not rep.is_flat} "
               f"centre_strictly_highest={highest} zero_stress_flat={flat.is_flat}")
    assert ok


def test_qp_oracle_equivalence(acceptance):
    rng = np.random.default_rng(100)
    worst_x = worst_kkt = 0.0
    for _ in range(100):
        E, e, G, h = random_qp(rng)
        nv = max(E.shape[1], G.shape[1])
        r = qp_solve(E, e, G, h, n_vars=nv)
        worst_x = max(worst_x, float(np.linalg.norm(r.x - qp_oracle(E, e, G, h))))
        worst_kkt = max(worst_kkt, kkt_residual(r, E, e, G, h))
    ok = worst_x <= 1e-8 and worst_kkt <= 1e-8
    acceptance("QP oracle equivalence (100 instances, <= 12 inequalities)", ok,
               f"max_solution_gap={worst_x:.1e} max_kkt_residual={worst_kkt:.1e}")
    assert ok


def test_pseudotriangulation_combinatorics(acceptance):
    rng = np.random.default_rng(50)
    bad = []
    for k in range(50):
        n = int(rng.integers(3, 11))
        P = general_position_points(rng, n)
        # an x-monotone polyline through the points is always simple
        order = np.argsort(P[:, 0])
        bars = [(int(min(a, b)), int(max(a, b))) for a, b in zip(order[:-1], order[1:])]
        pt = build_pointed_pseudotriangulation(P, bars)
        rep = verify_pseudotriangulation(P, pt)
        m = make_mechanism(pt, P)
        s, _ = nullspace_report(P, m.edges, m.pin)
        null = int(np.sum(s < 1e-10 * s.max()))
        if not (len(pt.edges) == 2 * n - 3 and rep.pointed_ok and rep.faces_ok and rep.ok and null == 1):
            bad.append((k, n))
    acceptance("pseudotriangulation combinatorics (50 point sets, n <= 10)", not bad, f"failures={bad}")
    assert not bad


def test_streinu_end_to_end(acceptance):
    rng = np.random.default_rng(8)
    chains = [random_open_chain(rng, int(rng.integers(4, 9))) for _ in range(10)]
    sections = []

    def runner(L):
        tr = run_streinu_unfold(L)
        sections.append((L.n, tr.sections))
        return tr

    failures, drift, mono, secs = _flow_suite(
        chains, runner, lambda L: all(is_straightened(c, ANGLE_TOL) for c in L.chains))
    within = all(s is not None and s <= 4 * n * n for n, s in sections)
    ok = not failures and within
    acceptance("Streinu backend (10 open chains, n <= 8)", ok,
               f"failures={failures} (n, sections)={sections} max_bar_drift={drift:.2e} "
               f"max_monotone_violation={mono:.2e} time={secs:.0f}s")
    assert ok


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "unlock", *args], capture_output=True, cwd=cwd, check=False)


def test_cli_determinism(acceptance, tmp_path):
    commands = [
        ["unfold", "--input", str(DATA / "spiral.json"), "--method", "cdr"],
        ["unfold", "--input", str(DATA / "dart.json"), "--method", "streinu"],
        ["analyze", "--input", str(DATA / "spiral.json")],
        ["certify", "--input", str(DATA / "braced_square.json")],
        ["pt", "--input", str(DATA / "fig1_reconstruction.json"), "--jitter", "1e-6"],
    ]
    mismatched = []
    for k, cmd in enumerate(commands):
        a, b = _cli(cmd, tmp_path), _cli(cmd, tmp_path)
        if a.returncode != 0 or a.stdout != b.stdout or a.returncode != b.returncode:
            mismatched.append(" ".join(cmd[:1] + cmd[3:]))
    # file outputs: trace and SVG frames
    dirs = []
    for rep in range(2):
        d = tmp_path / f"run{rep}"
        d.mkdir()
        _cli(["unfold", "--input", str(DATA / "l_chain.json"), "--out", "trace.jsonl", "--svg-dir", "svg"], d)
        dirs.append(d)
    files_equal = filecmp.cmp(dirs[0] / "trace.jsonl", dirs[1] / "trace.jsonl", shallow=False)
    svgs = sorted(os.listdir(dirs[0] / "svg"))
    match, mism, errs = filecmp.cmpfiles(dirs[0] / "svg", dirs[1] / "svg", svgs, shallow=False)
    files_equal = files_equal and not mism and not errs and len(match) == len(svgs) > 0
    ok = not mismatched and files_equal
    acceptance("CLI determinism (byte-identical repeated runs)", ok,
               f"commands={len(commands)} mismatched={mismatched} trace_and_{len(svgs)}_svgs_identical={files_equal}")
    assert ok
