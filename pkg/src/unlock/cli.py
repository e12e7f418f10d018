"""Command-line front end: ``unlock {unfold,analyze,certify,pt} --input FILE ...``.

Results go to standard output as JSON, diagnostics to standard error.
Exit status: 0 success, 1 bad input, 2 numerical failure (including runs
that stop before the linkage is unfolded).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from .errors import LiftClosureError, NumericalError, UnlockError
from .expansion import ExpansionParams
from .flow import UNFOLDED, FlowParams, run_unfold
from .framework import StressAssignment, build_framework, classify_taut_struts, equilibrium_residual, \
    find_equilibrium_stress, Framework
from .geometry import require_simple
from .io import load_linkage, trace_lines
from .lifting import maxwell_cremona_lift, planarize, verify_lift
from .pseudotri import StreinuParams, build_pointed_pseudotriangulation, run_streinu_unfold, \
    verify_pseudotriangulation
from .svg import Style, render_svg, viewbox_for

log = logging.getLogger("unlock")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1) + "\n")


def _setup_logging() -> None:
    level = os.environ.get("UNLOCK_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_unfold(args) -> int:
    doc = load_linkage(args.input)
    linkage = doc.linkage
    flow = FlowParams()
    changes = {}
    if args.dt is not None:
        changes["dt_init"] = args.dt
    if args.max_steps is not None:
        changes["max_steps"] = args.max_steps
    if args.snapshot_every is not None:
        changes["snapshot_every"] = args.snapshot_every
    if args.method == "cdr":
        flow = replace(flow, **changes)
        exp = ExpansionParams(eta=args.eta)
        trace = run_unfold(linkage, flow, exp)
        params = {"method": "cdr", "flow": asdict(flow), "expansion": asdict(exp)}
    else:
        sp = StreinuParams()
        sp = replace(sp, flow=replace(sp.flow, **changes))
        trace = run_streinu_unfold(linkage, sp)
        params = {"method": "streinu", "flow": asdict(sp.flow), "max_sections": sp.max_sections}
    params["input"] = os.path.basename(args.input)

    lines = "".join(line + "\n" for line in trace_lines(trace, params))
    summary = {"outcome": trace.outcome, "steps": trace.steps, "frames": len(trace.frames),
               "t_final": trace.frames[-1].t}
    if trace.sections is not None:
        summary["sections"] = trace.sections
    if trace.failure_reason:
        summary["failure_reason"] = trace.failure_reason
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
        _emit(summary)
    else:
        sys.stdout.write(lines)
    if args.svg_dir:
        os.makedirs(args.svg_dir, exist_ok=True)
        box = viewbox_for([fr.config for fr in trace.frames])
        for k, fr in enumerate(trace.frames):
            with open(os.path.join(args.svg_dir, f"frame_{k:05d}.svg"), "w", encoding="utf-8") as fh:
                fh.write(render_svg(fr.config, Style(), box))
    if trace.outcome != UNFOLDED:
        why = f": {trace.failure_reason}" if trace.failure_reason else f" after {trace.steps} steps"
        print(f"unfold: stopped with outcome {trace.outcome}{why}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _stress_report(P, fw: Framework, stress) -> dict:
    if stress is None:
        return {"verdict": "no nonzero equilibrium stress"}
    strut = fw.strut_mask
    return {
        "verdict": "nonzero equilibrium stress",
        "residual": equilibrium_residual(P, fw, stress.omega),
        "min_strut_stress": float(stress.omega[strut].min()) if strut.any() else None,
        "stress": [[int(e.i), int(e.j), e.kind.value, float(w)]
                   for e, w in zip(fw.edges, stress.omega) if w != 0.0],
    }


def cmd_analyze(args) -> int:
    doc = load_linkage(args.input)
    L = doc.linkage
    fw = build_framework(L, check_simple=False, extra_bars=doc.extra_bars)
    fw = classify_taut_struts(L, fw, 0.5 * FlowParams().straight_tol)
    stress = find_equilibrium_stress(L.positions, fw)
    out = {"framework": fw.counts()}
    out.update(_stress_report(L.positions, fw, stress))
    _emit(out)
    return EXIT_OK


def _read_stress(path, fw: Framework) -> StressAssignment:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    omega = np.zeros(len(fw.edges))
    for item in obj.get("stress", []):
        i, j, w = int(item[0]), int(item[1]), float(item[-1])
        omega[fw.edge_id(min(i, j), max(i, j))] = w
    return StressAssignment.from_values(omega)


def cmd_certify(args) -> int:
    doc = load_linkage(args.input)
    L = doc.linkage
    full = build_framework(L, check_simple=False, extra_bars=doc.extra_bars)
    if args.stress == "auto":
        stress = find_equilibrium_stress(L.positions, full) or StressAssignment.zero(full)
    elif args.stress == "zero":
        stress = StressAssignment.zero(full)
    else:
        stress = _read_stress(args.stress, full)
    # only bars and loaded struts enter the plane graph; unloaded struts would add nothing to the lift
    keep = [k for k, e in enumerate(full.edges) if e.is_bar or stress.omega[k] != 0.0]
    sub = Framework(full.n, tuple(full.edges[k] for k in keep), full.chains)
    sub_stress = StressAssignment.from_values(stress.omega[keep])
    pf = planarize(L.positions, sub, sub_stress)
    terrain = maxwell_cremona_lift(pf)
    report = verify_lift(pf, terrain)
    _emit({
        "closure_residual": max(terrain.closure_residual, report.max_closure_residual),
        "is_flat": report.is_flat,
        "mountain_valley_consistent": report.mountain_valley_consistent,
        "faces": pf.n_faces,
        "crossings": int(len(pf.vertices) - pf.n_original),
        "vertex_heights": [float(h) for h in terrain.vertex_heights],
    })
    return EXIT_OK


def cmd_pt(args) -> int:
    doc = load_linkage(args.input)
    L = doc.linkage
    P = L.positions
    if args.jitter:
        rng = np.random.default_rng(args.seed)
        P = P + rng.uniform(-args.jitter, args.jitter, size=P.shape)
        L = L.with_positions(P)
        require_simple(L)
    bars = sorted(set(L.bars()) | set(doc.extra_bars))
    pt = build_pointed_pseudotriangulation(P, bars)
    rep = verify_pseudotriangulation(P, pt)
    out = {"n": pt.n, "edges": [list(e) for e in pt.edges],
           "faces": [list(f.corners) for f in pt.faces], "report": asdict(rep)}
    if args.jitter:
        out["positions"] = [[float(x), float(y)] for x, y in P]
    _emit(out)
    return EXIT_OK if rep.ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unlock", description="Unfold planar linkages and certify rigidity facts.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("unfold", help="run an unfolding backend and write a trace")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("cdr", "streinu"), default="cdr")
    p.add_argument("--eta", type=float, default=None, help="strut expansion demand (default 0.1 x shortest bar)")
    p.add_argument("--dt", type=float, default=None, help="initial step size")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out", default=None, help="trace file (default: standard output)")
    p.add_argument("--svg-dir", default=None, help="write one SVG per stored frame here")
    p.add_argument("--snapshot-every", type=int, default=None)
    p.set_defaults(func=cmd_unfold)

    p = sub.add_parser("analyze", help="framework counts and equilibrium-stress verdict")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certify", help="planarize, lift and verify a stress")
    p.add_argument("--input", required=True)
    p.add_argument("--stress", default="auto",
                   help="'auto' (search for one), 'zero', or a JSON file {\"stress\": [[i, j, w], ...]}")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("pt", help="build and check a pointed pseudotriangulation")
    p.add_argument("--input", required=True)
    p.add_argument("--jitter", type=float, default=0.0, help="perturb coordinates uniformly by up to EPS first")
    p.add_argument("--seed", type=int, default=0, help="seed for --jitter")
    p.set_defaults(func=cmd_pt)
    return ap


def cli_main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NumericalError, LiftClosureError) as exc:
        print(f"{args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UnlockError, OSError, ValueError) as exc:
        print(f"{args.command}: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(cli_main())
