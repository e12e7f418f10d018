"""
Pointed pseudotriangulations and the Streinu backend
====================================================

A pointed pseudotriangulation on n points has 2n - 3 edges. Dropping one
convex hull edge leaves a mechanism with exactly one degree of freedom,
and that motion is expansive. The backend follows it until two edges at a
vertex line up, flips one edge, and continues.
"""

from importlib import resources

from unlock.flow import check_monotone_expansion
from unlock.io import load_linkage
from unlock.pseudotri import (build_pointed_pseudotriangulation, dof_count, make_mechanism, run_streinu_unfold,
                              verify_pseudotriangulation)

DATA = resources.files("unlock") / "data"

L = load_linkage(DATA / "spiral.json").linkage
P = L.positions
bars = [(i, i + 1) for i in range(L.n - 1)]
pt = build_pointed_pseudotriangulation(P, bars)
print(f"n={L.n}  edges={len(pt.edges)} (2n-3={2 * L.n - 3})  faces={len(pt.faces)}")
print("report:", verify_pseudotriangulation(P, pt))

mech = make_mechanism(pt, P)
print("removed hull edge:", mech.removed_edge, " degrees of freedom:", dof_count(P, mech.edges, mech.pin))

for name in ("l_chain", "spiral", "dart"):
    L = load_linkage(DATA / f"{name}.json").linkage
    tr = run_streinu_unfold(L)
    print(f"{name:8s} {tr.outcome:10s} sections={tr.sections:3d} (4n^2={4 * L.n ** 2}) "
          f"monotone violation={check_monotone_expansion(tr, 1e-6).max_violation:.1e}")
