"""
Maxwell-Cremona lifting
=======================

A stress on a plane framework lifts to a polyhedral terrain: positive
stresses become ridges, negative ones valleys. Crossing edges are first cut
at their intersections.
"""

import numpy as np

from unlock.framework import Framework, StressAssignment, find_equilibrium_stress
from unlock.lifting import maxwell_cremona_lift, planarize, verify_lift

square = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
fw = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)])
stress = find_equilibrium_stress(square, fw)

pf = planarize(square, fw, stress)
print("planar graph:", len(pf.vertices), "vertices,", len(pf.edges), "edges,", len(pf.faces), "faces")
terrain = maxwell_cremona_lift(pf)
for p, h in zip(pf.vertices, terrain.vertex_heights):
    print(f"  ({p[0]:.2f}, {p[1]:.2f})  height {h:+.4f}")
rep = verify_lift(pf, terrain)
print("closure residual:", rep.max_closure_residual, " flat:", rep.is_flat,
      " ridges/valleys match signs:", rep.mountain_valley_consistent)

# the zero stress lifts to the plane itself
pf0 = planarize(square, fw, StressAssignment.zero(fw))
print("zero stress flat:", verify_lift(pf0, maxwell_cremona_lift(pf0)).is_flat)
