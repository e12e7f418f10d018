"""
Struts, bars and equilibrium stresses
=====================================

Every non-bar vertex pair becomes a strut. A simple linkage admits only the
zero equilibrium stress, which is why an expansive motion exists. Bracing a
square with its diagonals gives a framework that does carry a stress.
"""

from importlib import resources

import numpy as np

from unlock.framework import Framework, build_framework, equilibrium_residual, find_equilibrium_stress
from unlock.io import load_linkage

spiral = load_linkage(resources.files("unlock") / "data" / "spiral.json").linkage
fw = build_framework(spiral)
print("spiral framework:", fw.counts())
print("stress on spiral:", find_equilibrium_stress(spiral.positions, fw))

square = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
braced = Framework.from_pairs(4, bars=[(0, 1), (1, 2), (2, 3), (0, 3)], struts=[(0, 2), (1, 3)])
s = find_equilibrium_stress(square, braced)
for e, w in zip(braced.edges, s.omega):
    print(f"  {e.kind.value:12s} ({e.i},{e.j})  omega = {w:+.4f}")
print("equilibrium residual:", equilibrium_residual(square, braced, s.omega))
