"""
The expansive velocity field
============================

At each instant the flow takes the minimum-norm velocity that keeps every
bar length fixed and makes every strut grow at rate at least eta.
"""

import numpy as np

from unlock.expansion import expansive_velocity
from unlock.flow import FlowParams, prepare_framework
from unlock.framework import build_framework, rigidity_matrix
from unlock.geometry import Chain, Linkage
from unlock.qp import kkt_residual, qp_solve

# the QP on its own: nearest point to the origin of a small polyhedron
G = np.array([[1.0, 1.0], [1.0, -2.0]])
res = qp_solve(np.zeros((0, 2)), [], G, [1.0, -1.0], n_vars=2)
print("qp x =", res.x, " active:", res.active, " kkt:", kkt_residual(res, np.zeros((0, 2)), [], G, [1.0, -1.0]))

L = Linkage([Chain([(0, 0), (1, 0), (1, 1), (0.2, 1.4)])])
fw = prepare_framework(L, build_framework(L), FlowParams())
vf = expansive_velocity(L.positions, fw)
print("eta:", vf.eta)
print("velocities:\n", np.round(vf.v, 4))

rates = rigidity_matrix(L.positions, fw) @ vf.v.ravel()
print("bar rates:", np.round(rates[fw.bar_mask], 12))
print("strut rates:", np.round(rates[fw.strut_mask], 4))
# no rigid component: total momentum and angular momentum vanish
P = L.positions - L.positions.mean(0)
print("net translation:", vf.v.sum(0), " net rotation:", np.sum(P[:, 0] * vf.v[:, 1] - P[:, 1] * vf.v[:, 0]))
