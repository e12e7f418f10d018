"""
Linkages, simplicity and the unfolded predicates
================================================

A linkage is a list of chains: open chains are polylines, closed chains are
polygons. Everything downstream requires the linkage to be simple.
"""

from unlock.geometry import Chain, Linkage, is_convexified, is_simple, is_straightened, segment_intersection

# an L-shaped open chain next to a unit square
L = Linkage([Chain([(0, 0), (2, 0), (2, 1)]),
             Chain([(4, 0), (5, 0), (5, 1), (4, 1)], closed=True)])
print("vertices:", L.n, " bar lengths:", L.bar_lengths())
print("simple:", bool(is_simple(L)))

# a zig-zag whose first and third segments cross
bad = Linkage([Chain([(0, 0), (2, 2), (2, 0), (0, 2)])])
rep = is_simple(bad)
print("zig-zag simple:", rep.simple, " offending segments:", rep.segments, rep.kind)

# the predicates are exact for integer input, so touching counts as crossing
print(segment_intersection(((0, 0), (2, 0)), ((1, 0), (1, 1))))

open_chain, square = L.chains
print("L straightened:", is_straightened(open_chain, 1e-3))
print("square convexified:", is_convexified(square, 1e-3))
