"""
Embedding a product taxonomy in the Poincare ball
=================================================

Each category gets a vector in the unit ball. Hyperbolic distance grows
quickly towards the boundary, which leaves room for the many leaves of a
wide tree. After training, general categories sit near the origin and
specific ones near the edge.
"""

import numpy as np

from taxoextract import synth
from taxoextract.taxonomy import mean_edge_distance, train_poincare

tree = synth.taxonomy_tree()
table = train_poincare(tree, dim=10, epochs=200, seed=0)

for level in range(max(tree.level.values()) + 1):
    nodes = [n for n in tree.order if tree.level[n] == level]
    norms = [np.linalg.norm(table[n]) for n in nodes]
    print(f"level {level}: {len(nodes):2d} nodes, mean norm {np.mean(norms):.3f}")

print(f"mean parent-child distance {mean_edge_distance(tree, table):.3f}")

# siblings end up closer to each other than to a leaf from another branch
leaves = tree.leaves()
a, b = [n for n in leaves if tree.parent[n] == tree.parent[leaves[0]]][:2]
far = next(n for n in leaves if tree.parent[n] != tree.parent[a])
print(f"d({a}, {b}) = {table.distance(a, b):.3f}   d({a}, {far}) = {table.distance(a, far):.3f}")
