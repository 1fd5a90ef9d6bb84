"""
What the length functional measures
===================================

The functional assigns to a measure on an embedded graph the reciprocal
of its smallest edge density. Spreading one unit of mass uniformly over
a set of length L gives value exactly L; concentrating everything in a
point gives 0; starving any edge blows the value up to infinity.

Run:  python3 demos/length_functional_tour.py
"""

import numpy as np

from curvemeas import (
    CurveMeasure,
    EmbeddedGraph,
    apply_affine,
    ball_length,
    length_of,
    minimum_spanning_tree,
    total_length,
)

# uniform mass on a random spanning tree: value == geometric length
pts = np.random.default_rng(5).uniform(-1, 1, size=(7, 2))
tree = minimum_spanning_tree(pts)
nu = CurveMeasure.uniform_on(tree)
print(f"uniform on a 7-point tree:  length {total_length(tree):.6f}, "
      f"functional {length_of(nu):.6f}")

# a point mass has no length at all
print(f"point mass:                 functional {length_of(CurveMeasure.dirac([0.3, 0.4])):.6f}")

# non-uniform density: the thin part dictates the value
seg = EmbeddedGraph(np.array([[0.0], [0.5], [1.0]]), np.array([[0, 1], [1, 2]]))
nu_pw = CurveMeasure(seg, np.array([2 / 3, 4 / 3]), np.zeros(3))
print(f"densities 2/3 and 4/3:      functional {length_of(nu_pw):.6f} "
      f"(the sparse half costs 3/2)")

# an edge with zero density makes the measure look lower-dimensional
nu_gap = CurveMeasure(seg, np.array([0.0, 2.0]), np.zeros(3))
print(f"one starved edge:           functional {length_of(nu_gap)}")

# atoms carry mass but never length
nu_atoms = CurveMeasure(
    EmbeddedGraph(np.array([[0.0], [1.0]]), np.array([[0, 1]])),
    np.array([0.5]),
    np.array([0.25, 0.25]),
)
print(f"half density, half atoms:   functional {length_of(nu_atoms):.6f} "
      f"(atoms do not help)\n")

# affine contraction with factor k contracts the value by at most k
A = 0.5 * np.eye(2)
print(f"after scaling by 0.5:       {length_of(apply_affine(nu, A, np.zeros(2))):.6f} "
      f"= 0.5 x {length_of(nu):.6f}")

# the local view: length of the support inside a ball over its radius.
# on a straight segment far from the ends the ratio is 2 (both
# directions), never below 1 on a connected set
line = EmbeddedGraph(np.array([[0.0, 0.0], [4.0, 0.0]]), np.array([[0, 1]]))
ratio = ball_length(line, np.array([2.0, 0.0]), 0.5) / 0.5
print(f"\nball of radius 0.5 centered mid-segment: length/radius = {ratio:.4f}")
