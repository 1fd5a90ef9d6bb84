"""
Two point masses, three optimal shapes
======================================

The source is half the mass at -1 and half at +1. Depending on how
expensive length is, the best approximating measure is a point mass at
the origin, a uniform density on a short centered segment, or a density
on the full interval with leftover atoms at the endpoints.

Run:  python3 demos/two_masses_three_regimes.py
"""

import numpy as np

from curvemeas import DiscreteMeasure, SolverConfig, solve, two_dirac_solution

rho0 = DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])

print("source: 0.5 at -1, 0.5 at +1, cost exponent p = 2\n")

# high penalty: everything collapses to the midpoint
res = solve(rho0, SolverConfig(lam=0.8, mode="uniform", n_vertices=8, seed=0))
print(f"lam = 0.8   collapsed -> point at {res.collapse_point[0]:+.4f}, "
      f"energy {res.energy:.4f}")

# moderate penalty: a uniform measure on a centered segment wins
res = solve(
    rho0,
    SolverConfig(lam=0.3, mode="uniform", n_vertices=8,
                 quadrature_per_edge=200, seed=0),
)
xs = res.nu.graph.vertices[:, 0]
print(f"lam = 0.3   segment [{xs.min():+.4f}, {xs.max():+.4f}], "
      f"energy {res.energy:.4f}")

# the closed form says the segment is [-b*, b*] with b* = 1.5 (1 - 2 lam)
ref = two_dirac_solution(0.3)
print(f"            closed form: [-{ref.b_star:.4f}, +{ref.b_star:.4f}], "
      f"energy {ref.energy:.4f}")

# low penalty: a longer support helps, but the transport term still
# wants mass near the sources, so atoms survive at the endpoints
ref = two_dirac_solution(0.1)
atom = ref.nu.vertex_atoms.max()
print(f"\nlam = 0.1   closed form on [-1, +1]: atoms of {atom:.4f} at the "
      f"endpoints,")
print(f"            density {ref.nu.edge_density[0]:.4f} in between, "
      f"energy {ref.energy:.4f}")

# the regime boundaries are exactly lam = 1/6 and lam = 1/2
print("\nregimes:  mixture for lam < 1/6, segment for 1/6 <= lam < 1/2, "
      "point beyond")
for lam in np.linspace(0.05, 0.55, 11):
    kind = two_dirac_solution(float(lam)).regime
    print(f"  lam = {lam:.2f}  ->  {kind}")
