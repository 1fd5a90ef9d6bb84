"""
Optimal transport plans and their anatomy
=========================================

The transport layer produces exact optimal couplings between discrete
measures: where each grain of mass goes, what each assignment costs,
the distance it certifies, and the intermediate measures along the way.

Run:  python3 demos/transport_plans.py
"""

import numpy as np

from curvemeas import DiscreteMeasure, geodesic_interpolate, solve_ot, solve_ot_lower_bounded

rng = np.random.default_rng(42)

# a small random matching problem
mu = DiscreteMeasure(rng.uniform(-1, 0, size=(4, 2)), [0.4, 0.3, 0.2, 0.1])
nu = DiscreteMeasure(rng.uniform(0, 1, size=(3, 2)), [0.5, 0.3, 0.2])

plan = solve_ot(mu, nu, p=2.0)
print(f"4 sources -> 3 targets, p = 2")
print(f"cost {plan.cost:.6f}, distance {plan.cost ** 0.5:.6f}, "
      f"{len(plan.mass)} plan entries (sparse, <= 4+3-1 = 6)\n")
for i, j, m in zip(plan.src_idx, plan.tgt_idx, plan.mass):
    print(f"  source {i} -> target {j}   mass {m:.3f}")

# displacement interpolation: slide every grain along its segment
print("\nhalfway measure between the two (t = 0.5):")
mid = geodesic_interpolate(plan, 0.5)
for pt, w in zip(mid.points, mid.weights):
    print(f"  {w:.3f} at ({pt[0]:+.3f}, {pt[1]:+.3f})")

# lower-bounded variant: sites must each receive at least a floor,
# anything beyond lands wherever it is cheapest
sites = np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
floors = np.array([0.25, 0.25, 0.0])
plan_lb, received = solve_ot_lower_bounded(mu, sites, floors, p=2.0)
print("\nthree sites with floors [0.25, 0.25, 0]:")
for k, (f, w) in enumerate(zip(floors, received.weights)):
    mark = "(floor binds)" if abs(w - f) < 1e-12 and f > 0 else ""
    print(f"  site {k}: floor {f:.2f}, received {w:.3f} {mark}")
print(f"cost {plan_lb.cost:.6f}")
