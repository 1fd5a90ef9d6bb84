"""Closed-form reference solutions and structural checks for solver output.

The two-point source at -1 and +1 with p = 2 has an explicit optimal
family indexed by the penalty: a floor-plus-atoms mixture on [-1, 1] for
small penalties, a shrinking uniform segment in the middle range, and a
point mass at the origin from 1/2 upward. The other checks here verify
structural facts about transport plans and solver results: regularity of
the support (length-to-radius ratios of balls), excess mass landing at its
source's nearest point of the support, and additivity/optimality of plan
restrictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import EmbeddedGraph, ball_length, project_many, sample_arclength
from .length import CurveMeasure
from .measures import DiscreteMeasure
from .solver import SolveResult
from .transport import TransportPlan, restrict_plan, solve_ot

__all__ = [
    "TwoDiracSolution",
    "two_dirac_solution",
    "ahlfors_profile",
    "check_excess_projection",
    "check_plan_decomposition",
]


@dataclass(frozen=True)
class TwoDiracSolution:
    """Closed-form optimum for rho0 = (delta_{-1} + delta_{+1})/2, p = 2."""

    regime: str
    lam: float
    energy: float
    nu: CurveMeasure
    alpha_star: Optional[float] = None
    b_star: Optional[float] = None


def two_dirac_solution(lam: float) -> TwoDiracSolution:
    """The optimal measure and energy for the symmetric two-point source.

    Regimes by penalty: mixture on [-1, 1] (floor density 1/alpha* with
    atoms at the endpoints) for lam < 1/6 with alpha* = sqrt(2/(3 lam));
    uniform on [-b*, b*] with b* = (3/2)(1 - 2 lam) for 1/6 <= lam < 1/2;
    point mass at 0 with energy 1 for lam >= 1/2.
    """
    if lam <= 0:
        raise ValueError("penalty must be positive")
    if lam >= 0.5:
        return TwoDiracSolution(
            regime="dirac",
            lam=lam,
            energy=1.0,
            nu=CurveMeasure.dirac([0.0]),
        )
    if lam >= 1.0 / 6.0:
        b = 1.5 * (1.0 - 2.0 * lam)
        graph = EmbeddedGraph(np.array([[-b], [b]]), [[0, 1]])
        nu = CurveMeasure(graph, np.array([1.0 / (2.0 * b)]), np.zeros(2))
        energy = b * b / 3.0 + (2.0 * lam - 1.0) * b + 1.0
        return TwoDiracSolution(
            regime="uniform", lam=lam, energy=energy, nu=nu, b_star=b
        )
    alpha = math.sqrt(2.0 / (3.0 * lam))
    graph = EmbeddedGraph(np.array([[-1.0], [1.0]]), [[0, 1]])
    atom = 0.5 - 1.0 / alpha
    nu = CurveMeasure(graph, np.array([1.0 / alpha]), np.array([atom, atom]))
    energy = lam * alpha + 2.0 / (3.0 * alpha)
    return TwoDiracSolution(
        regime="mixture", lam=lam, energy=energy, nu=nu, alpha_star=alpha
    )


def ahlfors_profile(graph: EmbeddedGraph, n_centers: int, radii) -> dict:
    """Length-to-radius ratios of balls centered on the set.

    Centers are spread by arc length; each (center, radius) pair where the
    ball does not swallow the whole set contributes
    ball_length(graph, x, r) / r. Connectedness forces every such ratio to
    be at least 1; the extremes describe how uniformly the set fills space.
    """
    if graph.singleton:
        raise ValueError("profile needs a non-singleton graph")
    rs = np.asarray(radii, dtype=float).ravel()
    if rs.size == 0 or np.any(rs <= 0):
        raise ValueError("radii must be positive")
    diam = graph.diameter_upper()
    if np.any(rs >= diam / 2.0):
        raise ValueError("radii must be below half the set diameter")
    if n_centers < 1:
        raise ValueError("need at least one center")
    from .graph import total_length

    step = total_length(graph) / max(n_centers, 1)
    centers = sample_arclength(graph, step)
    if centers.shape[0] > n_centers:
        pick = np.linspace(0, centers.shape[0] - 1, n_centers).astype(int)
        centers = centers[np.unique(pick)]
    V = graph.vertices
    table = []
    ratios = []
    for x in centers:
        vmax = float(np.linalg.norm(V - x, axis=1).max())
        for r in rs:
            if vmax <= r:  # whole set inside the ball: ratio undefined
                continue
            ratio = ball_length(graph, x, float(r)) / float(r)
            ratios.append(ratio)
            table.append(
                {"center": x.tolist(), "radius": float(r), "ratio": ratio}
            )
    if not ratios:
        return {"min_ratio": None, "max_ratio": None, "table": []}
    return {
        "min_ratio": min(ratios),
        "max_ratio": max(ratios),
        "table": table,
    }


def check_excess_projection(
    rho0: DiscreteMeasure, result: SolveResult, plan: TransportPlan, tol: float
) -> dict:
    """Verify that mass above the density floor travels no farther than the
    distance to the support.

    Each target site's intake is split into a floor part (up to the site's
    lower bound) and excess. Entries are sorted per site by how much their
    travel exceeds the source's distance to the support, floor mass is
    attributed to the worst-traveling entries first, and any excess-
    attributed mass with |x - y| > dist(x, support) + tol counts as
    violation. Plans with no floors (or a collapsed result) check nothing.
    """
    floors = result.details.get("site_floor")
    graph = result.nu.graph
    if floors is None or len(plan) == 0:
        return {
            "violation_mass": 0.0,
            "excess_mass": 0.0,
            "checked_sites": 0,
            "violations": [],
        }
    floors = np.asarray(floors, dtype=float)
    src_pts = plan.source.points
    tgt_pts = plan.target.points
    dist_to_graph = project_many(graph, src_pts)
    travel = np.linalg.norm(src_pts[plan.src_idx] - tgt_pts[plan.tgt_idx], axis=1)
    slack = travel - dist_to_graph[plan.src_idx]

    violation_mass = 0.0
    excess_mass = 0.0
    violations = []
    checked = 0
    order = np.argsort(plan.tgt_idx, kind="stable")
    boundaries = np.searchsorted(
        plan.tgt_idx[order], np.arange(tgt_pts.shape[0] + 1)
    )
    for j in range(tgt_pts.shape[0]):
        rows = order[boundaries[j] : boundaries[j + 1]]
        if rows.size == 0:
            continue
        checked += 1
        intake = float(plan.mass[rows].sum())
        floor_j = float(floors[j]) if j < floors.shape[0] else 0.0
        exc = intake - floor_j
        if exc <= 1e-15:
            continue
        excess_mass += exc
        # attribute floor mass to the worst-exceeding entries first; the
        # check then grades only the mass that must be excess under the
        # most favorable split
        by_slack = rows[np.argsort(-slack[rows], kind="stable")]
        budget = floor_j
        for row in by_slack:
            m = float(plan.mass[row])
            used = min(budget, m)
            budget -= used
            excess_part = m - used
            if excess_part > 0 and slack[row] > tol:
                violation_mass += excess_part
                violations.append(
                    {
                        "source_index": int(plan.src_idx[row]),
                        "site_index": int(j),
                        "mass": excess_part,
                        "slack": float(slack[row]),
                    }
                )
    return {
        "violation_mass": violation_mass,
        "excess_mass": excess_mass,
        "checked_sites": checked,
        "violations": violations,
    }


def check_plan_decomposition(plan: TransportPlan, partition) -> dict:
    """Restrict the plan to each target block, then confirm the block costs
    add up to the whole and each block is already optimal for its own
    marginals (re-solving it reproduces the cost within 1e-9)."""
    n_targets = len(plan.target)
    seen = np.zeros(n_targets, dtype=bool)
    blocks = []
    for part in partition:
        idx = np.asarray(list(part), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= n_targets):
            raise ValueError("partition indices out of range")
        if np.any(seen[idx]):
            raise ValueError("partition blocks overlap")
        seen[idx] = True
        blocks.append(idx)
    if not np.all(seen[np.unique(plan.tgt_idx)]):
        raise ValueError("partition must cover all targets receiving mass")

    pieces = []
    total = 0.0
    all_optimal = True
    for idx in blocks:
        fragment, rho_S, nu_S = restrict_plan(plan, range(len(plan.source)), idx)
        total += fragment.cost
        entry = {"targets": idx.tolist(), "cost": fragment.cost}
        if fragment.mass.size:
            skeep = rho_S.weights > 0
            tkeep = nu_S.weights > 0
            sub_mu = DiscreteMeasure(rho_S.points[skeep], rho_S.weights[skeep])
            sub_nu = DiscreteMeasure(nu_S.points[tkeep], nu_S.weights[tkeep])
            resolved = solve_ot(sub_mu, sub_nu, plan.p).cost
            entry["resolved_cost"] = resolved
            entry["gap"] = fragment.cost - resolved
            if fragment.cost - resolved > 1e-9 * max(1.0, abs(fragment.cost)):
                all_optimal = False
        else:
            entry["resolved_cost"] = 0.0
            entry["gap"] = 0.0
        pieces.append(entry)
    additivity_gap = abs(total - plan.cost)
    return {
        "pieces": pieces,
        "cost_total": total,
        "plan_cost": plan.cost,
        "additivity_gap": additivity_gap,
        "additive": additivity_gap <= 1e-9 * max(1.0, abs(plan.cost)),
        "pieces_optimal": all_optimal,
    }
