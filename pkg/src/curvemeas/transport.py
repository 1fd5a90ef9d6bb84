"""Exact discrete optimal transport.

Solves the balanced transportation problem with cost |x - y|^p through the
HiGHS simplex (sparse formulation, vertex solutions, so plans are basic and
carry at most n + m - 1 entries). A variant enforces per-target lower
bounds with the remaining mass placed freely; it reduces exactly to a
balanced problem with one extra column priced at each source's cheapest
site. Plans support restriction to index sets, additive cost decomposition,
and displacement (geodesic) interpolation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InfeasibleError
from .measures import DiscreteMeasure

__all__ = [
    "TransportPlan",
    "solve_ot",
    "solve_ot_lower_bounded",
    "restrict_plan",
    "geodesic_interpolate",
    "save_plan_csv",
]

_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between two discrete measures.

    entries: (source_index, target_index, mass) triples with positive mass;
    cost is sum(mass * |x - y|^p). Row and column sums agree with the
    referenced measures within 1e-9 (the references are this plan's own
    marginals for restricted fragments).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    src_idx: np.ndarray
    tgt_idx: np.ndarray
    mass: np.ndarray
    p: float
    cost: float

    def __post_init__(self):
        si = np.asarray(self.src_idx, dtype=int).ravel()
        ti = np.asarray(self.tgt_idx, dtype=int).ravel()
        m = np.asarray(self.mass, dtype=float).ravel()
        if not (si.shape == ti.shape == m.shape):
            raise ValueError("entry arrays must have equal length")
        if m.size and m.min() <= 0:
            raise ValueError("plan masses must be positive")
        object.__setattr__(self, "src_idx", si)
        object.__setattr__(self, "tgt_idx", ti)
        object.__setattr__(self, "mass", m)
        rows = np.bincount(si, weights=m, minlength=len(self.source))
        cols = np.bincount(ti, weights=m, minlength=len(self.target))
        if np.abs(rows - self.source.weights).max(initial=0.0) > _MARGINAL_TOL:
            raise ValueError("row sums do not match the source weights")
        if np.abs(cols - self.target.weights).max(initial=0.0) > _MARGINAL_TOL:
            raise ValueError("column sums do not match the target weights")
        if abs(self.recompute_cost() - self.cost) > _MARGINAL_TOL:
            raise ValueError("stored cost disagrees with the entries")

    def __len__(self) -> int:
        return self.mass.size

    def entry_costs(self) -> np.ndarray:
        d = np.linalg.norm(
            self.source.points[self.src_idx] - self.target.points[self.tgt_idx],
            axis=1,
        )
        return d**self.p

    def recompute_cost(self) -> float:
        if self.mass.size == 0:
            return 0.0
        return float(math.fsum(self.mass * self.entry_costs()))


def _cost_matrix(X: np.ndarray, Y: np.ndarray, p: float) -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    D = np.sqrt((diff * diff).sum(-1))
    return D**p


def _transportation_lp(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Balanced transportation problem, solved exactly by HiGHS simplex."""
    n, m = C.shape
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.repeat(np.arange(m), n)])
    cols = np.concatenate(
        [np.arange(n * m), np.arange(n * m).reshape(n, m).T.ravel()]
    )
    A = sparse.csc_matrix(
        (np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m)
    )
    res = linprog(
        C.ravel(),
        A_eq=A,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
        options={
            # defaults allow basics at -1e-7; clamping those breaks marginals.
            # 1e-10 is the tightest HiGHS accepts
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status != 0:
        raise InfeasibleError(f"transportation solve failed: {res.message}")
    G = res.x.reshape(n, m)
    G[G < 0] = 0.0
    # clamping shifts row sums by the removed dust; rescale each row back to
    # its exact marginal (columns drift by at most the clamped total)
    rows = G.sum(axis=1)
    np.divide(a, rows, out=rows, where=rows > 0)
    G *= rows[:, None]
    return G


def solve_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> TransportPlan:
    """Optimal coupling between two equal-mass discrete measures.

    The plan is exactly optimal for the discrete problem; cost equals the
    p-th power of the Wasserstein distance between the inputs.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(mu) == 0 or len(nu) == 0:
        raise ValueError("measures must be nonempty")
    if mu.dimension != nu.dimension:
        raise ValueError("dimension mismatch")
    if abs(mu.total_mass() - nu.total_mass()) > _MARGINAL_TOL:
        raise InfeasibleError(
            f"mass mismatch: {mu.total_mass():.17g} vs {nu.total_mass():.17g}"
        )
    src_keep = np.where(mu.weights > 0)[0]
    tgt_keep = np.where(nu.weights > 0)[0]
    if src_keep.size == 0:
        return TransportPlan(mu, nu, [], [], [], p, 0.0)
    C = _cost_matrix(mu.points[src_keep], nu.points[tgt_keep], p)
    G = _transportation_lp(mu.weights[src_keep], nu.weights[tgt_keep], C)
    ii, jj = np.nonzero(G)
    mass = G[ii, jj]
    cost = float(math.fsum(mass * C[ii, jj]))
    return TransportPlan(mu, nu, src_keep[ii], tgt_keep[jj], mass, p, cost)


def solve_ot_lower_bounded(
    mu: DiscreteMeasure, sites, lower, p: float
) -> tuple[TransportPlan, DiscreteMeasure]:
    """Optimal coupling onto sites whose received mass may not drop below
    per-site floors; mass beyond the floors lands wherever cheapest.

    Jointly minimizes the cost over target weights w >= lower with
    sum(w) = mass(mu) and couplings to w. Internally this is a balanced
    problem: targets are the floored sites plus one free column whose price
    for source i is min_j |x_i - y_j|^p; free mass is then re-attributed to
    each source's nearest site (smallest index on ties).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    Y = np.atleast_2d(np.asarray(sites, dtype=float))
    low = np.asarray(lower, dtype=float).ravel()
    if Y.shape[0] == 0:
        raise ValueError("need at least one site")
    if low.shape[0] != Y.shape[0]:
        raise ValueError("one lower bound per site required")
    if np.any(low < 0):
        raise ValueError("lower bounds must be nonnegative")
    if Y.shape[1] != mu.dimension:
        raise ValueError("dimension mismatch")
    total = mu.total_mass()
    free = total - float(low.sum())
    if free < -_MARGINAL_TOL:
        raise InfeasibleError(
            f"lower bounds sum to {low.sum():.17g} > available mass {total:.17g}"
        )
    free = max(free, 0.0)

    src_keep = np.where(mu.weights > 0)[0]
    C = _cost_matrix(mu.points[src_keep], Y, p)
    nearest = np.argmin(C, axis=1)
    if free > 0:
        Cx = np.concatenate([C, C[np.arange(C.shape[0]), nearest][:, None]], axis=1)
        b = np.concatenate([low, [free]])
    else:
        Cx, b = C, low
    G = _transportation_lp(mu.weights[src_keep], b, Cx)
    P = G[:, : Y.shape[0]].copy()
    if free > 0:
        P[np.arange(P.shape[0]), nearest] += G[:, -1]
    w = P.sum(axis=0)
    # remove the LP's 1e-10-scale marginal residue so downstream mass checks
    # see exactly the source total
    scale = total / w.sum() if w.sum() > 0 else 1.0
    P *= scale
    w = P.sum(axis=0)
    target = DiscreteMeasure(Y, w)
    ii, jj = np.nonzero(P)
    mass = P[ii, jj]
    cost = float(math.fsum(mass * C[ii, jj]))
    plan = TransportPlan(mu, target, src_keep[ii], jj, mass, p, cost)
    return plan, target


def restrict_plan(
    plan: TransportPlan, source_set, target_set
) -> tuple[TransportPlan, DiscreteMeasure, DiscreteMeasure]:
    """Keep exactly the entries with source in source_set and target in
    target_set; also return the fragment's own marginals.

    Marginals keep the original point lists (with zero weight off the kept
    set) so indices keep their meaning; they are generally not probability
    measures.
    """
    smask = np.zeros(len(plan.source), dtype=bool)
    smask[np.asarray(list(source_set), dtype=int)] = True
    tmask = np.zeros(len(plan.target), dtype=bool)
    tmask[np.asarray(list(target_set), dtype=int)] = True
    keep = smask[plan.src_idx] & tmask[plan.tgt_idx]
    si, ti, m = plan.src_idx[keep], plan.tgt_idx[keep], plan.mass[keep]
    rho_w = np.bincount(si, weights=m, minlength=len(plan.source))
    nu_w = np.bincount(ti, weights=m, minlength=len(plan.target))
    rho_S = DiscreteMeasure(plan.source.points, rho_w)
    nu_S = DiscreteMeasure(plan.target.points, nu_w)
    if m.size:
        d = np.linalg.norm(
            plan.source.points[si] - plan.target.points[ti], axis=1
        )
        cost = float(math.fsum(m * d**plan.p))
    else:
        cost = 0.0
    fragment = TransportPlan(rho_S, nu_S, si, ti, m, plan.p, cost)
    return fragment, rho_S, nu_S


def geodesic_interpolate(plan: TransportPlan, t: float) -> DiscreteMeasure:
    """Push each entry's mass to (1-t) source + t target; merge coincident
    points. t=0 gives the source marginal, t=1 the target marginal."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if plan.mass.size == 0:
        return DiscreteMeasure(plan.source.points[:1], [0.0])
    pts = (1.0 - t) * plan.source.points[plan.src_idx] + t * plan.target.points[
        plan.tgt_idx
    ]
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    w = np.bincount(inverse, weights=plan.mass, minlength=uniq.shape[0])
    return DiscreteMeasure(uniq, w)


def save_plan_csv(plan: TransportPlan, path) -> None:
    """Dump entries as source_index, target_index, mass, cost_contribution."""
    costs = plan.entry_costs() if len(plan) else np.zeros(0)
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_index", "target_index", "mass", "cost_contribution"])
        for s, t, m, c in zip(plan.src_idx, plan.tgt_idx, plan.mass, costs):
            writer.writerow(
                [int(s), int(t), format(m, ".17g"), format(m * c, ".17g")]
            )
