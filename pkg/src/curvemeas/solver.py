"""Alternating minimization of transport cost plus length penalty.

The objective over curve measures nu is W_p^p(rho0, nu) + lambda * L(nu)
with L the reciprocal-density length functional. Two modes: "uniform"
constrains nu to the normalized length measure of its support graph;
"relaxed" optimizes densities above the floor 1/alpha and the scale alpha
itself. The solver alternates exact transport solves, a least-squares
vertex update, and optional topology edits, accepting a step only when the
re-evaluated energy does not increase, so the energy trace is monotone.
A Dirac candidate at the p-mean competes with the graph throughout and
wins ties, which is what detects collapse at large penalty values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import InfeasibleError
from .graph import EmbeddedGraph, minimum_spanning_tree, total_length
from .length import CurveMeasure, discretize_curve_measure, length_of
from .measures import (
    DiscreteMeasure,
    convex_hull_margin,
    p_mean,
    p_moment_cost,
    project_to_hull,
)
from .transport import TransportPlan, solve_ot, solve_ot_lower_bounded

__all__ = [
    "SolverConfig",
    "SolveResult",
    "energy",
    "optimize_densities",
    "optimize_alpha",
    "AlphaResult",
    "move_vertices",
    "solve",
    "sweep_lambda",
    "lambda_star_bounds",
]

_MODES = ("uniform", "relaxed")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for solve/sweep. quadrature_per_edge is a site density per
    unit edge length (each edge gets at least 3 sites); lam is the length
    penalty weight."""

    p: float = 2.0
    lam: float = 0.1
    mode: str = "relaxed"
    n_vertices: int = 12
    quadrature_per_edge: float = 200.0
    max_outer_iters: int = 60
    tol_rel_energy: float = 1e-4
    seed: int = 0
    topology_moves: bool = True
    collapse_length_eps: Optional[float] = None
    alpha_bracket_factor: float = 50.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.n_vertices < 2:
            raise ValueError("n_vertices must be >= 2")
        if self.quadrature_per_edge < 1:
            raise ValueError("quadrature_per_edge must be >= 1")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not 0 < self.tol_rel_energy < 1:
            raise ValueError("tol_rel_energy must be in (0, 1)")
        if self.collapse_length_eps is not None and self.collapse_length_eps <= 0:
            raise ValueError("collapse_length_eps must be positive")
        if self.alpha_bracket_factor <= 1:
            raise ValueError("alpha_bracket_factor must exceed 1")


@dataclass
class SolveResult:
    nu: CurveMeasure
    w_term: float
    l_term: float
    energy: float
    iterations: int
    energy_trace: list
    collapsed: bool
    collapse_point: Optional[np.ndarray]
    plan: Optional[TransportPlan] = None
    details: dict = field(default_factory=dict)


def _per_edge_counts(graph: EmbeddedGraph, density: float) -> np.ndarray:
    if graph.singleton:
        return np.zeros(0, dtype=int)
    lens = graph.edge_lengths()
    return np.maximum(3, np.ceil(density * lens).astype(int))


def energy(
    rho0: DiscreteMeasure, nu: CurveMeasure, p: float, lam: float, m: int
) -> tuple[float, float, float]:
    """Transport term against the m-midpoints-per-edge quadrature of nu
    (atoms kept), length term, and their lam-weighted total. An infinite
    length term makes the total infinite; the transport term is still
    reported."""
    l_term = length_of(nu)
    disc, _ = discretize_curve_measure(nu, counts=m if not nu.graph.singleton else None)
    w_term = solve_ot(rho0, disc, p).cost
    if math.isinf(l_term):
        return w_term, l_term, math.inf
    return w_term, l_term, w_term + lam * l_term


def _graph_sites(graph: EmbeddedGraph, counts: np.ndarray):
    """Midpoint sites per edge plus one site at every vertex.

    Returns points, the owning edge per site (-1 for vertex sites), the
    site parameter on its edge, and the vertex index per vertex site.
    """
    V = graph.vertices
    if graph.singleton:
        return (
            V.copy(),
            np.array([-1]),
            np.array([0.0]),
            np.array([0]),
        )
    pts, edge_of, param_of = [], [], []
    A = V[graph.edges[:, 0]]
    B = V[graph.edges[:, 1]]
    for e in range(graph.n_edges):
        k = int(counts[e])
        t = (np.arange(k) + 0.5) / k
        pts.append(A[e] + t[:, None] * (B[e] - A[e]))
        edge_of.append(np.full(k, e, dtype=int))
        param_of.append(t)
    pts.append(V)
    edge_of.append(np.full(graph.n_vertices, -1, dtype=int))
    param_of.append(np.zeros(graph.n_vertices))
    vertex_ids = np.arange(graph.n_vertices)
    return (
        np.concatenate(pts),
        np.concatenate(edge_of),
        np.concatenate(param_of),
        vertex_ids,
    )


def _densities_from_sites(
    graph: EmbeddedGraph,
    site_weights: np.ndarray,
    edge_of: np.ndarray,
    n_vertices: int,
) -> CurveMeasure:
    lens = graph.edge_lengths()
    edge_mask = edge_of >= 0
    edge_mass = np.bincount(
        edge_of[edge_mask], weights=site_weights[edge_mask], minlength=graph.n_edges
    )
    atoms = site_weights[~edge_mask].copy()
    theta = edge_mass / lens
    return CurveMeasure(graph, theta, atoms)


def _optimize_densities(
    rho0: DiscreteMeasure,
    graph: EmbeddedGraph,
    alpha: float,
    p: float,
    counts: np.ndarray,
):
    """Core of optimize_densities; also returns the coupling and site data."""
    if graph.singleton:
        target = DiscreteMeasure(graph.vertices, np.array([1.0]))
        plan = solve_ot(rho0, target, p)
        nu = CurveMeasure(graph, np.zeros(0), np.ones(1))
        info = {
            "alpha": alpha,
            "site_floor": np.zeros(1),
            "site_edge": np.array([-1]),
            "site_param": np.array([0.0]),
            "site_vertex": np.array([0]),
            "counts": np.zeros(0, dtype=int),
        }
        return nu, plan, info
    L = total_length(graph)
    if alpha < L * (1 - 1e-12):
        raise InfeasibleError(
            f"alpha {alpha:.17g} below the graph length {L:.17g}"
        )
    alpha = max(alpha, L)
    pts, edge_of, param_of, _ = _graph_sites(graph, counts)
    lens = graph.edge_lengths()
    floors = np.zeros(pts.shape[0])
    edge_mask = edge_of >= 0
    floors[edge_mask] = (lens[edge_of[edge_mask]] / counts[edge_of[edge_mask]]) / alpha
    plan, target = solve_ot_lower_bounded(rho0, pts, floors, p)
    nu = _densities_from_sites(graph, target.weights, edge_of, graph.n_vertices)
    info = {
        "alpha": alpha,
        "site_floor": floors,
        "site_edge": edge_of,
        "site_param": param_of,
        "site_vertex": np.arange(graph.n_vertices),
        "counts": counts,
    }
    return nu, plan, info


def optimize_densities(
    rho0: DiscreteMeasure, graph: EmbeddedGraph, alpha: float, p: float, m: int
) -> CurveMeasure:
    """Cheapest density profile above the floor 1/alpha on the graph.

    Sites are m midpoints per edge (floor mass len(e)/m/alpha each) plus
    zero-floor sites at the vertices, so excess mass can land exactly on a
    vertex as an atom. Raises when alpha is below the graph length, since
    the floors alone would then exceed unit mass.
    """
    counts = np.full(graph.n_edges, int(m), dtype=int)
    if np.any(counts < 1):
        raise ValueError("m must be >= 1")
    nu, _, _ = _optimize_densities(rho0, graph, alpha, p, counts)
    return nu


class AlphaResult(NamedTuple):
    alpha: float
    nu: CurveMeasure
    energy: float
    w_term: float
    plan: TransportPlan
    boundary: bool
    boundary_low: bool
    info: dict


def optimize_alpha(
    rho0: DiscreteMeasure,
    graph: EmbeddedGraph,
    p: float,
    lam: float,
    m,
    bracket_factor: float = 50.0,
    tol_rel: float = 1e-4,
    extra_alphas=(),
) -> AlphaResult:
    """Golden-section search over the density-floor scale alpha.

    The search objective is transport cost plus lam * alpha over the
    bracket [L, bracket_factor * L] with L the graph length; the returned
    energy uses the actual length functional of the realized measure,
    which can only be smaller. A minimum at either bracket end sets the
    boundary flag (at the lower end the geometry, not alpha, is what must
    change next).
    """
    L = total_length(graph)
    if graph.singleton or L == 0.0:
        nu, plan, info = _optimize_densities(
            rho0, graph, 0.0, p, np.zeros(0, dtype=int)
        )
        w = plan.cost
        return AlphaResult(0.0, nu, w, w, plan, False, False, info)
    counts = (
        np.asarray(m, dtype=int)
        if np.ndim(m)
        else np.full(graph.n_edges, int(m), dtype=int)
    )
    a, b = L, bracket_factor * L
    cache: dict[float, tuple] = {}

    def evaluate(alpha: float):
        alpha = min(max(alpha, a), b)
        if alpha not in cache:
            nu, plan, info = _optimize_densities(rho0, graph, alpha, p, counts)
            w = plan.cost
            search_obj = w + lam * alpha
            true_obj = w + lam * length_of(nu)
            cache[alpha] = (search_obj, true_obj, nu, plan, w, info)
        return cache[alpha]

    for alpha in (a, b, *[x for x in extra_alphas if x is not None]):
        evaluate(alpha)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = a, b
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = evaluate(x1)[0], evaluate(x2)[0]
    while hi - lo > tol_rel * max(lo, 1e-12):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = evaluate(x1)[0]
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = evaluate(x2)[0]
    best_alpha = min(cache, key=lambda al: cache[al][1])
    _, true_obj, nu, plan, w, info = cache[best_alpha]
    edge = tol_rel * max(L, 1e-12) * 4.0
    boundary_low = best_alpha - a <= edge
    boundary_high = b - best_alpha <= edge
    return AlphaResult(
        best_alpha, nu, true_obj, w, plan, boundary_low or boundary_high,
        boundary_low, info,
    )


def _length_gradient(graph: EmbeddedGraph) -> np.ndarray:
    """Gradient of total edge length in the vertex coordinates."""
    g = np.zeros_like(graph.vertices)
    V = graph.vertices
    for i, j in graph.edges:
        d = V[i] - V[j]
        norm = np.linalg.norm(d)
        if norm > 0:
            g[i] += d / norm
            g[j] -= d / norm
    return g


def _site_positions(
    V: np.ndarray, graph: EmbeddedGraph, edge_of: np.ndarray, param_of: np.ndarray,
    vertex_of: np.ndarray,
) -> np.ndarray:
    pos = np.empty((edge_of.shape[0], V.shape[1]))
    em = edge_of >= 0
    if em.any():
        ij = graph.edges[edge_of[em]]
        t = param_of[em][:, None]
        pos[em] = (1.0 - t) * V[ij[:, 0]] + t * V[ij[:, 1]]
    if (~em).any():
        # vertex_of is full-length, aligned with edge_of
        pos[~em] = V[vertex_of[~em]]
    return pos


def _plan_fixed_cost(
    plan: TransportPlan, positions: np.ndarray
) -> float:
    x = plan.source.points[plan.src_idx]
    s = positions[plan.tgt_idx]
    d = np.linalg.norm(x - s, axis=1)
    return float(np.dot(plan.mass, d**plan.p))


def _interp_matrix(
    graph: EmbeddedGraph, edge_of: np.ndarray, param_of: np.ndarray,
    vertex_of: np.ndarray,
) -> np.ndarray:
    B = np.zeros((edge_of.shape[0], graph.n_vertices))
    rows = np.arange(edge_of.shape[0])
    em = edge_of >= 0
    ij = graph.edges[edge_of[em]]
    B[rows[em], ij[:, 0]] = 1.0 - param_of[em]
    B[rows[em], ij[:, 1]] += param_of[em]
    B[rows[~em], vertex_of[~em]] = 1.0
    return B


def move_vertices(
    rho0: DiscreteMeasure,
    nu: CurveMeasure,
    plan: TransportPlan,
    lam: float,
    mode: str,
    step_control: Optional[dict] = None,
) -> EmbeddedGraph:
    """One geometry update of nu's support holding the coupling fixed.

    For p = 2 the new vertex positions solve a weighted least-squares fit
    of the quadrature sites to the barycenters of their incoming mass,
    with the length-penalty gradient added as a linear term when active
    (always in uniform mode). Other p take a subgradient step. The step is
    halved up to max_halvings times until the plan-fixed energy decreases;
    otherwise the graph is returned unchanged. Vertices are kept inside
    the convex hull of rho0's support.
    """
    graph, new_V, accepted = _propose_and_screen(
        rho0, nu, plan, lam, mode, step_control or {}
    )
    return graph.with_vertices(new_V) if accepted else graph


def _site_layout(nu: CurveMeasure, plan: TransportPlan, step_control: dict):
    """Recover (edge_of, param_of, vertex_of) for the plan's target sites."""
    if "site_info" in step_control:
        info = step_control["site_info"]
        return info["site_edge"], info["site_param"], info.get("site_vertex")
    g = nu.graph
    counts = step_control.get("counts")
    disc, info = discretize_curve_measure(
        nu,
        sites_per_unit=step_control.get("sites_per_unit", 200.0),
        counts=counts,
    )
    if disc.points.shape != plan.target.points.shape or not np.allclose(
        disc.points, plan.target.points, atol=1e-12
    ):
        raise ValueError(
            "plan targets do not match the quadrature of nu; pass site_info"
        )
    return info["edge_of_site"], info["param_of_site"], info["atom_vertex"]


def _propose_and_screen(
    rho0: DiscreteMeasure,
    nu: CurveMeasure,
    plan: TransportPlan,
    lam: float,
    mode: str,
    ctl: dict,
):
    graph = nu.graph
    if graph.singleton:
        target = p_mean(rho0, plan.p) if plan.p != 2 else (
            rho0.weights @ rho0.points / rho0.weights.sum()
        )
        V_new = np.atleast_2d(target)
        if np.allclose(V_new, graph.vertices):
            return graph, graph.vertices, False
        return graph, V_new, True
    edge_of, param_of, vertex_of = _site_layout(nu, plan, ctl)
    em = edge_of >= 0
    vertex_site_ids = np.where(~em)[0]
    vof = np.asarray(vertex_of if vertex_of is not None else [], dtype=int)
    if vof.shape[0] != vertex_site_ids.shape[0]:
        raise ValueError("site layout inconsistent with plan targets")
    vertex_of_full = np.zeros(edge_of.shape[0], dtype=int)
    vertex_of_full[vertex_site_ids] = vof

    V = graph.vertices
    n_sites = edge_of.shape[0]
    w_in = np.bincount(plan.tgt_idx, weights=plan.mass, minlength=n_sites)
    sums = np.zeros((n_sites, V.shape[1]))
    np.add.at(sums, plan.tgt_idx, plan.mass[:, None] * plan.source.points[plan.src_idx])
    has_mass = w_in > 0
    length_force = ctl.get("length_force")
    if length_force is None:
        length_force = mode == "uniform"
    forced_scale = ctl.get("forced_scale")
    max_halvings = int(ctl.get("max_halvings", 10))
    tik = float(ctl.get("tikhonov", 1e-10))

    B = _interp_matrix(graph, edge_of, param_of, vertex_of_full)
    p = plan.p
    if p == 2:
        Bw = B[has_mass] * w_in[has_mass][:, None]
        A = B[has_mass].T @ Bw
        targets = sums[has_mass] / w_in[has_mass][:, None]
        rhs = Bw.T @ targets
        if length_force and lam > 0:
            rhs = rhs - 0.5 * lam * _length_gradient(graph)
        scale = float(np.trace(A)) / max(graph.n_vertices, 1)
        A = A + tik * max(scale, 1e-30) * np.eye(graph.n_vertices)
        rhs = rhs + tik * max(scale, 1e-30) * V
        V_prop = np.linalg.solve(A, rhs)
    else:
        pos = _site_positions(V, graph, edge_of, param_of, vertex_of_full)
        x = plan.source.points[plan.src_idx]
        s = pos[plan.tgt_idx]
        diff = s - x
        dist = np.linalg.norm(diff, axis=1)
        coef = p * plan.mass * np.where(dist > 0, dist ** (p - 2), 0.0)
        g_sites = np.zeros_like(pos)
        np.add.at(g_sites, plan.tgt_idx, coef[:, None] * diff)
        g_vert = B.T @ g_sites
        if length_force and lam > 0:
            g_vert = g_vert + lam * _length_gradient(graph)
        gmax = np.abs(g_vert).max()
        if gmax == 0:
            return graph, V, False
        step0 = 0.25 * max(rho0.support_diameter(), 1e-9) / gmax
        V_prop = V - step0 * g_vert

    direction = V_prop - V
    if forced_scale is not None:
        direction = direction * float(forced_scale)
        if not np.any(direction):
            return graph, V, False
    pos_cur = _site_positions(V, graph, edge_of, param_of, vertex_of_full)
    base = _plan_fixed_cost(plan, pos_cur)
    if length_force and lam > 0:
        base += lam * total_length(graph)
    min_len = 1e-12 * (1.0 + float(np.abs(V).max()))
    s_step = 1.0
    for _ in range(max_halvings + 1):
        V_try = project_to_hull(rho0, V + s_step * direction)
        seg = V_try[graph.edges[:, 0]] - V_try[graph.edges[:, 1]]
        if np.linalg.norm(seg, axis=1).min() <= min_len:
            s_step *= 0.5
            continue
        pos_try = _site_positions(V_try, graph, edge_of, param_of, vertex_of_full)
        trial = _plan_fixed_cost(plan, pos_try)
        if length_force and lam > 0:
            trial += lam * float(
                np.linalg.norm(
                    V_try[graph.edges[:, 0]] - V_try[graph.edges[:, 1]], axis=1
                ).sum()
            )
        if trial < base - 1e-15 * max(abs(base), 1.0):
            return graph, V_try, True
        s_step *= 0.5
    return graph, V, False


class _State(NamedTuple):
    nu: CurveMeasure
    plan: TransportPlan
    w: float
    l: float
    E: float
    info: dict
    alpha: Optional[float]
    boundary_low: bool


def _evaluate_uniform(rho0, graph, p, lam, density) -> _State:
    counts = _per_edge_counts(graph, density)
    nu = CurveMeasure.uniform_on(graph)
    disc, dinfo = discretize_curve_measure(nu, counts=counts)
    plan = solve_ot(rho0, disc, p)
    l = length_of(nu)
    info = {
        "site_edge": dinfo["edge_of_site"],
        "site_param": dinfo["param_of_site"],
        "site_vertex": dinfo["atom_vertex"],
        "site_floor": disc.weights.copy(),
        "counts": counts,
        "alpha": None,
    }
    return _State(nu, plan, plan.cost, l, plan.cost + lam * l, info, None, False)


def _evaluate_relaxed(
    rho0, graph, p, lam, density, bracket_factor, tol_rel, prev_alpha
) -> _State:
    counts = _per_edge_counts(graph, density)
    res = optimize_alpha(
        rho0, graph, p, lam, counts,
        bracket_factor=bracket_factor, tol_rel=tol_rel,
        extra_alphas=(prev_alpha,),
    )
    l = length_of(res.nu)
    E = res.w_term + lam * l
    return _State(
        res.nu, res.plan, res.w_term, l, E, res.info, res.alpha, res.boundary_low
    )


def _evaluate_relaxed_fixed(
    rho0, graph, p, lam, density, alpha
) -> _State:
    counts = _per_edge_counts(graph, density)
    L = total_length(graph)
    alpha = max(alpha if alpha is not None else L, L)
    nu, plan, info = _optimize_densities(rho0, graph, alpha, p, counts)
    l = length_of(nu)
    return _State(nu, plan, plan.cost, l, plan.cost + lam * l, info, alpha, False)


def _principal_segment(rho0: DiscreteMeasure, n_vertices: int) -> EmbeddedGraph:
    w = rho0.weights / rho0.weights.sum()
    mean = w @ rho0.points
    centered = rho0.points - mean
    cov = centered.T @ (centered * w[:, None])
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    u = vecs[:, -1]
    sigma = math.sqrt(max(float(vals[-1]), 0.0))
    if sigma == 0.0:
        sigma = 1e-6
    t = np.linspace(-1.0, 1.0, n_vertices)
    V = mean + sigma * t[:, None] * u
    # a +-sigma span can poke outside the hull of the samples (bimodal
    # clouds); shrink about the mean until every vertex is inside
    if convex_hull_margin(rho0, V).max() > 1e-12:
        lo, hi = 0.0, 1.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            W = mean + mid * sigma * t[:, None] * u
            if convex_hull_margin(rho0, W).max() > 1e-12:
                hi = mid
            else:
                lo = mid
        scale = lo if lo > 0.0 else 1e-9
        V = mean + scale * sigma * t[:, None] * u
    edges = [(i, i + 1) for i in range(n_vertices - 1)]
    return EmbeddedGraph(V, edges)


def _kmeans_tree(
    rho0: DiscreteMeasure, k: int, rng: np.random.Generator
) -> Optional[EmbeddedGraph]:
    pts = rho0.points[rho0.weights > 0]
    wts = rho0.weights[rho0.weights > 0]
    uniq = np.unique(pts, axis=0)
    k = min(k, uniq.shape[0])
    if k < 2:
        return None
    idx = rng.choice(uniq.shape[0], size=k, replace=False)
    centers = uniq[idx].astype(float)
    for _ in range(25):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        for c in range(k):
            mask = assign == c
            if wts[mask].sum() > 0:
                centers[c] = wts[mask] @ pts[mask] / wts[mask].sum()
            else:
                centers[c] = pts[rng.integers(pts.shape[0])]
    centers = np.unique(np.round(centers, 12), axis=0)
    if centers.shape[0] < 2:
        return None
    return minimum_spanning_tree(centers)


def _prune_leaves(graph: EmbeddedGraph, nu: CurveMeasure) -> Optional[EmbeddedGraph]:
    """Drop leaf edges carrying mass below 1e-6; None when nothing to drop."""
    deg = np.bincount(graph.edges.ravel(), minlength=graph.n_vertices)
    edge_mass = nu.edge_masses()
    drop_edges = []
    for e, (i, j) in enumerate(graph.edges):
        leaf = None
        if deg[i] == 1:
            leaf = i
        elif deg[j] == 1:
            leaf = j
        if leaf is None:
            continue
        mass = edge_mass[e] + nu.vertex_atoms[leaf]
        if mass < 1e-6:
            drop_edges.append(e)
    if not drop_edges or len(drop_edges) == graph.n_edges:
        return None
    keep = np.ones(graph.n_edges, dtype=bool)
    keep[drop_edges] = False
    used = np.unique(graph.edges[keep].ravel())
    remap = -np.ones(graph.n_vertices, dtype=int)
    remap[used] = np.arange(used.size)
    new_edges = remap[graph.edges[keep]]
    try:
        return EmbeddedGraph(graph.vertices[used], new_edges)
    except ValueError:
        return None


def _split_worst_edge(
    graph: EmbeddedGraph, plan: TransportPlan, info: dict, min_len: float
) -> Optional[EmbeddedGraph]:
    """Split the edge with the highest transport-cost density at the
    cost-weighted mean parameter of its sites."""
    edge_of = info["site_edge"]
    param_of = info["site_param"]
    site_cost = np.bincount(
        plan.tgt_idx, weights=plan.entry_costs(), minlength=edge_of.shape[0]
    )
    site_cost_t = np.bincount(
        plan.tgt_idx,
        weights=plan.entry_costs() * param_of[plan.tgt_idx],
        minlength=edge_of.shape[0],
    )
    em = edge_of >= 0
    lens = graph.edge_lengths()
    edge_cost = np.bincount(
        edge_of[em], weights=site_cost[em], minlength=graph.n_edges
    )
    density = np.where(lens >= max(2 * min_len, 1e-12), edge_cost / lens, -1.0)
    e_star = int(np.argmax(density))
    if density[e_star] <= 0:
        return None
    edge_cost_t = np.bincount(
        edge_of[em], weights=site_cost_t[em], minlength=graph.n_edges
    )
    t_star = float(np.clip(edge_cost_t[e_star] / edge_cost[e_star], 0.05, 0.95))
    i, j = graph.edges[e_star]
    new_pt = graph.vertices[i] + t_star * (graph.vertices[j] - graph.vertices[i])
    V = np.concatenate([graph.vertices, new_pt[None, :]])
    k = graph.n_vertices
    edges = [tuple(e) for n, e in enumerate(graph.edges) if n != e_star]
    edges += [(int(i), k), (k, int(j))]
    try:
        return EmbeddedGraph(V, np.asarray(edges, dtype=int))
    except ValueError:
        return None


def _dirac_result(rho0, point, p, lam, trace, iterations) -> SolveResult:
    point = np.asarray(point, dtype=float)
    nu = CurveMeasure.dirac(point)
    target = DiscreteMeasure(np.atleast_2d(point), np.array([1.0]))
    plan = solve_ot(rho0, target, p)
    w = plan.cost
    if not trace or w <= trace[-1] + 1e-12:
        trace = trace + [w]
    return SolveResult(
        nu=nu, w_term=w, l_term=0.0, energy=w, iterations=iterations,
        energy_trace=trace, collapsed=True, collapse_point=point,
        plan=plan, details={"mode": "dirac"},
    )


def solve(
    rho0: DiscreteMeasure, config: SolverConfig, init_graph: Optional[EmbeddedGraph] = None
) -> SolveResult:
    """Minimize the transport-plus-length energy from a Dirac candidate and
    a graph candidate, returning whichever ends lower (ties go to the
    Dirac). The graph loop alternates transport (or density/scale) solves
    with vertex moves, plus topology edits every 5 iterations when
    enabled; every accepted step re-evaluates the true energy, making the
    trace nonincreasing."""
    if not rho0.is_probability(1e-9):
        raise ValueError("rho0 must be a probability measure")
    p, lam, mode = config.p, config.lam, config.mode
    density = config.quadrature_per_edge
    center = p_mean(rho0, p)
    dirac_energy = p_moment_cost(rho0, center, p)
    diam = rho0.support_diameter()
    if diam == 0.0:
        return _dirac_result(rho0, center, p, lam, [], 0)
    collapse_eps = (
        config.collapse_length_eps
        if config.collapse_length_eps is not None
        else 1e-3 * diam
    )

    def full_eval(graph, prev_alpha=None) -> _State:
        if mode == "uniform":
            return _evaluate_uniform(rho0, graph, p, lam, density)
        return _evaluate_relaxed(
            rho0, graph, p, lam, density,
            config.alpha_bracket_factor, config.tol_rel_energy, prev_alpha,
        )

    def cheap_eval(graph, alpha) -> _State:
        if mode == "uniform":
            return _evaluate_uniform(rho0, graph, p, lam, density)
        return _evaluate_relaxed_fixed(rho0, graph, p, lam, density, alpha)

    rng = np.random.default_rng(config.seed)
    candidates = []
    if init_graph is not None:
        candidates.append(init_graph)
    else:
        candidates.append(_principal_segment(rho0, config.n_vertices))
        if config.n_vertices > 2 and config.topology_moves:
            tree = _kmeans_tree(rho0, config.n_vertices, rng)
            if tree is not None:
                candidates.append(tree)
    best_graph, state = None, None
    for g in candidates:
        st = full_eval(g)
        if state is None or st.E < state.E:
            best_graph, state = g, st
    graph = best_graph
    trace = [state.E]
    iterations = 0

    for it in range(1, config.max_outer_iters + 1):
        iterations = it
        prev_E = state.E

        if config.topology_moves and it % 5 == 0:
            pruned = _prune_leaves(graph, state.nu)
            if pruned is not None:
                st2 = full_eval(pruned, state.alpha)
                if st2.E <= state.E + 1e-12:
                    graph, state = pruned, st2
            split = _split_worst_edge(graph, state.plan, state.info, collapse_eps)
            if split is not None:
                st2 = full_eval(split, state.alpha)
                if st2.E <= state.E + 1e-12:
                    graph, state = split, st2

        ctl = {
            "site_info": state.info,
            "length_force": True if mode == "uniform" else state.boundary_low,
        }
        _, V_new, moved = _propose_and_screen(rho0, state.nu, state.plan, lam, mode, ctl)
        if moved:
            try:
                trial_graph = graph.with_vertices(V_new)
            except ValueError:
                trial_graph = None
            if trial_graph is not None:
                st2 = cheap_eval(trial_graph, state.alpha)
                if st2.E <= state.E + 1e-12:
                    graph = trial_graph
                    state = full_eval(graph, st2.alpha)
                    if state.E > st2.E + 1e-12:
                        state = st2
                else:
                    moved = False

        trace.append(min(state.E, trace[-1]))
        if total_length(graph) < collapse_eps and dirac_energy <= state.E + 1e-12:
            return _dirac_result(rho0, center, p, lam, trace, it)
        if prev_E - state.E < config.tol_rel_energy * max(abs(prev_E), 1e-12):
            break

    if dirac_energy <= state.E + 1e-12:
        return _dirac_result(rho0, center, p, lam, trace, iterations)
    return SolveResult(
        nu=state.nu,
        w_term=state.w,
        l_term=state.l,
        energy=state.E,
        iterations=iterations,
        energy_trace=trace,
        collapsed=False,
        collapse_point=None,
        plan=state.plan,
        details={
            "mode": mode,
            "alpha": state.alpha,
            "site_floor": state.info.get("site_floor"),
            "site_edge": state.info.get("site_edge"),
            "site_param": state.info.get("site_param"),
            "boundary_low": state.boundary_low,
        },
    )


def sweep_lambda(
    rho0: DiscreteMeasure, lambdas, config: SolverConfig
) -> tuple[list[SolveResult], Optional[float]]:
    """Solve along a strictly decreasing penalty schedule, warm-starting
    each run from the previous support. Returns the results and the
    midpoint of the first adjacent pair where the collapse flag flips from
    true to false (None when no flip is observed)."""
    lams = [float(x) for x in lambdas]
    if any(x <= 0 for x in lams):
        raise ValueError("penalty values must be positive")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("penalty values must be strictly decreasing")
    results = []
    warm = None
    for lam in lams:
        cfg = replace(config, lam=lam)
        res = solve(rho0, cfg, init_graph=warm)
        results.append(res)
        warm = None if res.collapsed or res.nu.graph.singleton else res.nu.graph
    lambda_star = None
    for a, b in zip(range(len(results)), range(1, len(results))):
        if results[a].collapsed and not results[b].collapsed:
            lambda_star = 0.5 * (lams[a] + lams[b])
            break
    return results, lambda_star


def lambda_star_bounds(rho0: DiscreteMeasure, p: float) -> dict:
    """Upper bounds on the penalty above which the optimum is a point mass.

    diam_bound holds for every p; p = 1 and p = 2 admit sharper closed
    forms; general_bound scans candidate centers over a ball around the
    p-mean of radius twice the transport distance to it.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    w = rho0.weights / rho0.weights.sum()
    diam = rho0.support_diameter()
    out = {"diam_bound": p * diam ** (p - 1) if diam > 0 else 0.0}
    if p == 1:
        out["p1_bound"] = 1.0
    if p == 2:
        mean = w @ rho0.points
        out["p2_bound"] = 2.0 * float(
            w @ np.linalg.norm(rho0.points - mean, axis=1)
        )
    center = p_mean(rho0, p)
    radius = 2.0 * p_moment_cost(rho0, center, p) ** (1.0 / p)
    d = rho0.dimension
    per_axis = 7 if d <= 3 else 3
    axes = [np.linspace(c - radius, c + radius, per_axis) for c in center]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    inside = np.linalg.norm(grid - center, axis=1) <= radius + 1e-12
    grid = grid[inside] if inside.any() else np.atleast_2d(center)
    vals = [
        p * float(w @ np.linalg.norm(rho0.points - y0, axis=1) ** (p - 1))
        for y0 in grid
    ]
    out["general_bound"] = max(vals)
    return out
