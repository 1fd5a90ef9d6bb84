"""The length functional on measures carried by embedded graphs.

A CurveMeasure is a probability measure on a connected graph: constant
density per edge plus vertex atoms. The length functional is the smallest
alpha >= 0 with alpha * nu >= (length measure on the support); for this
representation it evaluates in closed form as the largest reciprocal edge
density, is zero exactly for a point mass, and is infinite when some edge
carries no density. The module also evaluates the functional from a
parametrized traversal (chain length over essential minimum multiplicity),
estimates it from below by ball ratios, rescales densities under affine
maps, and builds the uniformizing approximation: a grid-cube construction
adding segments whose total length per cube equals that cube's excess
alpha * nu(Q) - H1(Sigma in Q), so the enlarged set has total length exactly
alpha while staying Wasserstein-close to nu.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .graph import EmbeddedGraph, total_length
from .measures import DiscreteMeasure

__all__ = [
    "CurveMeasure",
    "length_of",
    "length_parametric",
    "ball_ratio_estimate",
    "approximate_uniform",
    "apply_affine",
    "discretize_curve_measure",
    "load_curve_measure",
    "save_curve_measure",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class CurveMeasure:
    """Probability measure on an embedded graph.

    edge_density[e] is mass per unit length along edge e (constant on the
    edge); vertex_atoms[v] is point mass at vertex v. Total mass must be 1
    within 1e-12. A zero-density edge is allowed; it sends the length
    functional to infinity rather than being an error.
    """

    graph: EmbeddedGraph
    edge_density: np.ndarray
    vertex_atoms: np.ndarray

    def __post_init__(self):
        theta = np.ascontiguousarray(
            np.asarray(self.edge_density, dtype=float).ravel()
        )
        atoms = np.ascontiguousarray(
            np.asarray(self.vertex_atoms, dtype=float).ravel()
        )
        if theta.shape[0] != self.graph.n_edges:
            raise ValueError(
                f"{theta.shape[0]} densities for {self.graph.n_edges} edges"
            )
        if atoms.shape[0] != self.graph.n_vertices:
            raise ValueError(
                f"{atoms.shape[0]} atoms for {self.graph.n_vertices} vertices"
            )
        if np.any(theta < 0) or np.any(atoms < 0):
            raise ValueError("densities and atoms must be nonnegative")
        object.__setattr__(self, "edge_density", theta)
        object.__setattr__(self, "vertex_atoms", atoms)
        mass = self.total_mass()
        if abs(mass - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {mass:.17g} is not 1 within {_MASS_TOL}")

    def total_mass(self) -> float:
        edge_part = float(self.edge_density @ self.graph.edge_lengths())
        return edge_part + float(self.vertex_atoms.sum())

    def edge_masses(self) -> np.ndarray:
        return self.edge_density * self.graph.edge_lengths()

    @classmethod
    def uniform_on(cls, graph: EmbeddedGraph) -> "CurveMeasure":
        """The normalized length measure on the graph; point mass if singleton."""
        if graph.singleton:
            return cls(graph, np.zeros(0), np.ones(1))
        L = total_length(graph)
        theta = np.full(graph.n_edges, 1.0 / L)
        return cls(graph, theta, np.zeros(graph.n_vertices))

    @classmethod
    def dirac(cls, point) -> "CurveMeasure":
        g = EmbeddedGraph(np.atleast_2d(np.asarray(point, dtype=float)), [], singleton=True)
        return cls(g, np.zeros(0), np.ones(1))

    def is_dirac(self) -> bool:
        return self.graph.singleton


def length_of(nu: CurveMeasure) -> float:
    """Largest reciprocal edge density; 0 for a point mass, inf when an
    edge has zero density. Atoms never lower the value: they are singular
    with respect to the length measure and cannot help cover it."""
    if nu.graph.singleton:
        return 0.0
    theta_min = float(nu.edge_density.min())
    if theta_min == 0.0:
        return math.inf
    return 1.0 / theta_min


def _chain_segments(samples: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    pts = [samples[0]]
    for q in samples[1:]:
        if not np.array_equal(q, pts[-1]):
            pts.append(q)
    P = np.asarray(pts)
    if closed and P.shape[0] >= 2 and not np.array_equal(P[0], P[-1]):
        P = np.concatenate([P, P[:1]], axis=0)
    return P[:-1], P[1:]


def length_parametric(samples, closed: bool = False) -> tuple[float, float]:
    """Chain length and the length functional of the traversal's image
    measure: length / (essential minimum covering multiplicity).

    Multiplicity is found by overlaying the chain's segments: each segment
    is split where other segments' endpoints project onto it within the
    snap tolerance (1e-6 of the chain length), and coincident sub-segments
    are grouped. An injective chain has multiplicity 1 everywhere.
    """
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    if S.shape[0] < 2:
        raise ValueError("need at least two samples")
    A, B = _chain_segments(S, closed)
    if A.shape[0] == 0:
        raise ValueError("all samples coincide")
    seg_len = np.linalg.norm(B - A, axis=1)
    chain_len = float(math.fsum(seg_len))
    snap = 1e-6 * chain_len
    n = A.shape[0]

    # split each segment where any other segment's endpoint lands on it
    endpoints = np.concatenate([A, B], axis=0)
    subs_mid, subs_len, subs_owner = [], [], []
    for i in range(n):
        u = B[i] - A[i]
        L2 = seg_len[i] ** 2
        t = np.clip((endpoints - A[i]) @ u / L2, 0.0, 1.0)
        foot = A[i] + t[:, None] * u
        near = np.linalg.norm(foot - endpoints, axis=1) <= snap
        params = np.unique(np.concatenate([[0.0, 1.0], t[near]]))
        for t0, t1 in zip(params[:-1], params[1:]):
            piece = (t1 - t0) * seg_len[i]
            if piece <= max(10.0 * snap, 1e-12 * chain_len):
                continue
            subs_mid.append(A[i] + 0.5 * (t0 + t1) * u)
            subs_len.append(piece)
            subs_owner.append(i)
    mids = np.asarray(subs_mid)
    lens = np.asarray(subs_len)
    k = mids.shape[0]
    if k == 0:
        return chain_len, chain_len

    # group coincident sub-segments (direction-insensitive)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(k):
        close = (
            (np.linalg.norm(mids - mids[i], axis=1) <= 2.0 * snap)
            & (np.abs(lens - lens[i]) <= 2.0 * snap)
        )
        for j in np.where(close)[0]:
            parent[find(int(j))] = find(i)
    counts: dict[int, int] = {}
    for i in range(k):
        r = find(i)
        counts[r] = counts.get(r, 0) + 1
    min_mult = min(counts.values())
    return chain_len, chain_len / min_mult


def ball_ratio_estimate(
    nu_points: DiscreteMeasure, graph: EmbeddedGraph, centers, radii
) -> float:
    """Max over (center, radius) of length(graph in ball) / nu(ball).

    A lower estimate of the length functional that refines toward it from
    below. A ball with positive graph length but zero discrete mass yields
    infinity. Singleton graphs return 0.
    """
    from .graph import ball_length, project

    if graph.singleton:
        return 0.0
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    scale = 1.0 + float(np.abs(graph.vertices).max())
    for c in C:
        if project(graph, c).distance > 1e-9 * scale:
            raise ValueError("all centers must lie on the graph")
    best = 0.0
    for c in C:
        dists = np.linalg.norm(nu_points.points - c, axis=1)
        for r in np.asarray(radii, dtype=float).ravel():
            if r <= 0:
                raise ValueError("radii must be positive")
            bl = ball_length(graph, c, r)
            mass = float(nu_points.weights[dists < r].sum())
            if bl == 0.0 and mass == 0.0:
                continue
            if mass == 0.0:
                return math.inf
            best = max(best, bl / mass)
    return best


def discretize_curve_measure(
    nu: CurveMeasure,
    sites_per_unit: float = 200.0,
    min_per_edge: int = 3,
    counts=None,
) -> tuple[DiscreteMeasure, dict]:
    """Quadrature discretization: per edge, k midpoints carrying equal
    shares of the edge mass (k scales with length, floored, or given
    explicitly via counts); vertex atoms stay at their vertices. Returns
    the site measure and index metadata (edge of each site, its parameter,
    and atom site positions)."""
    g = nu.graph
    if g.singleton:
        pts = g.vertices.copy()
        return (
            DiscreteMeasure(pts, np.array([1.0])),
            {
                "edge_of_site": np.array([-1]),
                "param_of_site": np.array([0.0]),
                "atom_vertex": np.array([0]),
                "n_edge_sites": 0,
                "counts": np.zeros(0, dtype=int),
            },
        )
    lens = g.edge_lengths()
    if counts is None:
        counts = np.maximum(min_per_edge, np.ceil(sites_per_unit * lens).astype(int))
    else:
        counts = np.broadcast_to(
            np.asarray(counts, dtype=int), (g.n_edges,)
        ).copy()
        if np.any(counts < 1):
            raise ValueError("need at least one site per edge")
    pts, wts, edge_of, param_of = [], [], [], []
    A = g.vertices[g.edges[:, 0]]
    B = g.vertices[g.edges[:, 1]]
    for e in range(g.n_edges):
        k = int(counts[e])
        t = (np.arange(k) + 0.5) / k
        pts.append(A[e] + t[:, None] * (B[e] - A[e]))
        wts.append(np.full(k, nu.edge_density[e] * lens[e] / k))
        edge_of.append(np.full(k, e, dtype=int))
        param_of.append(t)
    atom_vertex = np.where(nu.vertex_atoms > 0)[0]
    if atom_vertex.size:
        pts.append(g.vertices[atom_vertex])
        wts.append(nu.vertex_atoms[atom_vertex])
        edge_of.append(np.full(atom_vertex.size, -1, dtype=int))
        param_of.append(np.zeros(atom_vertex.size))
    measure = DiscreteMeasure(np.concatenate(pts), np.concatenate(wts))
    info = {
        "edge_of_site": np.concatenate(edge_of),
        "param_of_site": np.concatenate(param_of),
        "atom_vertex": atom_vertex,
        "n_edge_sites": int(counts.sum()),
        "counts": counts,
    }
    return measure, info


def _edge_cube_pieces(a: np.ndarray, b: np.ndarray, n: int):
    """Split segment [a, b] at grid planes k/n; yield (t0, t1, cube_index)."""
    d = a.size
    ts = [0.0, 1.0]
    for c in range(d):
        lo, hi = (a[c], b[c]) if a[c] <= b[c] else (b[c], a[c])
        k0 = int(np.ceil(lo * n))
        k1 = int(np.floor(hi * n))
        for k in range(k0, k1 + 1):
            plane = k / n
            if b[c] != a[c]:
                t = (plane - a[c]) / (b[c] - a[c])
                if 0.0 < t < 1.0:
                    ts.append(t)
    ts = np.unique(np.asarray(ts))
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 <= t0:
            continue
        mid = a + 0.5 * (t0 + t1) * (b - a)
        cube = tuple(int(v) for v in np.floor(mid * n))
        yield float(t0), float(t1), cube


def _place_comb(
    budget: float,
    attach_point: np.ndarray,
    attach_vertex: int,
    runs: list[tuple[float, int, float]],
    new_vertices: list,
    new_edges: list,
    next_index: int,
) -> tuple[float, int]:
    """Lay `budget` of new length inside one cube, attached at one point.

    If the budget fits in a single axis run it becomes one segment. Larger
    budgets become a comb: a spine along the best run, subdivided at anchor
    vertices, with parallel teeth along the second-best direction hanging
    off the anchors. Teeth on distinct anchors are disjoint, so the new set
    is embedded and its measure equals the budget. Runs are pre-capped at
    the cube inradius and sorted best-first.
    """
    spine_cap, c_sp, sign_sp = runs[0]
    if spine_cap <= 1e-15:
        # attachment pinned to a corner with zero room (atom exactly on a
        # grid point of a degenerate cube); poke along the first axis
        spine_cap, c_sp, sign_sp = budget, 0, 1.0
    spine_len = min(budget, spine_cap)
    rem = budget - spine_len
    tooth = next(
        ((cap, c, s) for cap, c, s in runs[1:] if c != c_sp and cap > 1e-15),
        None,
    )
    if rem <= 1e-15 * max(budget, 1.0) or tooth is None or tooth[0] < rem / 5000:
        # single segment; anything unplaceable (1-d overflow) stacks here
        k_teeth = 0 if rem <= 1e-15 * max(budget, 1.0) else int(np.ceil(rem / spine_len))
        tip = attach_point.copy()
        tip[c_sp] += sign_sp * spine_len
        new_vertices.append(tip)
        new_edges.append((attach_vertex, next_index))
        next_index += 1
        placed = spine_len
        for i in range(k_teeth):
            seg = min(rem, spine_len)
            tip = attach_point.copy()
            tip[c_sp] += sign_sp * seg
            new_vertices.append(tip)
            new_edges.append((attach_vertex, next_index))
            next_index += 1
            placed += seg
            rem -= seg
        return placed, next_index
    tooth_cap, c_t, sign_t = tooth
    k = int(np.ceil(rem / tooth_cap))
    tooth_len = rem / k
    anchors_t = (np.arange(k) + 1.0) / (k + 1.0)
    prev = attach_vertex
    placed = 0.0
    anchor_ids = []
    for t in anchors_t:
        pt = attach_point.copy()
        pt[c_sp] += sign_sp * t * spine_len
        new_vertices.append(pt)
        new_edges.append((prev, next_index))
        anchor_ids.append((next_index, pt))
        prev = next_index
        next_index += 1
    tip = attach_point.copy()
    tip[c_sp] += sign_sp * spine_len
    new_vertices.append(tip)
    new_edges.append((prev, next_index))
    next_index += 1
    placed += spine_len
    for anchor_idx, pt in anchor_ids:
        tooth_tip = pt.copy()
        tooth_tip[c_t] += sign_t * tooth_len
        new_vertices.append(tooth_tip)
        new_edges.append((anchor_idx, next_index))
        next_index += 1
        placed += tooth_len
    return placed, next_index


def approximate_uniform(
    nu: CurveMeasure,
    n: int,
    p: float = 2.0,
    wp_sites_per_unit: float = 20.0,
) -> tuple[EmbeddedGraph, dict]:
    """Enlarge the support so the normalized length measure approximates nu.

    Partition space into cubes of side 1/n. In each cube carrying mass the
    excess alpha * nu(Q) - H1(Sigma in Q) is nonnegative; that much new
    length is added as axis-aligned segments attached at the projection of
    the cube's mass barycenter onto the part of the support in the cube,
    each segment capped below the cube inradius. The enlarged graph has
    total length alpha (the value of the length functional) up to float
    roundoff, and the uniform measure on it converges to nu as n grows.

    A point mass gets the segment [x0, x0 + (1/n) e1] instead.

    Returns the enlarged graph and a report with per-cube rows
    {cube_index, mass, h1_length, excess} and a Wasserstein-p estimate
    between nu and the uniform measure on the result.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = length_of(nu)
    if math.isinf(alpha):
        raise ValueError("the length functional is infinite for this measure")
    g = nu.graph

    if g.singleton:
        x0 = g.vertices[0]
        tip = x0.copy()
        tip[0] += 1.0 / n
        sigma_n = EmbeddedGraph(np.stack([x0, tip]), [[0, 1]])
        report = {
            "n": n,
            "alpha": 0.0,
            "dirac": True,
            "cubes": [
                {
                    "cube_index": [int(v) for v in np.floor(x0 * n)],
                    "mass": 1.0,
                    "h1_length": 0.0,
                    "excess": 0.0,
                }
            ],
            "added_length": 1.0 / n,
        }
        report["w_p"] = _wp_estimate(nu, sigma_n, p, wp_sites_per_unit)
        return sigma_n, report

    V = g.vertices
    lens = g.edge_lengths()
    cubes: dict[tuple, dict] = {}

    def cube_entry(z):
        if z not in cubes:
            cubes[z] = {"mass": 0.0, "h1": 0.0, "pieces": [], "atom_vertices": []}
        return cubes[z]

    for e, (i, j) in enumerate(g.edges):
        a, b = V[i], V[j]
        for t0, t1, z in _edge_cube_pieces(a, b, n):
            piece_len = (t1 - t0) * lens[e]
            entry = cube_entry(z)
            entry["h1"] += piece_len
            entry["mass"] += nu.edge_density[e] * piece_len
            entry["pieces"].append((e, t0, t1, piece_len))
    for v in range(g.n_vertices):
        if nu.vertex_atoms[v] > 0:
            z = tuple(int(c) for c in np.floor(V[v] * n))
            entry = cube_entry(z)
            entry["mass"] += nu.vertex_atoms[v]
            entry["atom_vertices"].append(v)

    # excess per cube and the attachment/segment plan
    report_rows = []
    splits: dict[int, dict[float, int]] = {}
    new_vertices: list[np.ndarray] = []
    new_edges: list[tuple[int, int]] = []
    next_index = g.n_vertices

    def vertex_at_param(e: int, t: float) -> int:
        nonlocal next_index
        i, j = g.edges[e]
        if t <= 1e-12:
            return int(i)
        if t >= 1.0 - 1e-12:
            return int(j)
        table = splits.setdefault(e, {})
        for t_known, idx in table.items():
            if abs(t_known - t) <= 1e-12:
                return idx
        table[t] = next_index
        new_vertices.append(V[g.edges[e][0]] + t * (V[g.edges[e][1]] - V[g.edges[e][0]]))
        next_index += 1
        return table[t]

    added_total = 0.0
    # cubes where the density is exactly uniform cancel to roundoff dust;
    # placing dust would create segments below float resolution
    dust_tol = 1e-12 * max(alpha, 1.0)
    for z in sorted(cubes):
        entry = cubes[z]
        excess = alpha * entry["mass"] - entry["h1"]
        if excess < dust_tol:
            excess = 0.0
        report_rows.append(
            {
                "cube_index": list(z),
                "mass": entry["mass"],
                "h1_length": entry["h1"],
                "excess": excess,
            }
        )
        if excess <= 0.0:
            continue
        # attachment point: mass barycenter of the cube, projected onto the
        # part of the support inside this cube
        wsum = 0.0
        bary = np.zeros(g.dimension)
        for e, t0, t1, piece_len in entry["pieces"]:
            i, j = g.edges[e]
            mid = V[i] + 0.5 * (t0 + t1) * (V[j] - V[i])
            w = nu.edge_density[e] * piece_len
            bary += w * mid
            wsum += w
        for v in entry["atom_vertices"]:
            bary += nu.vertex_atoms[v] * V[v]
            wsum += nu.vertex_atoms[v]
        bary /= wsum
        attach_vertex = None
        attach_point = None
        if entry["pieces"]:
            best = (math.inf, None, None)
            for e, t0, t1, piece_len in entry["pieces"]:
                i, j = g.edges[e]
                u = V[j] - V[i]
                L2 = float(u @ u)
                t = float(np.clip((bary - V[i]) @ u / L2, t0, t1))
                pt = V[i] + t * u
                dist = float(np.linalg.norm(pt - bary))
                if dist < best[0]:
                    best = (dist, e, t)
            _, e_star, t_star = best
            attach_vertex = vertex_at_param(int(e_star), t_star)
            attach_point = V[g.edges[e_star][0]] + t_star * (
                V[g.edges[e_star][1]] - V[g.edges[e_star][0]]
            )
        else:
            v = entry["atom_vertices"][0]
            attach_vertex = int(v)
            attach_point = V[v]

        lo = np.asarray(z, dtype=float) / n
        inradius = 0.5 / n
        runs = []
        for c in range(g.dimension):
            runs.append((min(float(lo[c] + 1.0 / n - attach_point[c]), inradius), c, +1.0))
            runs.append((min(float(attach_point[c] - lo[c]), inradius), c, -1.0))
        runs.sort(key=lambda r: (-r[0], r[1], r[2]))
        placed, next_index = _place_comb(
            excess, attach_point, attach_vertex, runs,
            new_vertices, new_edges, next_index,
        )
        added_total += placed

    # rebuild edges with splits applied
    final_edges: list[tuple[int, int]] = []
    for e in range(g.n_edges):
        i, j = int(g.edges[e][0]), int(g.edges[e][1])
        table = splits.get(e, {})
        chain = sorted(table.items())
        prev = i
        for _, idx in chain:
            final_edges.append((prev, idx))
            prev = idx
        final_edges.append((prev, j))
    final_edges.extend(new_edges)
    all_vertices = (
        np.concatenate([V, np.asarray(new_vertices)]) if new_vertices else V.copy()
    )
    sigma_n = EmbeddedGraph(all_vertices, np.asarray(final_edges, dtype=int))

    report = {
        "n": n,
        "alpha": alpha,
        "dirac": False,
        "cubes": report_rows,
        "added_length": added_total,
        "w_p": _wp_estimate(nu, sigma_n, p, wp_sites_per_unit),
    }
    return sigma_n, report


def _wp_estimate(
    nu: CurveMeasure, sigma_n: EmbeddedGraph, p: float, sites_per_unit: float
) -> float:
    """Wasserstein-p distance between nu and the uniform measure on sigma_n,
    via matched quadrature discretizations and an exact transport solve."""
    from .transport import solve_ot

    uniform_n = CurveMeasure.uniform_on(sigma_n)
    d_nu, _ = discretize_curve_measure(nu, sites_per_unit, min_per_edge=2)
    d_un, _ = discretize_curve_measure(uniform_n, sites_per_unit, min_per_edge=2)
    plan = solve_ot(d_nu, d_un, p)
    return plan.cost ** (1.0 / p)


def apply_affine(nu: CurveMeasure, linear, shift) -> CurveMeasure:
    """Pushforward under x -> Ax + b for nonsingular A.

    Vertices map through; each edge keeps its mass, so its density scales
    by the inverse of the edge's stretch factor; atoms ride along.
    """
    A = np.asarray(linear, dtype=float)
    b = np.asarray(shift, dtype=float).ravel()
    d = nu.graph.dimension
    if A.shape != (d, d):
        raise ValueError(f"linear part must be {d}x{d}")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise ValueError("singular linear part collapses edges")
    g = nu.graph
    new_V = g.vertices @ A.T + b
    if g.singleton:
        new_g = EmbeddedGraph(new_V, [], singleton=True)
        return CurveMeasure(new_g, np.zeros(0), nu.vertex_atoms.copy())
    new_g = EmbeddedGraph(new_V, g.edges.copy())
    stretch = new_g.edge_lengths() / g.edge_lengths()
    return CurveMeasure(new_g, nu.edge_density / stretch, nu.vertex_atoms.copy())


def load_curve_measure(source) -> CurveMeasure:
    """Read the JSON format: graph fields plus edge_density and vertex_atoms."""
    if isinstance(source, dict):
        spec = source
    else:
        path = Path(source)
        if not path.exists():
            raise InputFormatError(f"no such file: {path}")
        try:
            with open(path) as fh:
                spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: invalid JSON: {exc}") from exc
    from .graph import load_graph

    graph = load_graph(
        {k: spec[k] for k in ("dimension", "vertices", "edges") if k in spec}
        | ({"singleton": spec["singleton"]} if "singleton" in spec else {})
    )
    try:
        return CurveMeasure(
            graph,
            np.asarray(spec.get("edge_density", []), dtype=float),
            np.asarray(spec.get("vertex_atoms", []), dtype=float),
        )
    except ValueError as exc:
        raise InputFormatError(str(exc)) from exc


def save_curve_measure(nu: CurveMeasure, path) -> None:
    from ._serialize import dump_json

    spec = {
        "dimension": nu.graph.dimension,
        "vertices": nu.graph.vertices.tolist(),
        "edges": nu.graph.edges.tolist(),
        "edge_density": nu.edge_density.tolist(),
        "vertex_atoms": nu.vertex_atoms.tolist(),
    }
    if nu.graph.singleton:
        spec["singleton"] = True
    dump_json(spec, path)
