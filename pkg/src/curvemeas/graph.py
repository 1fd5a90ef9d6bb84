"""Connected embedded graphs in R^d with exact geometric queries.

A graph is a finite set of vertices joined by straight edges; it models a
compact connected set of finite length. Queries: total length, closest-point
projection, Hausdorff distance between two graphs (sampled, with an explicit
error bound), exact length of the intersection with a ball, transversal
sphere crossing counts, Euclidean minimum spanning trees, arc-length
sampling, JSON round-trip, and an SVG emitter for the plane.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DegenerateRadiusError, InputFormatError

__all__ = [
    "EmbeddedGraph",
    "ProjectionResult",
    "total_length",
    "project",
    "project_many",
    "hausdorff_distance",
    "ball_length",
    "sphere_crossings",
    "minimum_spanning_tree",
    "sample_arclength",
    "load_graph",
    "save_graph",
    "graph_to_svg",
]


class ProjectionResult(NamedTuple):
    point: np.ndarray
    edge_index: int
    param: float
    distance: float


@dataclass(frozen=True)
class EmbeddedGraph:
    """Vertices plus unordered straight edges; connected by construction.

    A single point is allowed only with singleton=True and no edges.
    Edges must be distinct as index pairs, non-degenerate (positive
    length), and must connect all vertices.
    """

    vertices: np.ndarray
    edges: np.ndarray
    singleton: bool = False

    def __post_init__(self):
        V = np.ascontiguousarray(np.atleast_2d(np.asarray(self.vertices, dtype=float)))
        if V.ndim != 2 or V.shape[0] == 0:
            raise ValueError("vertices must be a nonempty (n, d) array")
        if not np.all(np.isfinite(V)):
            raise ValueError("vertex coordinates must be finite")
        E = np.asarray(self.edges, dtype=int)
        if E.size == 0:
            E = np.zeros((0, 2), dtype=int)
        E = E.reshape(-1, 2)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "edges", E)
        n = V.shape[0]
        if self.singleton:
            if n != 1 or E.shape[0] != 0:
                raise ValueError("singleton graph must have exactly one vertex and no edges")
            return
        if E.shape[0] == 0:
            raise ValueError("non-singleton graph needs at least one edge")
        if E.min() < 0 or E.max() >= n:
            raise ValueError("edge index out of range")
        if np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loop edge")
        key = np.sort(E, axis=1)
        uniq = {(int(i), int(j)) for i, j in key}
        if len(uniq) != E.shape[0]:
            raise ValueError("duplicate edge")
        lens = np.linalg.norm(V[E[:, 1]] - V[E[:, 0]], axis=1)
        if np.any(lens <= 0.0):
            raise ValueError("zero-length edge")
        # connectivity via union-find
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in E:
            parent[find(int(i))] = find(int(j))
        roots = {find(k) for k in range(n)}
        if len(roots) != 1:
            raise ValueError("graph is not connected")

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def edge_lengths(self) -> np.ndarray:
        if self.singleton:
            return np.zeros(0)
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def with_vertices(self, new_vertices: np.ndarray) -> "EmbeddedGraph":
        return EmbeddedGraph(new_vertices, self.edges.copy(), self.singleton)

    def diameter_upper(self) -> float:
        """Diameter of the vertex set (equals the set diameter for polylines)."""
        V = self.vertices
        diff = V[:, None, :] - V[None, :, :]
        return float(np.sqrt((diff * diff).sum(-1)).max())


def total_length(graph: EmbeddedGraph) -> float:
    """Sum of Euclidean edge lengths; zero for a singleton."""
    if graph.singleton:
        return 0.0
    return float(graph.edge_lengths().sum())


def _segment_projection(A: np.ndarray, B: np.ndarray, x: np.ndarray):
    """Per-segment closest point of x on [A_k, B_k]; returns (t, dist2)."""
    U = B - A
    L2 = (U * U).sum(1)
    t = ((x - A) * U).sum(1) / L2
    t = np.clip(t, 0.0, 1.0)
    P = A + t[:, None] * U
    d2 = ((P - x) ** 2).sum(1)
    return t, d2


def project(graph: EmbeddedGraph, x) -> ProjectionResult:
    """Closest point of the graph to x.

    Ties between equidistant edges go to the smallest edge index, then the
    smallest parameter (any measurable selection is valid downstream; a
    deterministic one keeps runs reproducible).
    """
    x = np.asarray(x, dtype=float).ravel()
    if graph.singleton:
        v = graph.vertices[0]
        return ProjectionResult(v.copy(), -1, 0.0, float(np.linalg.norm(v - x)))
    A = graph.vertices[graph.edges[:, 0]]
    B = graph.vertices[graph.edges[:, 1]]
    t, d2 = _segment_projection(A, B, x)
    k = int(np.argmin(d2))  # argmin returns the first (smallest) index on ties
    point = A[k] + t[k] * (B[k] - A[k])
    return ProjectionResult(point, k, float(t[k]), float(np.sqrt(d2[k])))


def project_many(graph: EmbeddedGraph, X) -> np.ndarray:
    """Distances of many points to the graph (vectorized project)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if graph.singleton:
        return np.linalg.norm(X - graph.vertices[0], axis=1)
    A = graph.vertices[graph.edges[:, 0]]
    B = graph.vertices[graph.edges[:, 1]]
    U = B - A
    L2 = (U * U).sum(1)
    # (n_points, n_edges) parameter matrix
    T = np.einsum("pkd,kd->pk", X[:, None, :] - A[None, :, :], U) / L2
    T = np.clip(T, 0.0, 1.0)
    P = A[None, :, :] + T[:, :, None] * U[None, :, :]
    D2 = ((P - X[:, None, :]) ** 2).sum(-1)
    return np.sqrt(D2.min(axis=1))


def sample_arclength(graph: EmbeddedGraph, step: float) -> np.ndarray:
    """Points along the graph at arc spacing <= step, vertices included."""
    if graph.singleton:
        return graph.vertices.copy()
    if step <= 0:
        raise ValueError("step must be positive")
    chunks = [graph.vertices]
    A = graph.vertices[graph.edges[:, 0]]
    B = graph.vertices[graph.edges[:, 1]]
    lens = graph.edge_lengths()
    for k in range(graph.n_edges):
        m = int(np.ceil(lens[k] / step))
        if m >= 2:
            t = np.arange(1, m)[:, None] / m
            chunks.append(A[k] + t * (B[k] - A[k]))
    return np.concatenate(chunks, axis=0)


def hausdorff_distance(A: EmbeddedGraph, B: EmbeddedGraph, resolution: float) -> float:
    """Symmetric Hausdorff distance via arc-length sampling + exact projection.

    Each directed distance is evaluated on samples spaced <= resolution and
    projected exactly into the other graph, so the result never exceeds the
    true distance by more than resolution/2 and never underestimates the
    sampled direction.
    """
    if A.dimension != B.dimension:
        raise ValueError("dimension mismatch")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    d_ab = float(project_many(B, sample_arclength(A, resolution)).max())
    d_ba = float(project_many(A, sample_arclength(B, resolution)).max())
    return max(d_ab, d_ba)


def _edge_ball_interval(a, b, c, r):
    """Parameter interval of {t in [0,1] : |a + t(b-a) - c| < r}, or None."""
    u = b - a
    w = a - c
    A = float(u @ u)
    Bc = 2.0 * float(u @ w)
    C = float(w @ w) - r * r
    disc = Bc * Bc - 4.0 * A * C
    if disc <= 0.0:
        return None
    s = float(np.sqrt(disc))
    t0 = (-Bc - s) / (2.0 * A)
    t1 = (-Bc + s) / (2.0 * A)
    lo, hi = max(t0, 0.0), min(t1, 1.0)
    if hi <= lo:
        return None
    return lo, hi


def ball_length(graph: EmbeddedGraph, x, r: float) -> float:
    """Exact length of the graph inside the open ball B_r(x)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float).ravel()
    if graph.singleton:
        return 0.0
    V = graph.vertices
    lens = graph.edge_lengths()
    out = 0.0
    for k, (i, j) in enumerate(graph.edges):
        iv = _edge_ball_interval(V[i], V[j], x, r)
        if iv is not None:
            out += (iv[1] - iv[0]) * lens[k]
    return out


def sphere_crossings(graph: EmbeddedGraph, x, r: float) -> int:
    """Count transversal intersections of the graph with the sphere |y-x| = r.

    Raises DegenerateRadiusError when the sphere passes through a vertex or
    is tangent to an edge within 1e-12; callers perturb r (the quantity is
    only needed for almost every radius).
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float).ravel()
    if graph.singleton:
        return 0
    V = graph.vertices
    vdist = np.linalg.norm(V - x, axis=1)
    if np.any(np.abs(vdist - r) < 1e-12):
        raise DegenerateRadiusError("sphere passes through a vertex")
    count = 0
    for i, j in graph.edges:
        a, b = V[i], V[j]
        u = b - a
        w = a - x
        A = float(u @ u)
        Bc = 2.0 * float(u @ w)
        C = float(w @ w) - r * r
        disc = Bc * Bc - 4.0 * A * C
        scale = max(Bc * Bc, abs(4.0 * A * C), 1e-300)
        if abs(disc) <= 1e-12 * scale:
            # tangency within tolerance: closest approach sits on the sphere
            raise DegenerateRadiusError("sphere tangent to an edge")
        if disc < 0.0:
            continue
        s = float(np.sqrt(disc))
        for t in ((-Bc - s) / (2.0 * A), (-Bc + s) / (2.0 * A)):
            if abs(t) < 1e-12 or abs(t - 1.0) < 1e-12:
                raise DegenerateRadiusError("sphere passes through an edge endpoint")
            if 0.0 < t < 1.0:
                count += 1
    return count


def minimum_spanning_tree(points) -> EmbeddedGraph:
    """Euclidean MST over the points, as an embedded graph."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = P.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return EmbeddedGraph(P, [], singleton=True)
    from scipy.sparse.csgraph import minimum_spanning_tree as _mst
    from scipy.spatial.distance import squareform, pdist

    D = squareform(pdist(P))
    T = _mst(D).tocoo()
    edges = np.stack([T.row, T.col], axis=1)
    return EmbeddedGraph(P, edges)


def load_graph(source) -> EmbeddedGraph:
    """Read the JSON graph format {dimension, vertices, edges}."""
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
    try:
        V = np.asarray(spec["vertices"], dtype=float)
        E = spec.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"bad graph spec: {exc}") from exc
    d = spec.get("dimension")
    V = np.atleast_2d(V)
    if d is not None and int(d) != V.shape[1]:
        raise InputFormatError(
            f"declared dimension {d} but vertices have {V.shape[1]} coordinates"
        )
    singleton = bool(spec.get("singleton", V.shape[0] == 1 and len(E) == 0))
    try:
        return EmbeddedGraph(V, E, singleton=singleton)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from exc


def save_graph(graph: EmbeddedGraph, path) -> None:
    from ._serialize import dump_json

    spec = {
        "dimension": graph.dimension,
        "vertices": graph.vertices.tolist(),
        "edges": graph.edges.tolist(),
    }
    if graph.singleton:
        spec["singleton"] = True
    dump_json(spec, path)


def graph_to_svg(
    graph: EmbeddedGraph,
    measure_points: np.ndarray | None = None,
    measure_weights: np.ndarray | None = None,
    width: int = 640,
) -> str:
    """Plain SVG drawing of a planar graph, optional measure overlay.

    Circle areas scale with weights. Write-only output; never parsed back.
    """
    if graph.dimension != 2:
        raise ValueError("SVG emitter supports dimension 2 only")
    pts = [graph.vertices]
    if measure_points is not None:
        pts.append(np.atleast_2d(measure_points))
    allp = np.concatenate(pts, axis=0)
    lo = allp.min(axis=0)
    hi = allp.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.06 * float(span.max())
    lo, hi = lo - pad, hi + pad
    span = hi - lo
    scale = width / span[0]
    height = int(np.ceil(span[1] * scale))

    def to_px(p):
        q = (p - lo) * scale
        return q[0], height - q[1]  # flip y for screen coordinates

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if measure_points is not None:
        w = (
            np.asarray(measure_weights, dtype=float)
            if measure_weights is not None
            else np.full(len(measure_points), 1.0 / len(measure_points))
        )
        wmax = w.max() if w.size and w.max() > 0 else 1.0
        for p, wi in zip(np.atleast_2d(measure_points), w):
            cx, cy = to_px(np.asarray(p, dtype=float))
            rad = 2.0 + 10.0 * float(np.sqrt(wi / wmax))
            lines.append(
                f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{rad:.3f}" '
                'fill="#4878CF" fill-opacity="0.45"/>'
            )
    for i, j in graph.edges:
        x1, y1 = to_px(graph.vertices[i])
        x2, y2 = to_px(graph.vertices[j])
        lines.append(
            f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
            'stroke="#D1495B" stroke-width="2.5" stroke-linecap="round"/>'
        )
    for v in graph.vertices:
        cx, cy = to_px(v)
        lines.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="3.0" fill="#30323D"/>')
    lines.append("</svg>")
    return "\n".join(lines)
