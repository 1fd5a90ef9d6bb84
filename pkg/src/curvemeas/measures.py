"""Discrete probability measures on R^d.

Provides the weighted point cloud type used everywhere else, file ingestion
(JSON and CSV), seeded samplers for standard density families, p-th moment
costs, p-means (exact mean for p=2, smoothed Weiszfeld iteration for p=1,
gradient descent otherwise), and Euclidean distance to the closed convex
hull of the support.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputFormatError

__all__ = [
    "DiscreteMeasure",
    "load_measure",
    "save_measure",
    "sample_density",
    "p_moment_cost",
    "p_mean",
    "convex_hull_margin",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted points in R^d. Weights are nonnegative; zero weights are legal.

    Not forced to be a probability measure: plan marginals and restriction
    fragments reuse this type with arbitrary total mass.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=float)))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float).ravel())
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (n, d) array")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        neg = np.where(w < 0)[0]
        if neg.size:
            raise ValueError(f"negative weight at entry {neg[0]}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def is_probability(self, tol: float = _MASS_TOL) -> bool:
        return abs(self.total_mass() - 1.0) <= tol

    def normalized(self) -> "DiscreteMeasure":
        """Probability-normalize, pruning zero-weight entries."""
        mass = self.total_mass()
        if mass <= 0:
            raise ValueError("cannot normalize a zero-mass measure")
        keep = self.weights > 0
        return DiscreteMeasure(self.points[keep], self.weights[keep] / mass)

    def support_diameter(self) -> float:
        pts = self.points[self.weights > 0]
        if pts.shape[0] <= 1:
            return 0.0
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff * diff).sum(-1)).max())


def _measure_from_dict(spec: dict) -> DiscreteMeasure:
    try:
        pts = np.asarray(spec["points"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"bad measure spec: {exc}") from exc
    pts = np.atleast_2d(pts)
    if pts.ndim != 2:
        raise InputFormatError("points must form an (n, d) array")
    d = spec.get("dimension")
    if d is not None and int(d) != pts.shape[1]:
        raise InputFormatError(
            f"declared dimension {d} but points have {pts.shape[1]} coordinates"
        )
    if "weights" in spec and spec["weights"] is not None:
        w = np.asarray(spec["weights"], dtype=float).ravel()
    else:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    if w.shape[0] != pts.shape[0]:
        raise InputFormatError(f"{w.shape[0]} weights for {pts.shape[0]} points")
    neg = np.where(w < 0)[0]
    if neg.size:
        raise InputFormatError(f"negative weight at entry {neg[0]}")
    return DiscreteMeasure(pts, w)


def _measure_from_csv(path: Path) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputFormatError(f"{path}: empty CSV")
        cols = [c.strip().lower() for c in header]
        has_weight = bool(cols) and cols[-1] in ("weight", "w", "mass")
        rows = list(reader)
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    pts, wts = [], []
    for k, row in enumerate(rows):
        try:
            vals = [float(v) for v in row if v.strip() != ""]
        except ValueError as exc:
            raise InputFormatError(f"{path}: row {k + 2}: {exc}") from exc
        if has_weight:
            pts.append(vals[:-1])
            wts.append(vals[-1])
        else:
            pts.append(vals)
    widths = {len(p) for p in pts}
    if len(widths) != 1:
        raise InputFormatError(f"{path}: rows of mixed dimension {sorted(widths)}")
    return _measure_from_dict(
        {"points": pts, "weights": wts if has_weight else None}
    )


def load_measure(source, raw: bool = False) -> DiscreteMeasure:
    """Read a measure from a JSON/CSV file or an inline dict.

    Weights are normalized to total mass 1 unless ``raw`` is set. A total
    mass off by more than 1e-12 triggers a renormalization warning.
    """
    if isinstance(source, dict):
        measure = _measure_from_dict(source)
    else:
        path = Path(source)
        if not path.exists():
            raise InputFormatError(f"no such file: {path}")
        if path.suffix.lower() == ".csv":
            measure = _measure_from_csv(path)
        else:
            try:
                with open(path) as fh:
                    spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"{path}: invalid JSON: {exc}") from exc
            if not isinstance(spec, dict):
                raise InputFormatError(f"{path}: expected a JSON object")
            measure = _measure_from_dict(spec)
    if raw:
        return measure
    mass = measure.total_mass()
    if mass <= 0:
        raise InputFormatError("total mass must be positive")
    if abs(mass - 1.0) > _MASS_TOL:
        warnings.warn(
            f"weights sum to {mass:.17g}; renormalizing to 1", stacklevel=2
        )
    return measure.normalized()


def save_measure(measure: DiscreteMeasure, path) -> None:
    """Write the JSON measure format (round-trips through load_measure)."""
    from ._serialize import dump_json

    dump_json(
        {
            "dimension": measure.dimension,
            "points": measure.points.tolist(),
            "weights": measure.weights.tolist(),
        },
        path,
    )


def sample_density(spec: dict, n: int, seed: int) -> DiscreteMeasure:
    """Draw n equally weighted points from a named density family.

    Families: uniform_box (lo, hi), gaussian (mean, cov), uniform_segment
    (a, b), mixture (components: [{weight, spec}, ...]). Deterministic for
    a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pts = _sample_family(spec, n, rng)
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def _sample_family(spec: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    family = spec.get("family")
    if family == "uniform_box":
        lo = np.asarray(spec["lo"], dtype=float).ravel()
        hi = np.asarray(spec["hi"], dtype=float).ravel()
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("uniform_box needs lo < hi componentwise")
        return rng.uniform(lo, hi, size=(n, lo.size))
    if family == "gaussian":
        mean = np.asarray(spec["mean"], dtype=float).ravel()
        cov = np.asarray(spec.get("cov", 1.0), dtype=float)
        if cov.ndim == 0:
            if cov <= 0:
                raise ValueError("scalar covariance must be positive")
            cov = np.eye(mean.size) * float(cov)
        elif cov.ndim == 1:
            if np.any(cov <= 0):
                raise ValueError("diagonal covariance must be positive")
            cov = np.diag(cov)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        return mean + rng.standard_normal((n, mean.size)) @ chol.T
    if family == "uniform_segment":
        a = np.asarray(spec["a"], dtype=float).ravel()
        b = np.asarray(spec["b"], dtype=float).ravel()
        if a.shape != b.shape:
            raise ValueError("segment endpoints of different dimension")
        t = rng.uniform(0.0, 1.0, size=(n, 1))
        return a + t * (b - a)
    if family == "mixture":
        comps = spec["components"]
        w = np.asarray([c["weight"] for c in comps], dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("mixture weights must be nonnegative, not all zero")
        counts = rng.multinomial(n, w / w.sum())
        blocks = [
            _sample_family(c["spec"], int(k), rng)
            for c, k in zip(comps, counts)
            if k > 0
        ]
        pts = np.concatenate(blocks, axis=0)
        return pts[rng.permutation(n)]
    raise ValueError(f"unknown density family: {family!r}")


def p_moment_cost(rho: DiscreteMeasure, y, p: float) -> float:
    """Sum of w_i |x_i - y|^p."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != rho.dimension:
        raise ValueError(f"query dimension {y.size} != measure dimension {rho.dimension}")
    if p < 1:
        raise ValueError("p must be >= 1")
    dist = np.linalg.norm(rho.points - y, axis=1)
    return float(np.dot(rho.weights, dist**p))


def p_mean(rho: DiscreteMeasure, p: float, tol: float = 1e-9) -> np.ndarray:
    """Minimizer of y -> p_moment_cost(rho, y, p).

    p=2 is the exact weighted mean. p=1 runs a damped Weiszfeld iteration
    with 1e-9 smoothing near data points; the 1-mean may be non-unique (a
    median segment), in which case any minimizer is acceptable. Other p use
    gradient descent with backtracking. On hitting the iteration budget the
    best iterate is returned with a warning.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    w = rho.weights / rho.weights.sum()
    x = rho.points
    mean = w @ x
    if p == 2:
        return mean
    if p == 1:
        eps = 1e-9
        damping = 0.8
        y = mean.copy()
        for _ in range(5000):
            d = np.sqrt(((x - y) ** 2).sum(1) + eps * eps)
            coef = w / d
            y_new = y + damping * (coef @ x / coef.sum() - y)
            if np.linalg.norm(y_new - y) <= tol * (1.0 + np.linalg.norm(y)):
                return y_new
            y = y_new
        warnings.warn("1-mean iteration budget exhausted; returning best iterate")
        return y
    # general p > 1: smooth objective, gradient descent with backtracking
    y = mean.copy()
    obj = p_moment_cost(rho, y, p)
    step = 1.0 / max(p, 1.0)
    for _ in range(5000):
        diff = y - x
        dist = np.linalg.norm(diff, axis=1)
        dist = np.maximum(dist, 1e-15)
        grad = p * ((w * dist ** (p - 2)) @ diff)
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return y
        improved = False
        s = step
        for _ in range(40):
            cand = y - s * grad
            cand_obj = p_moment_cost(rho, cand, p)
            if cand_obj < obj:
                y, obj, improved = cand, cand_obj, True
                step = s * 1.5
                break
            s *= 0.5
        if not improved:
            return y
    warnings.warn("p-mean iteration budget exhausted; returning best iterate")
    return y


def _min_norm_point(P: np.ndarray, tol: float = 1e-12, max_iter: int = 2000) -> np.ndarray:
    """Wolfe's minimum-norm-point algorithm over conv(rows of P).

    Finite active-set method; returns the point of conv(P) closest to the
    origin. Used for exact hull distances in any dimension.
    """
    norms2 = (P * P).sum(1)
    active = [int(np.argmin(norms2))]
    lam = np.array([1.0])
    x = P[active[0]].copy()
    for _ in range(max_iter):
        # linear minimization step
        scores = P @ x
        j = int(np.argmin(scores))
        xx = float(x @ x)
        if xx - scores[j] <= tol * max(1.0, xx) or j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        # minor cycle: affine min-norm over the active set, staying in the simplex
        for _ in range(len(P) + 2):
            S = P[active]
            k = len(active)
            G = S @ S.T
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = G
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            beta = np.linalg.lstsq(A, rhs, rcond=None)[0][:k]
            if np.all(beta > 1e-14):
                lam = beta
                break
            shrink = lam - beta
            mask = shrink > 1e-14
            theta = np.min(lam[mask] / shrink[mask])
            lam = (1.0 - theta) * lam + theta * beta
            lam[lam < 1e-14] = 0.0
            keep = lam > 0.0
            if keep.all():
                lam = lam / lam.sum()
                break
            active = [a for a, kf in zip(active, keep) if kf]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[active]
    return x


def _hull_vertex_reduction(pts: np.ndarray) -> np.ndarray:
    """Reduce to hull vertices in d <= 3 when the point set is full-dimensional."""
    d = pts.shape[1]
    if d == 1:
        return np.array([[pts.min()], [pts.max()]])
    if d <= 3 and pts.shape[0] > d + 1:
        try:
            from scipy.spatial import ConvexHull

            return pts[np.unique(ConvexHull(pts).vertices)]
        except Exception:
            return pts  # degenerate (flat) configurations: fall through to full set
    return pts


def convex_hull_margin(rho: DiscreteMeasure, query) -> np.ndarray:
    """Distance of each query point to the closed convex hull of supp(rho).

    Zero for points inside the hull. Low dimension reduces to hull
    vertices first; the distance itself comes from Wolfe's minimum-norm
    point iteration over the convex-combination simplex (tolerance 1e-9).
    """
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    if Q.shape[1] != rho.dimension:
        raise ValueError(f"query dimension {Q.shape[1]} != measure dimension {rho.dimension}")
    support = rho.points[rho.weights > 0]
    if support.shape[0] == 0:
        support = rho.points
    base = _hull_vertex_reduction(support)
    out = np.empty(Q.shape[0])
    for k, q in enumerate(Q):
        z = _min_norm_point(base - q)
        d = float(np.linalg.norm(z))
        out[k] = d if d > 1e-9 else 0.0
    return out


def project_to_hull(rho: DiscreteMeasure, query) -> np.ndarray:
    """Closest points of the closed convex hull of supp(rho) to each query."""
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    support = rho.points[rho.weights > 0]
    if support.shape[0] == 0:
        support = rho.points
    base = _hull_vertex_reduction(support)
    out = np.empty_like(Q)
    for k, q in enumerate(Q):
        z = _min_norm_point(base - q)
        out[k] = q + z
    return out
