"""Spherical Voronoi clusters on S^n: parameters, point classification, interfaces.

A cluster is generated by quasi-center vectors c_i in R^(n+1) and curvature
scalars kappa_i; cell i is the set where <c_i, p> + kappa_i is minimal. The
compatibility constraint |c_i - c_j|^2 = 1 + (kappa_i - kappa_j)^2 on pairs
with a nonempty interface makes the cluster spherical (walls are geodesic
spheres of curvature kappa_ij with quasi-center c_ij).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import sampling
from .simplex import SUM_TOL, project_sum_zero

DEFAULT_TIE_TOL = 1e-9
SPHERICAL_TOL = 1e-9


@dataclass(frozen=True)
class ClusterParams:
    """Generating parameters of an affine/spherical Voronoi cluster on S^n.

    quasi_centers has shape (q, n+1) with rows summing to zero; curvatures has
    shape (q,) and sums to zero. Both conventions are enforced at construction.
    """

    n: int
    quasi_centers: np.ndarray
    curvatures: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.array(self.quasi_centers, dtype=float)
        k = np.array(self.curvatures, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.n + 1:
            raise ValueError(f"quasi_centers must have shape (q, {self.n + 1})")
        if k.shape != (c.shape[0],):
            raise ValueError("curvatures must have one entry per cell")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(k))):
            raise ValueError("parameters must be finite")
        if c.shape[0] < 2:
            raise ValueError("need at least two cells")
        if np.max(np.abs(c.sum(axis=0))) > SUM_TOL * max(1.0, np.abs(c).max()):
            raise ValueError("quasi-centers must sum to zero (use recentered())")
        if abs(k.sum()) > SUM_TOL * max(1.0, np.abs(k).max()):
            raise ValueError("curvatures must sum to zero (use recentered())")
        c.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "quasi_centers", c)
        object.__setattr__(self, "curvatures", k)

    @property
    def q(self) -> int:
        return self.quasi_centers.shape[0]

    def affine_values(self, points: np.ndarray) -> np.ndarray:
        """<c_i, p> + kappa_i for each cell, shape (..., q)."""
        p = np.asarray(points, dtype=float)
        return p @ self.quasi_centers.T + self.curvatures

    def pair_center(self, i: int, j: int) -> np.ndarray:
        return self.quasi_centers[i] - self.quasi_centers[j]

    def pair_curvature(self, i: int, j: int) -> float:
        return float(self.curvatures[i] - self.curvatures[j])

    def with_label(self, label: str) -> "ClusterParams":
        return ClusterParams(self.n, self.quasi_centers, self.curvatures, label)


def recentered(n: int, quasi_centers, curvatures, label: str = "",
               warn_above: float | None = None) -> ClusterParams:
    """Build ClusterParams after normalizing both sum conventions.

    If warn_above is set and the applied correction exceeds it, a warning is
    emitted (used by the JSON loader).
    """
    c = np.array(quasi_centers, dtype=float)
    k = np.array(curvatures, dtype=float)
    c_shift = np.max(np.abs(c.mean(axis=0)))
    k_shift = abs(k.mean())
    if warn_above is not None and max(c_shift, k_shift) > warn_above:
        warnings.warn(
            f"cluster parameters violated the sum conventions by "
            f"{max(c_shift, k_shift):.3e}; normalizing", RuntimeWarning)
    return ClusterParams(n, c - c.mean(axis=0), project_sum_zero(k), label)


@dataclass
class InterfaceGraph:
    """Which pairs (i, j) carry a nonempty interface, with sample witnesses."""

    q: int
    nonempty: np.ndarray
    witnesses: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    diagnostics: dict[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.nonempty, dtype=bool)
        if m.shape != (self.q, self.q) or not np.array_equal(m, m.T) or m.diagonal().any():
            raise ValueError("nonempty must be symmetric with empty diagonal")
        self.nonempty = m

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.q) for j in range(i + 1, self.q)
                if self.nonempty[i, j]]

    def is_connected(self, cells: list[int] | None = None) -> bool:
        """Connectivity of the adjacency graph restricted to the given cells."""
        nodes = list(range(self.q)) if cells is None else list(cells)
        if not nodes:
            return True
        seen = {nodes[0]}
        frontier = [nodes[0]]
        allowed = set(nodes)
        while frontier:
            i = frontier.pop()
            for j in nodes:
                if j not in seen and self.nonempty[i, j] and j in allowed:
                    seen.add(j)
                    frontier.append(j)
        return seen == set(nodes)


def complete_graph(q: int) -> InterfaceGraph:
    m = ~np.eye(q, dtype=bool)
    return InterfaceGraph(q, m)


def classify_point(params: ClusterParams, p, tie_tol: float = DEFAULT_TIE_TOL) -> np.ndarray:
    """Indices of cells whose affine value is within tie_tol of the minimum at p.

    A single index means p is interior to that cell; two or more mean p lies on
    the (tie_tol-thickened) boundary. p must be a unit vector.
    """
    p = np.asarray(p, dtype=float)
    if abs(p @ p - 1.0) > 2e-12:
        raise ValueError(f"point is not on the unit sphere: |p|^2 = {p @ p!r}")
    values = params.affine_values(p)
    return np.flatnonzero(values <= values.min() + tie_tol)


def classify_many(params: ClusterParams, points: np.ndarray) -> np.ndarray:
    """Argmin cell index for each row of points (ties resolved to lowest index)."""
    return np.argmin(params.affine_values(points), axis=-1)


def spherical_residuals(params: ClusterParams) -> np.ndarray:
    """|c_ij|^2 - 1 - kappa_ij^2 for every pair, as a symmetric (q, q) array."""
    c = params.quasi_centers
    k = params.curvatures
    g = c @ c.T
    d2 = np.diag(g)[:, None] + np.diag(g)[None, :] - 2.0 * g
    dk = k[:, None] - k[None, :]
    res = d2 - 1.0 - dk ** 2
    np.fill_diagonal(res, 0.0)
    return res


def _refine_interface_search(params: ClusterParams, i: int, j: int, center,
                             radius, basis, seed: int, tie_tol: float,
                             rounds: int = 14, per_round: int = 256):
    """Shrinking stochastic search for a point of the wall interior to the pair.

    Maximizes the margin min_k h_k - max(h_i, h_j) over the wall sphere by
    resampling around the incumbent with a geometrically shrinking radius;
    finds interfaces far smaller than uniform sampling can hit, and is
    deterministic for a fixed seed.
    """
    label = (i * params.q + j + 1) | (1 << 24)
    k_dim = basis.shape[1]
    others = [k for k in range(params.q) if k not in (i, j)]
    if not others:
        return sampling.subsphere_chunk(seed, label, 0, 1, center, radius, basis)[0]

    def margin(points):
        values = params.affine_values(points)
        lead = np.maximum(values[:, i], values[:, j])
        return values[:, others].min(axis=1) - lead

    best_w = None
    best_val = -np.inf
    sigma = 1.0
    for rnd in range(rounds):
        gauss = sampling.stream(seed, label, rnd).standard_normal((per_round, k_dim))
        if best_w is None:
            w = gauss
        else:
            w = best_w[None, :] + sigma * gauss
        w = w / np.linalg.norm(w, axis=1, keepdims=True)
        pts = center[None, :] + radius * (w @ basis.T)
        vals = margin(pts)
        top = int(np.argmax(vals))
        if vals[top] > best_val:
            best_val = float(vals[top])
            best_w = w[top]
        sigma *= 0.65
    if best_val > tie_tol:
        point = center + radius * (basis @ best_w)
        return point / np.linalg.norm(point)
    return None


def detect_interfaces(params: ClusterParams, samples_per_pair: int = 4096,
                      rng_seed: int = 0, tie_tol: float = DEFAULT_TIE_TOL,
                      refine: bool = True) -> InterfaceGraph:
    """Probabilistic interface detection by sampling each candidate wall sphere.

    For every pair the wall sphere S_ij (the cut of S^n by <c_ij, x> + kappa_ij
    = 0) is sampled uniformly; the pair is marked nonempty iff some sample is
    classified to exactly {i, j}. Pairs whose wall misses the sphere are marked
    empty with a diagnostic. Detection is probabilistic and tiny interfaces can
    elude the uniform pass, so pairs satisfying the compatibility constraint
    that come up empty get a deterministic shrinking search before being
    declared empty (disable with refine=False).
    """
    if samples_per_pair <= 0:
        raise ValueError("samples_per_pair must be positive")
    q = params.q
    nonempty = np.zeros((q, q), dtype=bool)
    witnesses: dict[tuple[int, int], np.ndarray] = {}
    diagnostics: dict[tuple[int, int], str] = {}
    residuals = spherical_residuals(params)
    for i in range(q):
        for j in range(i + 1, q):
            pair_label = i * q + j + 1
            frame = sampling.subsphere_frame(params.pair_center(i, j),
                                             params.pair_curvature(i, j))
            if frame is None:
                diagnostics[(i, j)] = "degenerate wall: hyperplane misses S^n"
                continue
            center, radius, basis = frame
            found = False
            for chunk, count in sampling.chunk_layout(samples_per_pair):
                pts = sampling.subsphere_chunk(rng_seed, pair_label, chunk, count,
                                               center, radius, basis)
                values = params.affine_values(pts)
                lead = np.minimum(values[:, i], values[:, j])
                others = np.delete(values, [i, j], axis=1)
                ok = others.min(axis=1) > lead + tie_tol if others.size else np.ones(count, bool)
                hits = np.flatnonzero(ok)
                if hits.size:
                    found = True
                    w = pts[hits[0]]
                    witnesses[(i, j)] = w / np.linalg.norm(w)
                    break
            if not found and refine and abs(residuals[i, j]) <= SPHERICAL_TOL:
                point = _refine_interface_search(params, i, j, center, radius,
                                                 basis, rng_seed, tie_tol)
                if point is not None:
                    found = True
                    witnesses[(i, j)] = point
                    diagnostics[(i, j)] = "found only by refinement: tiny interface"
            nonempty[i, j] = nonempty[j, i] = found
            if found and abs(residuals[i, j]) > SPHERICAL_TOL:
                diagnostics[(i, j)] = (
                    f"nonempty interface violates |c_ij|^2 = 1 + kappa_ij^2 "
                    f"(residual {residuals[i, j]:.3e}): affine, not spherical Voronoi")
    return InterfaceGraph(q, nonempty, witnesses, diagnostics)


@dataclass
class SphericalReport:
    """Outcome of the compatibility check on nonempty pairs."""

    passed: bool
    max_residual: float
    violations: dict[tuple[int, int], float]
    residuals: np.ndarray


def validate_spherical(params: ClusterParams, graph: InterfaceGraph | None = None,
                       tol: float = SPHERICAL_TOL) -> SphericalReport:
    """Check |c_ij|^2 = 1 + kappa_ij^2 on every nonempty pair (all pairs if graph is None)."""
    residuals = spherical_residuals(params)
    q = params.q
    pairs = (graph.pairs() if graph is not None
             else [(i, j) for i in range(q) for j in range(i + 1, q)])
    violations = {(i, j): float(residuals[i, j]) for (i, j) in pairs
                  if abs(residuals[i, j]) > tol}
    max_res = max((abs(residuals[i, j]) for (i, j) in pairs), default=0.0)
    return SphericalReport(not violations, float(max_res), violations, residuals)


def perpendicular_pole(params: ClusterParams, tol: float = 1e-9) -> np.ndarray | None:
    """A unit vector orthogonal to every quasi-center, or None if none exists.

    Computed as a null direction of the quasi-center matrix by singular value
    thresholding; clusters with q <= n+1 always have one. The sign is fixed by
    making the last nonzero component positive.
    """
    c = params.quasi_centers
    _, s, vt = np.linalg.svd(c, full_matrices=True)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    null = [vt[k] for k in range(vt.shape[0])
            if k >= s.size or s[k] <= tol * scale]
    if not null:
        return None
    pole = null[-1]
    nz = np.flatnonzero(np.abs(pole) > 1e-12)
    if nz.size and pole[nz[-1]] < 0:
        pole = -pole
    return pole / np.linalg.norm(pole)


def save_cluster(params: ClusterParams, path) -> None:
    payload = {
        "n": params.n,
        "q": params.q,
        "quasi_centers": params.quasi_centers.tolist(),
        "curvatures": params.curvatures.tolist(),
        "label": params.label,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cluster(path) -> ClusterParams:
    """Load a cluster JSON file, normalizing the sum conventions (warn above 1e-9)."""
    with open(path) as fh:
        payload = json.load(fh)
    params = recentered(int(payload["n"]), payload["quasi_centers"],
                        payload["curvatures"], payload.get("label", ""),
                        warn_above=1e-9)
    if params.q != int(payload["q"]):
        raise ValueError("cell count in file does not match quasi_centers")
    return params
