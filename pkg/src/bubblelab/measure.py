"""Cell volumes, interface areas and weighted interface moments.

Two backends: Monte Carlo on S^n (uniform sphere sampling plus exact
parametrization of the wall spheres) and, on S^2, exact circular-arc
extraction with Gauss-Bonnet cell areas. All quantities are reported in the
normalized measure (volume of S^n is 1, interface measure divided by |S^n|);
raw values are available behind the `raw` helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sampling
from .cluster import ClusterParams, InterfaceGraph, classify_many
from .simplex import pair_weight_matrix, restrict, sphere_surface_measure

TWO_PI = 2.0 * math.pi


class MeasureError(RuntimeError):
    pass


@dataclass
class MeasureReport:
    """Normalized volumes, interface areas and their error estimates."""

    volumes: np.ndarray
    areas: np.ndarray
    volume_stderr: np.ndarray
    area_stderr: np.ndarray
    backend: dict

    @property
    def total_perimeter(self) -> float:
        return float(np.sum(np.triu(self.areas, 1)))

    @property
    def perimeter_stderr(self) -> float:
        return float(np.sqrt(np.sum(np.triu(self.area_stderr, 1) ** 2)))

    def raw_volumes(self, n: int) -> np.ndarray:
        return self.volumes * sphere_surface_measure(n)

    def raw_areas(self, n: int) -> np.ndarray:
        return self.areas * sphere_surface_measure(n)


@dataclass
class WeightedLaplacian:
    """Discrete weighted Laplacian sum_{i<j} A^ij e_ij (x) e_ij on E^(q-1)."""

    matrix: np.ndarray
    weight_label: str
    entry_stderr: np.ndarray | None = None

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    def pair_weight(self, i: int, j: int) -> float:
        return float(-self.matrix[i, j])


@dataclass
class EigenReport:
    eigenvalues: np.ndarray
    positive_definite: bool


def check_positive_definite(lap: WeightedLaplacian, tol: float = 1e-11) -> EigenReport:
    """Eigenvalues of the Laplacian restricted to E^(q-1) and a definiteness flag."""
    w = np.linalg.eigvalsh(restrict(lap.matrix))
    scale = max(1.0, float(np.abs(w).max())) if w.size else 1.0
    return EigenReport(w, bool(w.min() > tol * scale))


# ---------------------------------------------------------------------------
# Monte Carlo backend
# ---------------------------------------------------------------------------

_VOLUME_STREAM = 0x5E11


def cell_volumes_mc(params: ClusterParams, samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized cell volumes by uniform sampling of S^n, with binomial stderr."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    q = params.q
    counts = []
    for chunk, count in sampling.chunk_layout(samples):
        pts = sampling.unit_sphere_chunk(seed, _VOLUME_STREAM, chunk, count, params.n + 1)
        counts.append(np.bincount(classify_many(params, pts), minlength=q).astype(float))
    total = sampling.pairwise_sum(counts)
    frac = total / samples
    stderr = np.sqrt(np.clip(frac * (1.0 - frac), 0.0, None) / samples)
    return frac, stderr


def _interface_fraction(params: ClusterParams, i: int, j: int, samples: int,
                        seed: int, weight=None) -> tuple[float, float, float]:
    """(mean, stderr, wall measure) of `weight` over Sigma_ij within its wall sphere.

    weight=None integrates the constant 1 (plain area). The wall measure is the
    raw H^(n-1) measure of the full wall sphere.
    """
    n = params.n
    frame = sampling.subsphere_frame(params.pair_center(i, j), params.pair_curvature(i, j))
    if frame is None:
        return 0.0, 0.0, 0.0
    center, radius, basis = frame
    wall_measure = sphere_surface_measure(n - 1) * radius ** (n - 1)
    label = i * params.q + j + 1
    sums, sq_sums = [], []
    for chunk, count in sampling.chunk_layout(samples):
        pts = sampling.subsphere_chunk(seed, label, chunk, count, center, radius, basis)
        values = params.affine_values(pts)
        lead = np.minimum(values[:, i], values[:, j])
        others = np.delete(values, [i, j], axis=1)
        inside = others.min(axis=1) > lead if others.size else np.ones(count, bool)
        contrib = inside.astype(float) if weight is None else inside * weight(pts)
        sums.append(np.array([contrib.sum()]))
        sq_sums.append(np.array([(contrib ** 2).sum()]))
    mean = float(sampling.pairwise_sum(sums)[0]) / samples
    second = float(sampling.pairwise_sum(sq_sums)[0]) / samples
    var = max(second - mean * mean, 0.0)
    return mean, math.sqrt(var / samples), wall_measure


def measure_mc(params: ClusterParams, graph: InterfaceGraph, samples: int = 1_000_000,
               seed: int = 0) -> MeasureReport:
    """Monte Carlo volumes and interface areas with propagated binomial errors."""
    q = params.q
    volumes, vol_err = cell_volumes_mc(params, samples, seed)
    areas = np.zeros((q, q))
    area_err = np.zeros((q, q))
    norm = sphere_surface_measure(params.n)
    for i, j in graph.pairs():
        frac, err, wall = _interface_fraction(params, i, j, samples, seed)
        areas[i, j] = areas[j, i] = frac * wall / norm
        area_err[i, j] = area_err[j, i] = err * wall / norm
    return MeasureReport(volumes, areas, vol_err, area_err,
                         {"kind": "monte_carlo", "seed": seed, "samples": samples})


# ---------------------------------------------------------------------------
# Exact S^2 backend: circular-arc extraction and Gauss-Bonnet
# ---------------------------------------------------------------------------

VERTEX_MATCH_TOL = 1e-7
MIN_ARC_ANGLE = 1e-9


@dataclass
class Arc:
    """One maximal sub-arc of the wall circle S_ij belonging to Sigma_ij.

    The circle is parametrized p(t) = center + radius (u cos t + v sin t) with
    (u, v, c_ij/|c_ij|) right-handed, so traversal with increasing t keeps cell
    j on the left. full_circle marks a vertex-free interface.
    """

    i: int
    j: int
    center: np.ndarray
    radius: float
    u: np.ndarray
    v: np.ndarray
    t0: float
    t1: float
    kappa: float
    full_circle: bool

    @property
    def length(self) -> float:
        return self.radius * (self.t1 - self.t0)

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (self.center + self.radius * (np.multiply.outer(np.cos(t), self.u)
                                             + np.multiply.outer(np.sin(t), self.v)))

    def tangent(self, t: float) -> np.ndarray:
        return -self.u * math.sin(t) + self.v * math.cos(t)


def _circle_frame(params: ClusterParams, i: int, j: int):
    frame = sampling.subsphere_frame(params.pair_center(i, j), params.pair_curvature(i, j))
    if frame is None:
        return None
    center, radius, basis = frame
    u, v = basis[:, 0], basis[:, 1]
    w = params.pair_center(i, j)
    w = w / np.linalg.norm(w)
    if np.dot(np.cross(u, v), w) < 0:
        v = -v
    return center, radius, u, v


def _feasible_intervals(params: ClusterParams, i: int, j: int, center, radius, u, v):
    """Sub-intervals of [0, 2pi) on the wall circle where no third cell wins."""
    q = params.q
    others = [k for k in range(q) if k not in (i, j)]
    if not others:
        return [(0.0, TWO_PI)], True
    c = params.quasi_centers
    kap = params.curvatures
    coeffs = []
    for k in others:
        d = c[k] - c[i]
        coeffs.append((radius * float(d @ u), radius * float(d @ v),
                       float(d @ center) + kap[k] - kap[i]))

    roots = []
    for a, b, d0 in coeffs:
        amp = math.hypot(a, b)
        if amp < 1e-15:
            if d0 < 0.0:
                return [], False  # cell k beats the pair on the whole circle
            continue
        x = -d0 / amp
        if abs(x) <= 1.0:
            phi = math.atan2(b, a)
            delta = math.acos(max(-1.0, min(1.0, x)))
            roots.extend(((phi + delta) % TWO_PI, (phi - delta) % TWO_PI))
        elif x < -1.0:
            return [], False  # g_k < 0 everywhere

    def all_nonneg(t: float) -> bool:
        return all(a * math.cos(t) + b * math.sin(t) + d0 >= 0.0 for a, b, d0 in coeffs)

    if not roots:
        return ([(0.0, TWO_PI)], True) if all_nonneg(0.0) else ([], False)

    roots = sorted(set(roots))
    raw = []
    for idx, t0 in enumerate(roots):
        t1 = roots[(idx + 1) % len(roots)]
        if idx == len(roots) - 1:
            t1 += TWO_PI
        if t1 - t0 < MIN_ARC_ANGLE:
            continue
        if all_nonneg(0.5 * (t0 + t1)):
            raw.append((t0, t1))
    # adjacent feasible intervals share a root only at tangential (degenerate)
    # contacts; merge them so no spurious vertex is reported there
    intervals: list[tuple[float, float]] = []
    for iv in raw:
        if intervals and abs(iv[0] - intervals[-1][1]) < MIN_ARC_ANGLE:
            intervals[-1] = (intervals[-1][0], iv[1])
        else:
            intervals.append(iv)
    if len(intervals) >= 2:
        first, last = intervals[0], intervals[-1]
        if abs((last[1] % TWO_PI) - first[0]) < MIN_ARC_ANGLE:
            intervals = intervals[1:-1] + [(last[0], last[1] + (first[1] - first[0]))]
    return intervals, False


def extract_arcs(params: ClusterParams, graph: InterfaceGraph) -> list[Arc]:
    """All interface arcs of an S^2 cluster in closed form."""
    if params.n != 2:
        raise MeasureError("exact arc extraction requires n = 2")
    arcs = []
    for i, j in graph.pairs():
        frame = _circle_frame(params, i, j)
        if frame is None:
            continue
        center, radius, u, v = frame
        intervals, full = _feasible_intervals(params, i, j, center, radius, u, v)
        for t0, t1 in intervals:
            arcs.append(Arc(i, j, center, radius, u, v, t0, t1,
                            params.pair_curvature(i, j), full))
    return arcs


@dataclass
class _DirectedArc:
    arc: Arc
    reversed: bool  # True when traversed with decreasing t (cell i on the left)

    @property
    def start(self) -> np.ndarray:
        return self.arc.point(self.arc.t1 if self.reversed else self.arc.t0)

    @property
    def end(self) -> np.ndarray:
        return self.arc.point(self.arc.t0 if self.reversed else self.arc.t1)

    def tangent_out(self) -> np.ndarray:
        t = self.arc.t1 if self.reversed else self.arc.t0
        sign = -1.0 if self.reversed else 1.0
        return sign * self.arc.tangent(t)

    def tangent_in(self) -> np.ndarray:
        t = self.arc.t0 if self.reversed else self.arc.t1
        sign = -1.0 if self.reversed else 1.0
        return sign * self.arc.tangent(t)

    @property
    def geodesic_curvature(self) -> float:
        # curvature w.r.t. the outward normal of the cell kept on the left:
        # traversal with increasing t keeps cell j on the left, whose outward
        # normal is n_ji of curvature -kappa_ij
        return self.arc.kappa if self.reversed else -self.arc.kappa


def _cell_loops(cell: int, directed: list[_DirectedArc]) -> list[list[_DirectedArc]]:
    """Group the directed boundary arcs of one cell into closed loops."""
    loops = []
    unused = list(directed)
    while unused:
        walk = [unused.pop(0)]
        if walk[0].arc.full_circle:
            loops.append(walk)
            continue
        while True:
            tail = walk[-1].end
            best, best_dist = None, VERTEX_MATCH_TOL
            for cand in unused:
                dist = float(np.linalg.norm(cand.start - tail))
                if dist < best_dist:
                    best, best_dist = cand, dist
            if best is None:
                if float(np.linalg.norm(walk[0].start - tail)) < VERTEX_MATCH_TOL:
                    break
                raise MeasureError(
                    f"cell {cell}: boundary loop failed to close (dangling arc end)")
            unused.remove(best)
            walk.append(best)
            if float(np.linalg.norm(walk[0].start - walk[-1].end)) < VERTEX_MATCH_TOL:
                break
        loops.append(walk)
    return loops


def _loop_disk_area(loop: list[_DirectedArc]) -> float:
    """Gauss-Bonnet area of the region left of a single closed loop (disk case)."""
    total_kg = sum(d.geodesic_curvature * d.arc.length for d in loop)
    turning = 0.0
    if not (len(loop) == 1 and loop[0].arc.full_circle):
        for idx, d in enumerate(loop):
            nxt = loop[(idx + 1) % len(loop)]
            p = d.end
            t_in, t_out = d.tangent_in(), nxt.tangent_out()
            turning += math.atan2(float(p @ np.cross(t_in, t_out)),
                                  float(t_in @ t_out))
    return TWO_PI - total_kg - turning


def measure_exact_s2(params: ClusterParams, graph: InterfaceGraph) -> MeasureReport:
    """Exact volumes and areas for an S^2 cluster via arcs and Gauss-Bonnet.

    Cells are assumed connected (loops of one cell bound a common region);
    disconnected cells make the area checks below fail with a structured
    error. Vertex-free interfaces (full circles) are handled, including
    annulus-type cells.
    """
    q = params.q
    arcs = extract_arcs(params, graph)
    areas_raw = np.zeros((q, q))
    for arc in arcs:
        areas_raw[arc.i, arc.j] += arc.length
        areas_raw[arc.j, arc.i] += arc.length

    volumes_raw = np.zeros(q)
    for cell in range(q):
        directed = [_DirectedArc(a, reversed=(a.i == cell))
                    for a in arcs if cell in (a.i, a.j)]
        if not directed:
            probe = params.affine_values(np.eye(3)[0])
            volumes_raw[cell] = 2.0 * TWO_PI if int(np.argmin(probe)) == cell else 0.0
            continue
        loops = _cell_loops(cell, directed)
        area = sum(_loop_disk_area(loop) for loop in loops) - 2.0 * TWO_PI * (len(loops) - 1)
        if not -1e-8 <= area <= 2.0 * TWO_PI + 1e-8:
            raise MeasureError(
                f"cell {cell}: Gauss-Bonnet area {area:.6f} outside [0, 4pi] "
                f"(disconnected cell or degenerate boundary)")
        volumes_raw[cell] = max(area, 0.0)

    total = volumes_raw.sum()
    if abs(total - 2.0 * TWO_PI) > 1e-7:
        raise MeasureError(f"cell areas sum to {total:.8f}, expected 4pi")
    norm = 2.0 * TWO_PI
    zeros = np.zeros_like(areas_raw)
    return MeasureReport(volumes_raw / norm, areas_raw / norm,
                         np.zeros(q), zeros, {"kind": "exact_s2"})


# ---------------------------------------------------------------------------
# Weighted Laplacians
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _arc_integral(arc: Arc, weight) -> float:
    """Integral of a smooth pointwise weight over one arc (Gauss-Legendre)."""
    mid, half = 0.5 * (arc.t0 + arc.t1), 0.5 * (arc.t1 - arc.t0)
    ts = mid + half * _GL_NODES
    values = weight(arc.point(ts))
    return float(np.sum(values * _GL_WEIGHTS) * half * arc.radius)


def weighted_laplacian(params: ClusterParams, graph: InterfaceGraph, weight,
                       backend: str = "auto", samples: int = 1_000_000,
                       seed: int = 0, label: str = "") -> WeightedLaplacian:
    """L_f with A^ij the integral of a pointwise weight over Sigma_ij.

    weight maps an (m, n+1) array of points to m values. backend "exact"
    requires n = 2; "auto" picks exact on S^2 and Monte Carlo otherwise.
    """
    if backend == "auto":
        backend = "exact" if params.n == 2 else "mc"
    q = params.q
    weights: dict[tuple[int, int], float] = {}
    err: dict[tuple[int, int], float] = {}
    norm = sphere_surface_measure(params.n)
    if backend == "exact":
        arcs = extract_arcs(params, graph)
        for arc in arcs:
            key = (arc.i, arc.j)
            weights[key] = weights.get(key, 0.0) + _arc_integral(arc, weight) / norm
        err = {k: 0.0 for k in weights}
    elif backend == "mc":
        for i, j in graph.pairs():
            mean, stderr, wall = _interface_fraction(params, i, j, samples, seed, weight)
            weights[(i, j)] = mean * wall / norm
            err[(i, j)] = stderr * wall / norm
    else:
        raise ValueError(f"unknown backend {backend!r}")
    entry_err = np.zeros((q, q))
    for (i, j), e in err.items():
        entry_err[i, j] = entry_err[j, i] = e
    return WeightedLaplacian(pair_weight_matrix(q, weights), label or "custom", entry_err)
