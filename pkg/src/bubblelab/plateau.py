"""Blow-up cone analysis at boundary points and Plateau certification.

At a point p the cluster blows up to a conical partition whose walls are the
projected quasi-centers, centered over the incidence set. The cluster is
Plateau at p when those centered normals span a space of dimension one less
than the incidence count, equivalently when they form a centered regular
unit-simplex (the 120-degree law and its higher analogues).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import sampling
from .cluster import ClusterParams, InterfaceGraph, classify_point
from .deform import PcfReport, pcf_detect
from .simplex import sum_zero_projector

RANK_CUTOFF = 1e-7
SINGULAR_TIE_TOL = 1e-7


@dataclass
class BlowUpCone:
    point: np.ndarray
    incidence: np.ndarray
    centered_normals: np.ndarray  # rows tangent to the sphere at point, summing to 0
    affine_rank: int


def blowup_at(params: ClusterParams, p, tie_tol: float = 1e-9) -> BlowUpCone:
    """Incidence set, centered tangent normals and their affine rank at p."""
    p = np.asarray(p, dtype=float)
    incidence = classify_point(params, p, tie_tol)
    proj = params.quasi_centers[incidence] - np.outer(
        params.quasi_centers[incidence] @ p, p)
    centered = proj - proj.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    rank = int(np.sum(svals > RANK_CUTOFF * scale))
    return BlowUpCone(p, incidence, centered, rank)


@dataclass
class PlateauDiagnostics:
    is_plateau: bool
    rank_test: bool
    gram_residual: float
    affine_rank: int
    incidence_size: int


def plateau_at(cone: BlowUpCone, tol: float = 1e-7) -> PlateauDiagnostics:
    """Check the regular-simplex condition of the blow-up cone.

    Two equivalent tests are run: affine rank equals incidence size minus one,
    and the Gram matrix of the centered normals equals half the sum-zero
    projector of the incidence set.
    """
    m = len(cone.incidence)
    if m < 2:
        raise ValueError("plateau test needs at least two incident cells")
    gram = cone.centered_normals @ cone.centered_normals.T
    residual = float(np.max(np.abs(gram - 0.5 * sum_zero_projector(m))))
    rank_ok = cone.affine_rank == m - 1
    return PlateauDiagnostics(rank_ok and residual <= tol, rank_ok, residual,
                              cone.affine_rank, m)


def triple_point_angles(params: ClusterParams, p, tie_tol: float = 1e-9) -> np.ndarray:
    """Pairwise angles (degrees) between the three interface normals at a triple point."""
    p = np.asarray(p, dtype=float)
    incidence = classify_point(params, p, tie_tol)
    if len(incidence) != 3:
        raise ValueError(f"not a triple point: incidence {incidence}")
    u, v, w = (int(c) for c in incidence)
    normals = []
    for i, j in ((u, v), (v, w), (w, u)):
        nrm = params.pair_center(i, j) + params.pair_curvature(i, j) * p
        normals.append(nrm / np.linalg.norm(nrm))
    angles = []
    for a, b in combinations(range(3), 2):
        cosang = float(np.clip(normals[a] @ normals[b], -1.0, 1.0))
        angles.append(np.degrees(np.arccos(cosang)))
    return np.array(angles)


def boundary_normal_sum(params: ClusterParams, p, tie_tol: float = 1e-9) -> float:
    """Norm of the cyclic sum of interface normals at a triple point (0 at 120 degrees)."""
    p = np.asarray(p, dtype=float)
    incidence = classify_point(params, p, tie_tol)
    if len(incidence) != 3:
        raise ValueError(f"not a triple point: incidence {incidence}")
    u, v, w = (int(c) for c in incidence)
    total = np.zeros(params.n + 1)
    for i, j in ((u, v), (v, w), (w, u)):
        nrm = params.pair_center(i, j) + params.pair_curvature(i, j) * p
        total += nrm / np.linalg.norm(nrm)
    return float(np.linalg.norm(total))


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _project_to_stratum(params: ClusterParams, cells: tuple[int, ...],
                        seed_point: np.ndarray, iters: int = 60,
                        tol: float = 1e-12) -> np.ndarray | None:
    """Newton projection onto the set where the given cells' affine values tie.

    Solves the system {h_c - h_{c0} = 0 for c in cells} together with
    |p|^2 = 1 by least-squares Newton steps from the seed point.
    """
    c0 = cells[0]
    rows = params.quasi_centers[list(cells[1:])] - params.quasi_centers[c0]
    offs = params.curvatures[list(cells[1:])] - params.curvatures[c0]
    p = np.array(seed_point, dtype=float)
    p /= np.linalg.norm(p)
    for _ in range(iters):
        res = np.concatenate([rows @ p + offs, [p @ p - 1.0]])
        if np.max(np.abs(res)) < tol:
            return p
        jac = np.vstack([rows, 2.0 * p])
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        p = p + step
        norm = np.linalg.norm(p)
        if not np.isfinite(norm) or norm < 1e-9:
            return None
        p /= norm
    return None


@dataclass
class PlateauCertificate:
    plateau_up_to: int
    worst_points: list[dict]
    points_examined: int
    multi_points_found: int
    fully_plateau: bool
    failures: list[dict] = field(default_factory=list)
    junction_points: list[dict] = field(default_factory=list)


def certify_plateau(params: ClusterParams, graph: InterfaceGraph,
                    sample_budget: int = 2000, seed: int = 0,
                    tol: float = 1e-7) -> PlateauCertificate:
    """Sample singular strata and certify the largest safe Plateau level.

    Candidate points come from Newton projection onto every pairwise, triple
    and higher tie set of adjacent cells (random seeds), plus random interface
    points. Returns the largest level l such that every examined point whose
    normals span at most l dimensions passed the regular-simplex test; points
    failing the test are returned as counterexamples.
    """
    rng = sampling.stream(seed, 0xB10)
    q = params.q
    dim = params.n + 1
    candidates: list[np.ndarray] = []

    for i, j in graph.pairs():
        if (i, j) in graph.witnesses:
            candidates.append(np.asarray(graph.witnesses[(i, j)]))

    max_order = min(q, params.n + 2)
    subsets: list[tuple[int, ...]] = []
    for order in range(2, max_order + 1):
        for cells in combinations(range(q), order):
            # only strata whose pairs are plausibly adjacent are worth probing
            if order == 2 and not graph.nonempty[cells[0], cells[1]]:
                continue
            subsets.append(cells)
    seeds_per_subset = max(3, sample_budget // max(len(subsets), 1))
    for cells in subsets:
        for _ in range(seeds_per_subset):
            start = sampling.unit_sphere(rng, 1, dim)[0]
            found = _project_to_stratum(params, cells, start)
            if found is None:
                continue
            incidence = classify_point(params, found, SINGULAR_TIE_TOL)
            if set(cells).issubset(int(c) for c in incidence):
                candidates.append(found)

    # deduplicate by rounding
    unique: dict[tuple, np.ndarray] = {}
    for p in candidates:
        unique[tuple(np.round(p, 6))] = p

    worst: list[dict] = []
    failures: list[dict] = []
    junctions: list[dict] = []
    best_fail_rank = None
    for p in unique.values():
        cone = blowup_at(params, p, tie_tol=SINGULAR_TIE_TOL)
        if len(cone.incidence) < 2:
            continue
        diag = plateau_at(cone, tol)
        entry = {"point": p, "incidence": cone.incidence.tolist(),
                 "affine_rank": cone.affine_rank,
                 "gram_residual": diag.gram_residual,
                 "is_plateau": diag.is_plateau}
        if len(cone.incidence) >= 3:
            junctions.append(entry)
        if not diag.is_plateau:
            failures.append(entry)
            if best_fail_rank is None or cone.affine_rank < best_fail_rank:
                best_fail_rank = cone.affine_rank
        worst.append(entry)
    worst.sort(key=lambda e: (e["is_plateau"], -e["gram_residual"]))
    level = (min(params.n, q - 1) if best_fail_rank is None
             else max(best_fail_rank - 1, 0))
    fully = best_fail_rank is None
    return PlateauCertificate(level, worst[:10], len(unique), len(junctions),
                              fully, failures, junctions)


@dataclass
class Q3Classification:
    verdict: str  # "plateau" | "pcf" | "both" | "neither"
    plateau: bool
    pcf_report: PcfReport
    consistent: bool
    note: str = ""


def classify_q3(params: ClusterParams, graph: InterfaceGraph,
                certificate: PlateauCertificate,
                pcf_report: PcfReport | None = None) -> Q3Classification:
    """Combine Plateau and compatibility certificates.

    When the cluster is certified Plateau down to level q-3, at least one of
    {fully Plateau, pseudo conformally flat} must hold; a numerical 'neither'
    outcome is flagged for tolerance investigation rather than trusted.
    """
    pcf = pcf_report or pcf_detect(params)
    plateau = certificate.fully_plateau
    if plateau and pcf.pcf:
        verdict = "both"
    elif plateau:
        verdict = "plateau"
    elif pcf.pcf:
        verdict = "pcf"
    else:
        verdict = "neither"
    q3_certified = certificate.plateau_up_to >= params.q - 3
    consistent = not (q3_certified and verdict == "neither")
    note = "" if consistent else (
        "certified (q-3)-Plateau but neither fully Plateau nor compatible: "
        "investigate tolerances")
    return Q3Classification(verdict, plateau, pcf, consistent, note)
