"""Explicit volume/perimeter-preserving deformations and compatibility detection.

Two deformation families: the conformal flow toward a pole (closed-form
parameter evolution, produces PCF clusters), and the Gram-matrix interpolation
toward the standard Gram Id/2 + kappa kappa^T, which makes a Plateau cluster
full-dimensional without changing volumes or total perimeter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import (ClusterParams, InterfaceGraph, detect_interfaces,
                      recentered, validate_spherical)
from .measure import MeasureReport, measure_exact_s2, measure_mc
from .simplex import (psd_sqrtm, sum_zero_basis, sum_zero_projector)
from .standard import MobiusMap, apply_mobius

PCF_TOL = 1e-8


def conformal_step(params: ClusterParams, pole, t: float) -> ClusterParams:
    """Flow a cluster along the conformal field of its pole for time t.

    For a perpendicular cluster (<c_i, pole> = 0) the parameter evolution
    collapses to kappa_i(t) = kappa_i cosh t, c_i(t) = c_i - kappa_i sinh(t)
    pole, and the result is PCF with xi = coth(t) pole for t != 0. Iterates of
    the step stay in the flow family of the perpendicular start (pole
    components proportional to the curvatures), and steps compose additively
    in t there; anything outside that family is a domain error.
    """
    pole = np.asarray(pole, dtype=float)
    along = params.quasi_centers @ pole
    kappa = params.curvatures
    family_residual = float(np.max(np.abs(np.outer(along, kappa)
                                          - np.outer(kappa, along))))
    if family_residual > 1e-9 * max(1.0, float(np.abs(along).max())):
        raise ValueError(
            "pole is not orthogonal to the quasi-centers (nor is the cluster "
            "a flow iterate of a perpendicular one)")
    return apply_mobius(params, MobiusMap.flow(pole, t))


@dataclass
class PcfReport:
    xi: np.ndarray
    residual: float
    pcf: bool
    conformally_flat: bool


def pcf_detect(params: ClusterParams, tol: float = PCF_TOL) -> PcfReport:
    """Minimal-norm solve of <c_i, xi> = -kappa_i over xi.

    The cluster is pseudo conformally flat when the max residual is below tol,
    and conformally flat when additionally |xi| < 1.
    """
    xi, *_ = np.linalg.lstsq(params.quasi_centers, -params.curvatures, rcond=None)
    residual = float(np.max(np.abs(params.quasi_centers @ xi + params.curvatures)))
    pcf = residual <= tol
    return PcfReport(xi, residual, pcf, pcf and float(np.linalg.norm(xi)) < 1.0)


@dataclass
class LseSolution:
    delta_centers: np.ndarray
    delta_kappa: np.ndarray
    residual: float


def lse_solve(params: ClusterParams, graph: InterfaceGraph, a) -> LseSolution:
    """Minimum-norm solution of the linearized compatibility equations.

    Solves <c_ij, dc_i - dc_j> = kappa_ij a_ij over all nonempty pairs for
    center variations dc_i constrained to sum to zero. On a PCF cluster with
    parameter xi, dc_i = -a_i xi is an exact solution, so the residual is 0.
    """
    a = np.asarray(a, dtype=float)
    q, dim = params.q, params.n + 1
    basis = sum_zero_basis(q)
    pairs = graph.pairs()
    rows = np.zeros((len(pairs), (q - 1) * dim))
    rhs = np.zeros(len(pairs))
    for row, (i, j) in enumerate(pairs):
        cij = params.pair_center(i, j)
        rows[row] = np.kron(basis[i] - basis[j], cij)
        rhs[row] = params.pair_curvature(i, j) * (a[i] - a[j])
    y, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    delta = basis @ y.reshape(q - 1, dim)
    residual = float(np.max(np.abs(rows @ y - rhs))) if pairs else 0.0
    return LseSolution(delta, a, residual)


def lse_residual(params: ClusterParams, graph: InterfaceGraph,
                 delta_centers: np.ndarray, a) -> float:
    """Max violation of the linearized compatibility equations by a candidate."""
    a = np.asarray(a, dtype=float)
    worst = 0.0
    for i, j in graph.pairs():
        dc = delta_centers[i] - delta_centers[j]
        worst = max(worst, abs(float(params.pair_center(i, j) @ dc)
                               - params.pair_curvature(i, j) * (a[i] - a[j])))
    return worst


# ---------------------------------------------------------------------------
# Gram perturbation
# ---------------------------------------------------------------------------

def _row_orthonormal_factor(params: ClusterParams) -> np.ndarray:
    """U with sqrt(C C^T) U = C and U U^T the sum-zero projector.

    Built from the SVD of C; for rank-deficient quasi-centers the missing rows
    are completed by pairing leftover sum-zero directions with leftover
    ambient directions, which is the freedom the factorization leaves.
    """
    c = params.quasi_centers
    q, dim = c.shape
    w, s, vt = np.linalg.svd(c, full_matrices=True)
    rank = int(np.sum(s > 1e-11 * (s[0] if s.size else 1.0)))
    u = w[:, :rank] @ vt[:rank]
    if rank < q - 1:
        # complete within E^(q-1): sum-zero left directions not already used
        ones = np.ones((q, 1)) / np.sqrt(q)
        used = np.column_stack([w[:, :rank], ones])
        leftover_left = np.linalg.svd(used, full_matrices=True)[0][:, rank + 1:]
        leftover_right = np.linalg.svd(vt[:rank], full_matrices=True)[2][rank:] \
            if rank else np.eye(dim)
        extra = leftover_left @ leftover_right[: q - 1 - rank]
        u = u + extra
    return u


def gram_path(params: ClusterParams, t: float) -> ClusterParams:
    """Interpolate the Gram matrix toward the standard one and refactor.

    G_t = (1-t) C C^T + t (Id/2 + kappa kappa^T) is positive definite on the
    sum-zero subspace for t in (0, 1]; the new quasi-center matrix is
    sqrt(G_t) U with the row-orthonormal U recovered from C, so t = 0 returns
    the original parameters. Curvatures are unchanged.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    c = params.quasi_centers
    kappa = params.curvatures
    q = params.q
    gram_t = ((1.0 - t) * (c @ c.T)
              + t * (0.5 * sum_zero_projector(q) + np.outer(kappa, kappa)))
    u = _row_orthonormal_factor(params)
    c_t = psd_sqrtm(gram_t) @ u
    return recentered(params.n, c_t, kappa, params.label and f"{params.label}-gram{t:g}")


def gram_eigenvalue_floor(params: ClusterParams, t: float) -> float:
    """Smallest eigenvalue of G_t on the sum-zero subspace (>= t/2 in theory)."""
    c = params.quasi_centers
    q = params.q
    gram_t = ((1.0 - t) * (c @ c.T)
              + t * (0.5 * sum_zero_projector(q) + np.outer(params.curvatures, params.curvatures)))
    basis = sum_zero_basis(q)
    return float(np.linalg.eigvalsh(basis.T @ gram_t @ basis).min())


@dataclass
class GramInvarianceReport:
    times: np.ndarray
    volume_deviation: float
    perimeter_deviation: float
    allowed_deviation: float
    first_new_interface_t: float | None
    new_interface_pair: tuple[int, int] | None
    plateau_certified: bool
    reports: list[MeasureReport]

    @property
    def invariant_within_tolerance(self) -> bool:
        return (self.volume_deviation <= self.allowed_deviation
                and self.perimeter_deviation <= self.allowed_deviation)


def gram_invariance_check(params: ClusterParams, graph: InterfaceGraph,
                          t_max: float = 0.5, steps: int = 5,
                          samples: int = 400_000, seed: int = 7,
                          plateau_certified: bool = True,
                          detect_samples: int = 4096) -> GramInvarianceReport:
    """Measure volumes and perimeter along the Gram path.

    Reports the worst deviation from the t = 0 values over the grid, and the
    first time at which a previously empty pair acquires an interface (the
    guarantees only hold before that). plateau_certified is the caller's
    certificate from the plateau module; when False the report still runs but
    is flagged. Monte Carlo steps share the seed, so deviations are measured
    with common random numbers.
    """
    times = np.linspace(0.0, t_max, steps + 1)
    base_pairs = {tuple(p) for p in graph.pairs()}
    reports: list[MeasureReport] = []
    first_new: float | None = None
    new_pair: tuple[int, int] | None = None
    for t in times:
        step_params = gram_path(params, float(t))
        step_graph = graph
        if t > 0:
            step_graph = detect_interfaces(step_params, samples_per_pair=detect_samples,
                                           rng_seed=seed)
            extra = [p for p in step_graph.pairs() if tuple(p) not in base_pairs]
            if extra and first_new is None:
                first_new, new_pair = float(t), tuple(extra[0])
        if params.n == 2:
            reports.append(measure_exact_s2(step_params, step_graph))
        else:
            reports.append(measure_mc(step_params, step_graph, samples=samples, seed=seed))
    base = reports[0]
    upto = len(times) if first_new is None else int(np.searchsorted(times, first_new))
    vol_dev = max(float(np.max(np.abs(r.volumes - base.volumes))) for r in reports[:upto])
    per_dev = max(abs(r.total_perimeter - base.total_perimeter) for r in reports[:upto])
    stderr = max(max(float(r.volume_stderr.max()), r.perimeter_stderr)
                 for r in reports[:upto])
    allowed = max(4.0 * stderr * np.sqrt(2.0), 1e-12)
    return GramInvarianceReport(times, vol_dev, per_dev, allowed, first_new,
                                new_pair, plateau_certified, reports)


def validate_along_path(params: ClusterParams, graph: InterfaceGraph,
                        times) -> float:
    """Worst compatibility residual over nonempty pairs along the Gram path."""
    worst = 0.0
    for t in times:
        rep = validate_spherical(gram_path(params, float(t)), graph)
        worst = max(worst, rep.max_residual)
    return worst
