"""Standard bubbles: construction, Moebius transformations, model profile.

Standard q-cell bubbles on S^n are exactly the spherical Voronoi clusters with
C C^T = Id/2 + kappa kappa^T on the sum-zero subspace; they exist for every
curvature vector and every interior volume vector, uniquely up to rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterParams, complete_graph, recentered
from .measure import cell_volumes_mc, measure_exact_s2
from .simplex import psd_sqrtm, sum_zero_basis, sum_zero_projector


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def equal_volume_standard(n: int, q: int) -> ClusterParams:
    """Equal-volume standard bubble: regular unit-edge simplex quasi-centers, flat walls.

    The q quasi-centers are the vertices of a centered regular simplex with
    |c_i - c_j| = 1, placed in coordinates 0..q-2 of R^(n+1); all curvatures
    vanish and every compatibility residual is zero by construction.
    """
    _check_range(n, q)
    basis = sum_zero_basis(q)
    c = np.zeros((q, n + 1))
    c[:, : q - 1] = basis / math.sqrt(2.0)
    return ClusterParams(n, c - c.mean(axis=0), np.zeros(q),
                         label=f"standard-equal-n{n}-q{q}")


def standard_of_curvature(n: int, q: int, kappa) -> ClusterParams:
    """Standard bubble with the prescribed curvature vector.

    Solves C C^T = Id/2 + kappa kappa^T by a symmetric square root on the
    sum-zero subspace, embedded in coordinates 0..q-2 of R^(n+1). The right
    side is positive definite there, so the construction never fails.
    """
    _check_range(n, q)
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (q,) or abs(kappa.sum()) > 1e-9 * max(1.0, np.abs(kappa).max()):
        raise ValueError("kappa must be a length-q vector summing to zero")
    basis = sum_zero_basis(q)
    gram = 0.5 * sum_zero_projector(q) + np.outer(kappa, kappa)
    root = psd_sqrtm(basis.T @ gram @ basis)
    c = np.zeros((q, n + 1))
    c[:, : q - 1] = basis @ root
    return recentered(n, c, kappa, label=f"standard-n{n}-q{q}")


def _check_range(n: int, q: int) -> None:
    if not 2 <= q <= n + 2:
        raise ValueError(f"need 2 <= q <= n + 2, got q={q}, n={n}")


# ---------------------------------------------------------------------------
# Moebius transformations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MobiusMap:
    """A conformal automorphism of S^n: flow along theta - <theta,p>p, a rotation, or a composition.

    parts are applied left to right for kind "composition".
    """

    kind: str
    pole: np.ndarray | None = None
    time: float = 0.0
    rotation: np.ndarray | None = None
    parts: tuple = field(default=())

    @staticmethod
    def flow(pole, time: float) -> "MobiusMap":
        pole = np.asarray(pole, dtype=float)
        if abs(pole @ pole - 1.0) > 1e-12:
            raise ValueError("flow direction must be a unit vector; rescale time instead")
        return MobiusMap("flow", pole=pole, time=float(time))

    @staticmethod
    def orthogonal(rotation) -> "MobiusMap":
        rot = np.asarray(rotation, dtype=float)
        if np.max(np.abs(rot.T @ rot - np.eye(rot.shape[0]))) > 1e-12:
            raise ValueError("matrix is not orthogonal")
        return MobiusMap("orthogonal", rotation=rot)

    @staticmethod
    def composition(*parts: "MobiusMap") -> "MobiusMap":
        return MobiusMap("composition", parts=tuple(parts))


def mobius_point_flow(p, pole, t: float) -> np.ndarray:
    """Closed-form flow of a point along the conformal field theta - <theta,p>p.

    Supports a trailing batch of points (shape (..., n+1)). The conformal
    factor at p is 1 / (cosh t + <pole, p> sinh t).
    """
    p = np.asarray(p, dtype=float)
    pole = np.asarray(pole, dtype=float)
    if abs(pole @ pole - 1.0) > 1e-12:
        raise ValueError("pole must be a unit vector")
    a = p @ pole
    denom = math.cosh(t) + a * math.sinh(t)
    out = (p - a[..., None] * pole + (a * math.cosh(t) + math.sinh(t))[..., None] * pole
           if p.ndim > 1 else
           p - a * pole + (a * math.cosh(t) + math.sinh(t)) * pole)
    return out / (denom[..., None] if p.ndim > 1 else denom)


def mobius_conformal_factor(p, pole, t: float):
    p = np.asarray(p, dtype=float)
    pole = np.asarray(pole, dtype=float)
    return 1.0 / (math.cosh(t) + (p @ pole) * math.sinh(t))


def apply_mobius(params: ClusterParams, mobius: MobiusMap) -> ClusterParams:
    """Transform cluster parameters under a Moebius automorphism.

    For the flow of unit pole N over time t the parameters evolve as
        kappa_i(t) = kappa_i cosh t - <c_i, N> sinh t,
        c_i(t) = c_i - <c_i,N> N + (<c_i,N> cosh t - kappa_i sinh t) N,
    which keeps the cluster spherical Voronoi with the same nonempty pairs'
    residuals. Rotations map c_i to Q c_i and leave curvatures alone.
    """
    if mobius.kind == "flow":
        pole, t = mobius.pole, mobius.time
        a = params.quasi_centers @ pole
        k_new = params.curvatures * math.cosh(t) - a * math.sinh(t)
        c_new = (params.quasi_centers - np.outer(a, pole)
                 + np.outer(a * math.cosh(t) - params.curvatures * math.sinh(t), pole))
        return recentered(params.n, c_new, k_new, params.label)
    if mobius.kind == "orthogonal":
        return ClusterParams(params.n, params.quasi_centers @ mobius.rotation.T,
                             params.curvatures, params.label)
    if mobius.kind == "composition":
        out = params
        for part in mobius.parts:
            out = apply_mobius(out, part)
        return out
    raise ValueError(f"unknown map kind {mobius.kind!r}")


# ---------------------------------------------------------------------------
# Prescribed volumes: damped Newton on the curvature vector
# ---------------------------------------------------------------------------

@dataclass
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 60
    fd_step: float = 1e-5
    jacobian_reuse: int = 3
    max_halvings: int = 25
    backend: str = "auto"      # exact on S^2, Monte Carlo otherwise
    mc_samples: int = 2_000_000
    mc_seed: int = 20240901
    # With a fixed seed the empirical volume map is deterministic, so Newton
    # converges to its root far below the statistical error; a loose tolerance
    # here would break the common-random-number cancellation in finite
    # differences of the profile.
    mc_tol: float = 3e-6
    mc_fd_step: float = 2e-4


class NewtonError(RuntimeError):
    def __init__(self, message: str, last_kappa: np.ndarray, residual: float):
        super().__init__(message)
        self.last_kappa = last_kappa
        self.residual = residual


def _volumes_of_curvature(n: int, q: int, kappa: np.ndarray, cfg: NewtonConfig) -> np.ndarray:
    params = standard_of_curvature(n, q, kappa)
    backend = cfg.backend
    if backend == "auto":
        backend = "exact" if n == 2 else "mc"
    if backend == "exact":
        return measure_exact_s2(params, complete_graph(q)).volumes
    vols, _ = cell_volumes_mc(params, cfg.mc_samples, cfg.mc_seed)
    return vols


def _volume_newton(n: int, q: int, v_target: np.ndarray, cfg: NewtonConfig,
                   y0: np.ndarray | None = None,
                   jac0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Damped Newton for V(kappa(y)) = v in sum-zero coordinates.

    Returns (y, jacobian, residual_inf). Warm starts (y0, jac0) let a cluster
    of nearby solves (finite-difference grids) skip most Jacobian rebuilds.
    """
    basis = sum_zero_basis(q)
    exact = cfg.backend == "exact" or (cfg.backend == "auto" and n == 2)
    tol = cfg.tol if exact else max(cfg.tol, cfg.mc_tol)
    fd_step = cfg.fd_step if exact else max(cfg.fd_step, cfg.mc_fd_step)

    def residual(yy: np.ndarray) -> np.ndarray:
        vols = _volumes_of_curvature(n, q, basis @ yy, cfg)
        return basis.T @ (vols - v_target)

    def build_jacobian(yy: np.ndarray) -> np.ndarray:
        jac = np.empty((q - 1, q - 1))
        for k in range(q - 1):
            step = np.zeros(q - 1)
            step[k] = fd_step
            jac[:, k] = (residual(yy + step) - residual(yy - step)) / (2 * fd_step)
        return jac

    y = np.zeros(q - 1) if y0 is None else np.array(y0, dtype=float)
    r = residual(y)
    jac = jac0
    jac_age = 0
    rebuilds_after_stall = 0
    for _ in range(cfg.max_iter):
        if np.linalg.norm(r, np.inf) <= tol:
            return y, (jac if jac is not None else build_jacobian(y)), \
                float(np.linalg.norm(r, np.inf))
        if jac is None or jac_age >= cfg.jacobian_reuse:
            jac = build_jacobian(y)
            jac_age = 0
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            delta = -np.linalg.lstsq(jac, r, rcond=None)[0]
        scale = 1.0
        base_norm = np.linalg.norm(r)
        for _ in range(cfg.max_halvings):
            r_try = residual(y + scale * delta)
            if np.linalg.norm(r_try) < base_norm:
                y = y + scale * delta
                r = r_try
                jac_age += 1
                break
            scale *= 0.5
        else:
            # line search stalled: rebuild the Jacobian once, then give up
            if rebuilds_after_stall >= 2:
                break
            rebuilds_after_stall += 1
            jac = build_jacobian(y)
            jac_age = 0
    return y, (jac if jac is not None else build_jacobian(y)), \
        float(np.linalg.norm(r, np.inf))


def standard_of_volume(n: int, q: int, volumes, cfg: NewtonConfig | None = None) -> ClusterParams:
    """Standard bubble with the prescribed cell volumes.

    Damped Newton on the curvature vector in sum-zero coordinates with a
    finite-difference Jacobian (reused across a few steps), backtracking by
    halving on the volume residual. Monte Carlo volume evaluations share one
    seed so the objective is a fixed (piecewise smooth) function of kappa and
    Newton can converge to its root far below the statistical error.
    """
    cfg = cfg or NewtonConfig()
    _check_range(n, q)
    v_target = np.asarray(volumes, dtype=float)
    if v_target.shape != (q,) or np.any(v_target <= 0) or abs(v_target.sum() - 1.0) > 1e-9:
        raise ValueError("volumes must be positive and sum to 1")
    exact = cfg.backend == "exact" or (cfg.backend == "auto" and n == 2)
    tol = cfg.tol if exact else max(cfg.tol, cfg.mc_tol)
    y, _, res = _volume_newton(n, q, v_target, cfg)
    if res > 3 * tol:
        raise NewtonError(f"volume Newton did not converge: residual {res:.3e}",
                          sum_zero_basis(q) @ y, res)
    return standard_of_curvature(n, q, sum_zero_basis(q) @ y).with_label(
        f"standard-volume-n{n}-q{q}")


# ---------------------------------------------------------------------------
# Model isoperimetric profile
# ---------------------------------------------------------------------------

@dataclass
class ModelProfilePoint:
    """Value, realizing curvature, gradient and Hessian of the model profile at v.

    grad and hessian live in the sum-zero coordinates given by
    sum_zero_basis(q); the realizing bubble's (n-1) kappa equals grad up to
    finite-difference noise.
    """

    volumes: np.ndarray
    value: float
    kappa: np.ndarray
    grad: np.ndarray
    hessian: np.ndarray
    basis: np.ndarray
    n: int
    q: int


def _perimeter_of(params: ClusterParams, cfg: NewtonConfig) -> float:
    graph = complete_graph(params.q)
    if cfg.backend == "exact" or (cfg.backend == "auto" and params.n == 2):
        return measure_exact_s2(params, graph).total_perimeter
    from .measure import _interface_fraction
    from .simplex import sphere_surface_measure

    norm = sphere_surface_measure(params.n)
    total = 0.0
    for i, j in graph.pairs():
        frac, _, wall = _interface_fraction(params, i, j, cfg.mc_samples, cfg.mc_seed)
        total += frac * wall / norm
    return total


def model_profile(n: int, q: int, volumes, fd_step_grad: float = 1e-3,
                  fd_step_hess: float = 2e-2, cfg: NewtonConfig | None = None) -> ModelProfilePoint:
    """Least perimeter at prescribed volumes, with finite-difference derivatives.

    Central differences along an orthonormal sum-zero basis; all evaluations
    share the Monte Carlo seed (common random numbers), so the dominant noise
    cancels in the differences. Steps must keep v +- perturbations interior.
    """
    cfg = cfg or NewtonConfig()
    v = np.asarray(volumes, dtype=float)
    basis = sum_zero_basis(q)
    margin = min(v.min(), (1.0 - v).min())
    if fd_step_hess * np.abs(basis).max() * 2 >= margin:
        raise ValueError("fd step too large for this volume vector")
    exact = cfg.backend == "exact" or (cfg.backend == "auto" and n == 2)
    tol = cfg.tol if exact else max(cfg.tol, cfg.mc_tol)

    # center solve cold, perturbed solves warm-started from it
    y_center, jac_center, res = _volume_newton(n, q, v, cfg)
    if res > 3 * tol:
        raise NewtonError("volume Newton did not converge at the profile center",
                          basis @ y_center, res)
    kappa = basis @ y_center

    cache: dict[tuple, float] = {}

    def value(dv: np.ndarray) -> float:
        key = tuple(np.round(dv, 14))
        if key not in cache:
            y, _, r = _volume_newton(n, q, v + dv, cfg, y0=y_center, jac0=jac_center)
            if r > 3 * tol:
                raise NewtonError("volume Newton did not converge at a grid point",
                                  basis @ y, r)
            cache[key] = _perimeter_of(standard_of_curvature(n, q, basis @ y), cfg)
        return cache[key]

    center = value(np.zeros(q))
    dim = q - 1
    grad = np.empty(dim)
    for k in range(dim):
        e = basis[:, k]
        grad[k] = (value(fd_step_grad * e) - value(-fd_step_grad * e)) / (2 * fd_step_grad)
    hess = np.empty((dim, dim))
    h = fd_step_hess
    for k in range(dim):
        e = basis[:, k]
        hess[k, k] = (value(h * e) - 2 * center + value(-h * e)) / h ** 2
    for k in range(dim):
        for m in range(k + 1, dim):
            ek, em = basis[:, k], basis[:, m]
            hess[k, m] = hess[m, k] = (
                value(h * (ek + em)) - value(h * (ek - em))
                - value(h * (em - ek)) + value(-h * (ek + em))) / (4 * h ** 2)
    return ModelProfilePoint(v, center, kappa, grad, 0.5 * (hess + hess.T), basis, n, q)


def pde_residual(point: ModelProfilePoint) -> float:
    """Residual of the fully nonlinear elliptic PDE satisfied by the model profile.

    tr((-H)^(-1) (Id + 2/(n-1)^2 g g^T)) - 2/(n-1) I, operators restricted to
    the sum-zero subspace. Requires the finite-difference Hessian to be
    negative definite; raises with eigenvalue diagnostics otherwise.
    """
    n = point.n
    neg_h = -point.hessian
    w = np.linalg.eigvalsh(neg_h)
    if w.min() <= 0:
        raise ValueError(
            f"Hessian is not negative definite (eigenvalues of -H: {w}); "
            "finite-difference noise too large")
    g = point.grad
    m = np.eye(point.q - 1) + (2.0 / (n - 1) ** 2) * np.outer(g, g)
    return float(np.trace(np.linalg.solve(neg_h, m)) - 2.0 / (n - 1) * point.value)


def gradient_vs_curvature(point: ModelProfilePoint) -> float:
    """Max deviation between the profile gradient and (n-1) kappa (stationarity)."""
    expected = point.basis.T @ ((point.n - 1) * point.kappa)
    return float(np.max(np.abs(point.grad - expected)))
