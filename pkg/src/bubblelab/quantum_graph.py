"""Second-variation (Jacobi) operator on the boundary network of an S^2 cluster.

The boundary is a metric graph of circular arcs joined at triple points. On
each arc of curvature kappa the operator is f'' + (1 + kappa^2) f; at each
vertex the oriented traces sum to zero (Kirchhoff-Dirichlet) and the outward
derivatives satisfy a matched Robin condition whose coefficient comes from the
two opposite curvatures. The discretization is Galerkin with piecewise-linear
elements: the index form (including the Robin vertex terms, which enter as
natural boundary terms) and the mass matrix are assembled exactly, and the
trace constraint is eliminated by a sparse congruence, so the reduced pencil
is symmetric to machine precision and eigenvalues converge at second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cluster import ClusterParams, InterfaceGraph, classify_point
from .measure import Arc, extract_arcs

SQRT3 = math.sqrt(3.0)
NORM_S2 = 4.0 * math.pi
VERTEX_TOL = 1e-7
DENSE_LIMIT = 4200
KERNEL_TOL = 1e-6


class GraphBuildError(RuntimeError):
    pass


@dataclass
class VertexEnd:
    """One arc end incident to a vertex.

    sign converts the arc's canonical field f_ij (i < j) to the cyclic
    orientation at the vertex; robin is the matched-derivative coefficient
    (kappa_i + kappa_j - 2 kappa_k) / sqrt(3) for third cell k.
    """

    arc_index: int
    end: int  # 0 = arc start (t0), 1 = arc end (t1)
    sign: float
    robin: float


@dataclass
class Vertex:
    point: np.ndarray
    cells: tuple[int, int, int]
    ends: list[VertexEnd]


@dataclass
class QuantumGraph:
    params: ClusterParams
    arcs: list[Arc]
    vertices: list[Vertex]

    @property
    def q(self) -> int:
        return self.params.q

    def total_length(self) -> float:
        return sum(a.length for a in self.arcs)


def build_graph(params: ClusterParams, graph: InterfaceGraph) -> QuantumGraph:
    """Extract arcs and triple points of an S^2 cluster into a metric graph.

    Every junction must be a genuine triple point (three incident arc ends,
    three distinct cells, confirmed by point classification); anything else is
    a structured error since the vertex conditions are only defined there.
    """
    if params.n != 2:
        raise GraphBuildError("the boundary-network operator is only built on S^2")
    arcs = extract_arcs(params, graph)
    if not arcs:
        raise GraphBuildError("cluster has no interfaces")
    ends: list[tuple[int, int, np.ndarray]] = []
    for idx, arc in enumerate(arcs):
        if arc.full_circle or arc.t1 - arc.t0 >= 2.0 * math.pi - 1e-12:
            continue
        ends.append((idx, 0, arc.point(arc.t0)))
        ends.append((idx, 1, arc.point(arc.t1)))

    clusters: list[list[tuple[int, int, np.ndarray]]] = []
    for item in ends:
        for group in clusters:
            if np.linalg.norm(group[0][2] - item[2]) < VERTEX_TOL:
                group.append(item)
                break
        else:
            clusters.append([item])

    kappa = params.curvatures
    vertices = []
    for group in clusters:
        if len(group) != 3:
            raise GraphBuildError(
                f"junction at {group[0][2]} has {len(group)} incident arc ends; "
                "only certified triple points are supported")
        point = np.mean([g[2] for g in group], axis=0)
        point /= np.linalg.norm(point)
        cells = sorted({c for (ai, _, _) in group for c in (arcs[ai].i, arcs[ai].j)})
        if len(cells) != 3:
            raise GraphBuildError(f"junction at {point} does not join three distinct cells")
        u, v, w = cells
        expected = {(u, v), (v, w), (u, w)}
        got = {(arcs[ai].i, arcs[ai].j) for (ai, _, _) in group}
        if got != expected:
            raise GraphBuildError(f"junction at {point} has pairs {got}, expected {expected}")
        incidence = classify_point(params, point, tie_tol=VERTEX_TOL)
        if not set(cells).issubset(set(int(c) for c in incidence)):
            raise GraphBuildError(f"junction at {point} failed point-classification check")
        vertex_ends = []
        for ai, end, _ in group:
            i, j = arcs[ai].i, arcs[ai].j
            k = next(c for c in cells if c not in (i, j))
            robin = (kappa[i] + kappa[j] - 2.0 * kappa[k]) / SQRT3
            sign = -1.0 if (i, j) == (u, w) else 1.0
            vertex_ends.append(VertexEnd(ai, end, sign, robin))
        vertices.append(Vertex(point, (u, v, w), vertex_ends))
    return QuantumGraph(params, arcs, vertices)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class JacobiSystem:
    """Assembled discrete pencil: form matrix A (the index form), mass M, and
    the sparse basis Z of the Kirchhoff-constraint subspace.

    Eigenvalues of the operator are the lam solving A x = -lam M x over the
    constrained subspace, i.e. the pencil (-Z^T A Z, Z^T M Z).
    """

    graph: QuantumGraph
    h: float
    offsets: list[int]
    counts: list[int]
    cyclic: list[bool]
    steps: list[float]
    form: sp.csr_matrix
    mass: sp.csr_matrix
    constraint_basis: sp.csr_matrix
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.form.shape[0]

    @property
    def reduced_size(self) -> int:
        return self.constraint_basis.shape[1]

    def node_index(self, arc_index: int, k: int) -> int:
        count = self.counts[arc_index]
        return self.offsets[arc_index] + (k % count if self.cyclic[arc_index] else k)

    def arc_values(self, x: np.ndarray, arc_index: int) -> np.ndarray:
        off, cnt = self.offsets[arc_index], self.counts[arc_index]
        return x[off:off + cnt]

    def arc_points(self, arc_index: int) -> np.ndarray:
        arc = self.graph.arcs[arc_index]
        cnt = self.counts[arc_index]
        m = cnt if self.cyclic[arc_index] else cnt - 1
        ts = arc.t0 + (arc.t1 - arc.t0) * np.arange(cnt) / m
        return arc.point(ts)

    def reduced(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        z = self.constraint_basis
        return (z.T @ self.form @ z).tocsr(), (z.T @ self.mass @ z).tocsr()

    def eigendecomposition(self) -> tuple[np.ndarray, np.ndarray]:
        """All eigenpairs of the reduced pencil (dense; cached)."""
        if self._eig is None:
            a_r, m_r = self.reduced()
            lam, vec = scipy.linalg.eigh(-a_r.toarray(), m_r.toarray())
            self._eig = (lam, vec)
        return self._eig


def assemble_jacobi(graph: QuantumGraph, h: float) -> JacobiSystem:
    """Piecewise-linear Galerkin assembly at target grid spacing h.

    Each arc gets a uniform grid with at least 16 intervals (coarser h is an
    error); vertex-free circle interfaces are discretized cyclically.
    """
    arcs = graph.arcs
    offsets, counts, cyclic, steps = [], [], [], []
    total = 0
    for arc in arcs:
        closed = arc.full_circle or arc.t1 - arc.t0 >= 2.0 * math.pi - 1e-12
        m = int(math.ceil(arc.length / h))
        if m < 16:
            raise ValueError(
                f"h = {h:g} gives only {m} intervals on an arc of length "
                f"{arc.length:g}; need at least 16")
        offsets.append(total)
        counts.append(m if closed else m + 1)
        cyclic.append(closed)
        steps.append(arc.length / m)
        total += counts[-1]

    rows, cols, a_vals, m_vals = [], [], [], []

    def add(r, c, a, m):
        rows.append(r)
        cols.append(c)
        a_vals.append(a)
        m_vals.append(m)

    for ai, arc in enumerate(arcs):
        step = steps[ai]
        pot = 1.0 + arc.kappa ** 2
        m_intervals = counts[ai] if cyclic[ai] else counts[ai] - 1
        k_diag, k_off = 1.0 / step, -1.0 / step
        m_diag, m_off = step / 3.0, step / 6.0
        for e in range(m_intervals):
            n0 = offsets[ai] + e
            n1 = offsets[ai] + ((e + 1) % counts[ai] if cyclic[ai] else e + 1)
            add(n0, n0, k_diag - pot * m_diag, m_diag)
            add(n1, n1, k_diag - pot * m_diag, m_diag)
            add(n0, n1, k_off - pot * m_off, m_off)
            add(n1, n0, k_off - pot * m_off, m_off)

    size = total
    form = sp.coo_matrix((a_vals, (rows, cols)), shape=(size, size)).tocsr()
    mass = sp.coo_matrix((m_vals, (rows, cols)), shape=(size, size)).tocsr()

    # Robin vertex terms enter the form with a minus sign
    vert_rows, vert_vals = [], []
    for vertex in graph.vertices:
        for ve in vertex.ends:
            node = offsets[ve.arc_index] + (0 if ve.end == 0 else counts[ve.arc_index] - 1)
            vert_rows.append(node)
            vert_vals.append(-ve.robin)
    if vert_rows:
        form = form + sp.coo_matrix((vert_vals, (vert_rows, vert_rows)),
                                    shape=(size, size)).tocsr()

    form = form / NORM_S2
    mass = mass / NORM_S2

    # eliminate one endpoint dof per vertex: sum of signed traces vanishes
    dependent: dict[int, list[tuple[int, float]]] = {}
    for vertex in graph.vertices:
        nodes = [offsets[ve.arc_index] + (0 if ve.end == 0 else counts[ve.arc_index] - 1)
                 for ve in vertex.ends]
        signs = [ve.sign for ve in vertex.ends]
        dep, dep_sign = nodes[-1], signs[-1]
        dependent[dep] = [(nodes[k], -signs[k] / dep_sign) for k in range(2)]
    free = [d for d in range(size) if d not in dependent]
    col_of = {d: c for c, d in enumerate(free)}
    z_rows, z_cols, z_vals = [], [], []
    for d in free:
        z_rows.append(d)
        z_cols.append(col_of[d])
        z_vals.append(1.0)
    for d, combo in dependent.items():
        for src, coeff in combo:
            z_rows.append(d)
            z_cols.append(col_of[src])
            z_vals.append(coeff)
    z = sp.coo_matrix((z_vals, (z_rows, z_cols)), shape=(size, len(free))).tocsr()
    return JacobiSystem(graph, h, offsets, counts, cyclic, steps, form, mass, z)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

def field_from_pointwise(system: JacobiSystem, fn) -> np.ndarray:
    """Node vector of a field given pointwise: fn(arc, points) -> values of f_ij."""
    x = np.zeros(system.size)
    for ai, arc in enumerate(system.graph.arcs):
        off, cnt = system.offsets[ai], system.counts[ai]
        x[off:off + cnt] = fn(arc, system.arc_points(ai))
    return x


def piecewise_constant_field(system: JacobiSystem, a) -> np.ndarray:
    """Node vector with value a_i - a_j on each (i, j) arc."""
    a = np.asarray(a, dtype=float)
    return field_from_pointwise(system, lambda arc, pts: a[arc.i] - a[arc.j])


def satisfies_constraints(system: JacobiSystem, x: np.ndarray, tol: float = 1e-9) -> bool:
    return kirchhoff_residual(system, x) <= tol


def kirchhoff_residual(system: JacobiSystem, x: np.ndarray) -> float:
    worst = 0.0
    for vertex in system.graph.vertices:
        total = 0.0
        for ve in vertex.ends:
            node = system.offsets[ve.arc_index] + (
                0 if ve.end == 0 else system.counts[ve.arc_index] - 1)
            total += ve.sign * x[node]
        worst = max(worst, abs(total))
    return worst


def robin_residual(system: JacobiSystem, x: np.ndarray) -> float:
    """Max spread of the matched Robin quantity across the ends of each vertex.

    Outward derivatives are recovered by one-sided second-order differences of
    the nodal values, so the residual of a smooth compatible field is O(h^2).
    """
    worst = 0.0
    for vertex in system.graph.vertices:
        values = []
        for ve in vertex.ends:
            ai = ve.arc_index
            off, cnt, step = system.offsets[ai], system.counts[ai], system.steps[ai]
            vals = x[off:off + cnt]
            if ve.end == 0:
                trace = vals[0]
                outward = -(-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * step)
            else:
                trace = vals[-1]
                outward = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * step)
            values.append(ve.sign * (outward - ve.robin * trace))
        worst = max(worst, max(values) - min(values))
    return worst


def strong_residual(system: JacobiSystem, x: np.ndarray, rhs=None) -> float:
    """Max interior residual of f'' + (1 + kappa^2) f - rhs by 3-point stencils.

    rhs maps an arc to a constant or nodal array; None means 0. Vertex rows are
    excluded (they carry the natural boundary conditions instead).
    """
    worst = 0.0
    for ai, arc in enumerate(system.graph.arcs):
        off, cnt, step = system.offsets[ai], system.counts[ai], system.steps[ai]
        vals = x[off:off + cnt]
        pot = 1.0 + arc.kappa ** 2
        target = 0.0 if rhs is None else rhs(arc)
        if system.cyclic[ai]:
            second = (np.roll(vals, 1) - 2.0 * vals + np.roll(vals, -1)) / step ** 2
            res = second + pot * vals - target
        else:
            second = (vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / step ** 2
            inner_target = target if np.isscalar(target) else target[1:-1]
            res = second + pot * vals[1:-1] - inner_target
        if res.size:
            worst = max(worst, float(np.max(np.abs(res))))
    return worst


def volume_derivative(system: JacobiSystem, x: np.ndarray) -> np.ndarray:
    """First variation of the cell volumes under a scalar field (normalized).

    Trapezoid quadrature of f over each arc, accumulated into the sum-zero
    pairing: component i gains, component j loses.
    """
    out = np.zeros(system.graph.q)
    for ai, arc in enumerate(system.graph.arcs):
        vals = system.arc_values(x, ai)
        step = system.steps[ai]
        if system.cyclic[ai]:
            integral = step * float(vals.sum())
        else:
            integral = step * (float(vals.sum()) - 0.5 * (vals[0] + vals[-1]))
        out[arc.i] += integral / NORM_S2
        out[arc.j] -= integral / NORM_S2
    return out


def index_form_value(system: JacobiSystem, x: np.ndarray) -> float:
    """The quadratic index form of a nodal field (vertex terms included)."""
    return float(x @ (system.form @ x))


# ---------------------------------------------------------------------------
# Eigenvalues and solves
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    count_positive: int
    eigenvalues: np.ndarray
    kernel_dim: int
    converged: bool
    counts_at_resolutions: tuple[int, int]


def _eigenvalues(system: JacobiSystem, k_top: int, shift_tol: float) -> np.ndarray:
    a_r, m_r = system.reduced()
    if system.reduced_size <= DENSE_LIMIT:
        lam, vec = system.eigendecomposition()
        return lam[::-1]  # descending
    kappa_max = max(abs(a.kappa) for a in system.graph.arcs)
    sigma = 1.0 + kappa_max ** 2 + 3.0
    lam = spla.eigsh(-a_r.tocsc(), k=min(k_top, system.reduced_size - 2),
                     M=m_r.tocsc(), sigma=sigma, which="LM",
                     return_eigenvectors=False)
    return np.sort(lam)[::-1]


def kernel_tolerance(system: JacobiSystem, floor: float = 1e-6) -> float:
    """Discretization-aware zero-mode threshold: exact kernel eigenvalues land
    within O(h^2) of zero, so anything below ~50 h^2 is treated as kernel."""
    return max(floor, 50.0 * system.h ** 2)


def eigen_count_positive(system: JacobiSystem, shift_tol: float = 1e-6,
                         k_top: int = 16) -> SpectrumReport:
    """Count positive eigenvalues, with an h/2 refinement consistency check.

    Eigenvalues above max(shift_tol, the kernel tolerance) are counted as
    positive; those below the kernel tolerance in absolute value as kernel.
    The count must agree between the given grid and its refinement;
    disagreement is flagged as inconclusive.
    """
    def count_at(sys_: JacobiSystem) -> tuple[int, int, np.ndarray]:
        lam = _eigenvalues(sys_, k_top, shift_tol)
        cut = max(shift_tol, kernel_tolerance(sys_, shift_tol))
        return (int(np.sum(lam > cut)), int(np.sum(np.abs(lam) <= cut)), lam)

    count, kernel, lam = count_at(system)
    fine = assemble_jacobi(system.graph, system.h / 2.0)
    count_fine, _, _ = count_at(fine)
    return SpectrumReport(count, lam, kernel, count == count_fine, (count, count_fine))


@dataclass
class ConformalSolveReport:
    field: np.ndarray
    volume_column: np.ndarray
    kernel_dim: int
    removed_rhs_fraction: float
    conformal_parameter: np.ndarray


def conformal_jacobi_solve(system: JacobiSystem, a,
                           kernel_tol: float | None = None) -> ConformalSolveReport:
    """Solve the vertex-matched problem L f = (n-1) a_ij per arc; return f and its volume column.

    The reduced system is solved through the full eigendecomposition so that
    kernel components (discrete Jacobi fields) are projected out of both the
    right-hand side and the solution; the removed fraction is reported. The
    volume column of the returned field is one column of the discrete
    conformal-to-volume operator.
    """
    a = np.asarray(a, dtype=float)
    a = a - a.mean()
    if kernel_tol is None:
        kernel_tol = kernel_tolerance(system)
    n_minus_1 = float(system.graph.params.n - 1)
    g = piecewise_constant_field(system, a)
    rhs_full = -n_minus_1 * (system.mass @ g)
    z = system.constraint_basis
    rhs = z.T @ rhs_full
    # -A vec_k = lam_k M vec_k with vec^T M vec = Id, so A y = rhs is solved by
    # y = vec @ c with c_k = -(vec^T rhs)_k / lam_k
    lam, vec = system.eigendecomposition()
    coeffs = vec.T @ rhs
    keep = np.abs(lam) > kernel_tol
    kernel_dim = int(np.sum(~keep))
    sol_coeffs = np.zeros_like(coeffs)
    sol_coeffs[keep] = -coeffs[keep] / lam[keep]
    removed = float(np.linalg.norm(coeffs[~keep]) / max(np.linalg.norm(coeffs), 1e-300))
    y = vec @ sol_coeffs
    x = z @ y
    return ConformalSolveReport(x, volume_derivative(system, x), kernel_dim, removed, a)


def remove_kernel_component(system: JacobiSystem, x: np.ndarray,
                            kernel_tol: float | None = None) -> np.ndarray:
    """Project the discrete Jacobi-field components out of a constrained field.

    Useful when comparing a computed solution with a closed form that may
    differ by kernel elements.
    """
    if kernel_tol is None:
        kernel_tol = kernel_tolerance(system)
    z = system.constraint_basis
    lam, vec = system.eigendecomposition()
    kernel = vec[:, np.abs(lam) <= kernel_tol]
    y = spla.spsolve((z.T @ z).tocsc(), z.T @ x)
    m_r = system.reduced()[1]
    proj = kernel @ (kernel.T @ (m_r @ y))
    return z @ (y - proj)
