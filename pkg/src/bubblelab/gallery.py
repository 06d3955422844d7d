"""Named example clusters used by the verification suites.

These are small, exactly constructed configurations exercising specific
geometric regimes: lower-dimensional perpendicular Plateau clusters (bands and
a sectored cap), a degenerate five-cell cluster with a common meeting point,
and a cross-junction cluster violating the 120-degree law.
"""

from __future__ import annotations

import math

import numpy as np

from .cluster import ClusterParams, recentered


def five_cell_meeting_point(y: float = 2.0) -> ClusterParams:
    """Five cells on S^2 with exactly seven interfaces and one degenerate meeting point.

    The first cell disappears in the blow-up at the common point, so the
    cluster is spherical Voronoi but not non-degenerate.
    """
    s3 = math.sqrt(3.0) / 2.0
    c = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0],
                  [0.5, y, s3], [-0.5, y, s3]])
    k = np.array([0.0, 1.0, 1.0, y, y])
    return recentered(2, c, k, label="five-cell-meeting-point")


def affine_cushion() -> ClusterParams:
    """Affine (not spherical) Voronoi 3-cluster: two cells meet at a single point.

    The pair (0, 1) violates the compatibility constraint, |c_01|^2 = 4 != 1.
    """
    c = np.array([[-1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    k = np.array([1.0, 1.0, 0.0])
    return recentered(2, c, k, label="affine-cushion")


def cross_junction(n: int = 2) -> ClusterParams:
    """Four cells meeting at right angles along a codimension-2 locus.

    Quasi-centers sit at the corners of a centered square of circumradius
    1/sqrt(2), so the four adjacent walls satisfy the compatibility constraint
    while the two diagonals stay empty. All four cells meet where the span is
    degenerate: the blow-up there has rank 2 < 3, so the cluster is
    non-degenerate but not 2-Plateau (no 120-degree junctions).
    """
    r = 1.0 / math.sqrt(2.0)
    c = np.zeros((4, n + 1))
    for idx in range(4):
        angle = math.pi / 2.0 * idx
        c[idx, 0] = r * math.cos(angle)
        c[idx, 1] = r * math.sin(angle)
    return recentered(n, c, np.zeros(4), label="cross-junction")


def band_stack(n: int = 4, wall_positions=(-0.5, 0.0, 0.5)) -> ClusterParams:
    """Parallel bands on S^n: q cells cut by parallel walls along one axis.

    The quasi-centers span a single dimension, all junction sets are empty
    (each boundary sphere touches exactly two cells), so the cluster is
    perpendicular and vacuously Plateau. The curvatures are generically not
    proportional to the centers, so no compatibility parameter exists (the
    cluster is not PCF).
    """
    walls = list(wall_positions)
    if any(not -1.0 < w < 1.0 for w in walls) or sorted(walls) != walls:
        raise ValueError("wall positions must be increasing in (-1, 1)")
    gaps = [1.0 / math.sqrt(1.0 - w * w) for w in walls]
    a = [0.0]
    for gap in gaps:
        a.append(a[-1] - gap)  # decreasing: cell k occupies x0 in (walls[k-1], walls[k])
    kappas = [0.0]
    for w, gap in zip(walls, gaps):
        # wall between cells k and k+1 sits where gap * x0 + (kappa_k - kappa_k+1) = 0
        kappas.append(kappas[-1] + w * gap)
    q = len(walls) + 1
    c = np.zeros((q, n + 1))
    c[:, 0] = a
    return recentered(n, c, np.array(kappas), label="band-stack")


def sectored_cap(n: int = 4, cos_cap: float = 0.8) -> ClusterParams:
    """Three 120-degree sectors plus a cap swallowed into one sector, on S^n.

    The quasi-centers span only two dimensions, yet the cluster is fully
    Plateau: the three sector walls meet at 120 degrees along the junction
    sphere, and the cap boundary stays strictly inside the host sector.
    Perpendicular, all cells nonempty, and not full-dimensional: the canonical
    lower-dimensional input for the Gram-deformation checks.
    """
    if not 0.0 < cos_cap < 1.0:
        raise ValueError("cos_cap must lie in (0, 1)")
    if n < 3:
        raise ValueError("need n >= 3 so that q = 4 <= n + 1 stays perpendicular")
    r = 1.0 / math.sqrt(3.0)
    angles = [math.pi / 2.0, math.pi / 2.0 + 2.0 * math.pi / 3.0,
              math.pi / 2.0 + 4.0 * math.pi / 3.0]
    c = np.zeros((4, n + 1))
    for idx, ang in enumerate(angles):
        c[idx, 0] = r * math.cos(ang)
        c[idx, 1] = r * math.sin(ang)
    host = 2
    u = -c[host] / np.linalg.norm(c[host])  # direction of the host sector
    mu = 1.0 / math.sqrt(1.0 - cos_cap ** 2)
    kappa_gap = cos_cap * mu
    c[3] = c[host] - mu * u
    k = np.array([0.0, 0.0, 0.0, kappa_gap])
    return recentered(n, c, k, label="sectored-cap")
