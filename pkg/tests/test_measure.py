"""Monte Carlo and exact measures, weighted Laplacians, backend agreement."""

import math

import numpy as np
import pytest

from bubblelab import (apply_mobius, check_positive_definite, detect_interfaces,
                       equal_volume_standard, measure_exact_s2, measure_mc,
                       standard_of_curvature, standard_of_volume,
                       weighted_laplacian)
from bubblelab import MobiusMap, gallery
from bubblelab.cluster import complete_graph
from bubblelab.measure import MeasureError, WeightedLaplacian, extract_arcs
from bubblelab.simplex import random_orthogonal, restrict


class TestMeasureMC:
    def test_hemispheres(self, hemispheres):
        graph = detect_interfaces(hemispheres, rng_seed=0)
        rep = measure_mc(hemispheres, graph, samples=200_000, seed=1)
        assert np.max(np.abs(rep.volumes - 0.5)) < 4 * rep.volume_stderr.max()
        assert abs(rep.areas[0, 1] - 0.5) < 4 * max(rep.area_stderr[0, 1], 1e-12)

    def test_equal_bubble(self, equal_bubble_s2, equal_bubble_graph):
        rep = measure_mc(equal_bubble_s2, equal_bubble_graph, samples=300_000, seed=2)
        assert np.max(np.abs(rep.volumes - 1 / 3)) < 4 * rep.volume_stderr.max()
        assert abs(rep.total_perimeter - 0.75) < 4 * rep.perimeter_stderr

    def test_symmetry_any_dimension(self):
        params = equal_volume_standard(4, 5)
        rep = measure_mc(params, complete_graph(5), samples=200_000, seed=3)
        assert np.max(np.abs(rep.volumes - 0.2)) < 4 * rep.volume_stderr.max()

    def test_total_perimeter_consistency(self, skew_bubble_s2, skew_bubble_graph):
        rep = measure_mc(skew_bubble_s2, skew_bubble_graph, samples=100_000, seed=4)
        assert abs(rep.total_perimeter - np.sum(np.triu(rep.areas, 1))) < 1e-12

    def test_reproducible(self, skew_bubble_s2, skew_bubble_graph):
        a = measure_mc(skew_bubble_s2, skew_bubble_graph, samples=50_000, seed=9)
        b = measure_mc(skew_bubble_s2, skew_bubble_graph, samples=50_000, seed=9)
        assert np.array_equal(a.volumes, b.volumes)
        assert np.array_equal(a.areas, b.areas)

    def test_stderr_scaling(self, skew_bubble_s2, skew_bubble_graph):
        small = measure_mc(skew_bubble_s2, skew_bubble_graph, samples=50_000, seed=5)
        large = measure_mc(skew_bubble_s2, skew_bubble_graph, samples=200_000, seed=6)
        ratio = small.volume_stderr.max() / large.volume_stderr.max()
        assert abs(ratio - 2.0) < 0.4  # halves when samples quadruple

    def test_rejects_nonpositive_samples(self, hemispheres):
        with pytest.raises(ValueError):
            measure_mc(hemispheres, complete_graph(2), samples=0)


class TestMeasureExactS2:
    def test_hemispheres_exact(self, hemispheres):
        graph = detect_interfaces(hemispheres, rng_seed=0)
        rep = measure_exact_s2(hemispheres, graph)
        assert np.max(np.abs(rep.volumes - 0.5)) < 1e-14
        assert abs(rep.total_perimeter - 0.5) < 1e-14

    def test_equal_bubble_exact(self, equal_bubble_s2, equal_bubble_graph):
        rep = measure_exact_s2(equal_bubble_s2, equal_bubble_graph)
        assert np.max(np.abs(rep.volumes - 1 / 3)) < 1e-13
        for i, j in equal_bubble_graph.pairs():
            assert abs(rep.areas[i, j] - 0.25) < 1e-13

    def test_cap_cluster(self):
        params = standard_of_volume(2, 2, [0.25, 0.75])
        graph = detect_interfaces(params, rng_seed=0)
        rep = measure_exact_s2(params, graph)
        assert np.max(np.abs(rep.volumes - [0.25, 0.75])) < 1e-9
        assert abs(rep.total_perimeter - math.sqrt(3) / 4) < 1e-9

    def test_band_cluster_with_annulus_cells(self):
        # parallel circles: middle cells are annuli, so loop bookkeeping matters
        params = gallery.band_stack(2, (-0.4, 0.5))
        graph = detect_interfaces(params, rng_seed=0)
        rep = measure_exact_s2(params, graph)
        # cap heights: volumes ((1-0.4)/2-ish...) from cos t = wall position
        expected = np.array([(1 - 0.4) / 2 - 0.2 + 0.2, 0.0, 0.0])
        v0 = (1.0 - 0.4) / 2.0  # cap below x = -0.4: (1 - cos t)/2 with cos t = -(-0.4)
        v0 = (1.0 + (-0.4)) / 2.0
        v2 = (1.0 - 0.5) / 2.0
        v1 = 1.0 - v0 - v2
        assert np.max(np.abs(rep.volumes - [v0, v1, v2])) < 1e-12

    def test_five_cell_cluster_volumes_sum(self):
        params = gallery.five_cell_meeting_point()
        graph = detect_interfaces(params, samples_per_pair=4096, rng_seed=3)
        rep = measure_exact_s2(params, graph)
        assert abs(rep.volumes.sum() - 1.0) < 1e-9
        assert np.all(rep.volumes > 0)

    def test_rejects_higher_dimensions(self):
        params = equal_volume_standard(3, 3)
        with pytest.raises(MeasureError):
            measure_exact_s2(params, complete_graph(3))

    def test_q4_full_dimensional(self):
        params = standard_of_curvature(2, 4, np.array([0.2, -0.1, 0.05, -0.15]))
        graph = detect_interfaces(params, rng_seed=1)
        assert len(graph.pairs()) == 6
        rep = measure_exact_s2(params, graph)
        assert abs(rep.volumes.sum() - 1.0) < 1e-9


class TestCrossBackend:
    def test_agreement_on_random_clusters(self):
        rng = np.random.default_rng(12)
        for trial in range(4):
            q = 3 if trial % 2 == 0 else 4
            kappa = 0.45 * rng.standard_normal(q)
            params = standard_of_curvature(2, q, kappa - kappa.mean())
            graph = detect_interfaces(params, rng_seed=trial)
            exact = measure_exact_s2(params, graph)
            mc = measure_mc(params, graph, samples=200_000, seed=100 + trial)
            assert np.max(np.abs(mc.volumes - exact.volumes)
                          / np.maximum(mc.volume_stderr, 1e-9)) < 4.5
            for i, j in graph.pairs():
                assert (abs(mc.areas[i, j] - exact.areas[i, j])
                        < 4.5 * max(mc.area_stderr[i, j], 1e-9))

    def test_orthogonal_invariance_exact(self, skew_bubble_s2):
        rot = random_orthogonal(3, np.random.default_rng(8))
        rotated = apply_mobius(skew_bubble_s2, MobiusMap.orthogonal(rot))
        g1 = detect_interfaces(skew_bubble_s2, rng_seed=2)
        g2 = detect_interfaces(rotated, rng_seed=2)
        r1 = measure_exact_s2(skew_bubble_s2, g1)
        r2 = measure_exact_s2(rotated, g2)
        assert np.max(np.abs(r1.volumes - r2.volumes)) < 1e-10
        assert np.max(np.abs(r1.areas - r2.areas)) < 1e-10


class TestWeightedLaplacian:
    def test_unit_weight_equal_bubble(self, equal_bubble_s2, equal_bubble_graph):
        lap = weighted_laplacian(equal_bubble_s2, equal_bubble_graph,
                                 lambda pts: np.ones(len(pts)), backend="exact")
        expected = 0.25 * (3.0 * np.eye(3) - np.ones((3, 3)))
        assert np.max(np.abs(lap.matrix - expected)) < 1e-12
        on_e = restrict(lap.matrix)
        assert np.max(np.abs(on_e - 0.75 * np.eye(2))) < 1e-12

    def test_meridian_second_moment(self, equal_bubble_s2, equal_bubble_graph):
        pole = np.array([0.0, 0.0, 1.0])
        lap = weighted_laplacian(equal_bubble_s2, equal_bubble_graph,
                                 lambda pts: (pts @ pole) ** 2, backend="exact")
        # per meridian: (1/4pi) integral_0^pi cos^2 = 1/8
        expected = (1.0 / 8.0) * (3.0 * np.eye(3) - np.ones((3, 3)))
        assert np.max(np.abs(lap.matrix - expected)) < 1e-12

    def test_odd_weight_vanishes_on_perpendicular(self, skew_bubble_s2,
                                                  skew_bubble_graph):
        pole = np.array([0.0, 0.0, 1.0])
        lap = weighted_laplacian(skew_bubble_s2, skew_bubble_graph,
                                 lambda pts: pts @ pole, backend="exact")
        assert np.max(np.abs(lap.matrix)) < 1e-12

    def test_annihilates_constants(self, skew_bubble_s2, skew_bubble_graph):
        lap = weighted_laplacian(skew_bubble_s2, skew_bubble_graph,
                                 lambda pts: 1.0 + pts[:, 0] ** 2, backend="exact")
        assert np.max(np.abs(lap.matrix @ np.ones(3))) < 1e-15

    def test_mc_matches_exact(self, skew_bubble_s2, skew_bubble_graph):
        weight = lambda pts: 1.0 - 0.3 * pts[:, 2] ** 2
        exact = weighted_laplacian(skew_bubble_s2, skew_bubble_graph, weight,
                                   backend="exact")
        mc = weighted_laplacian(skew_bubble_s2, skew_bubble_graph, weight,
                                backend="mc", samples=200_000, seed=13)
        for i, j in skew_bubble_graph.pairs():
            assert (abs(mc.matrix[i, j] - exact.matrix[i, j])
                    < 4.5 * max(mc.entry_stderr[i, j], 1e-9))


class TestPositiveDefiniteness:
    def test_unit_laplacian_positive(self, equal_bubble_s2, equal_bubble_graph):
        lap = weighted_laplacian(equal_bubble_s2, equal_bubble_graph,
                                 lambda pts: np.ones(len(pts)), backend="exact")
        report = check_positive_definite(lap)
        assert report.positive_definite
        assert report.eigenvalues.min() > 0.7

    def test_cut_graph_is_singular(self):
        # weights supported on a disconnected graph: indicator of the cut in kernel
        m = np.zeros((4, 4))
        for i, j, w in ((0, 1, 1.0), (2, 3, 2.0)):
            m[i, i] += w
            m[j, j] += w
            m[i, j] -= w
            m[j, i] -= w
        report = check_positive_definite(WeightedLaplacian(m, "cut"))
        assert not report.positive_definite
        assert abs(report.eigenvalues[0]) < 1e-12

    def test_absolute_height_weight_positive(self, skew_bubble_s2, skew_bubble_graph):
        pole = np.array([0.0, 0.0, 1.0])
        lap = weighted_laplacian(skew_bubble_s2, skew_bubble_graph,
                                 lambda pts: np.abs(pts @ pole), backend="exact")
        assert check_positive_definite(lap).positive_definite


class TestArcExtraction:
    def test_lune_arcs(self, equal_bubble_s2, equal_bubble_graph):
        arcs = extract_arcs(equal_bubble_s2, equal_bubble_graph)
        assert len(arcs) == 3
        for arc in arcs:
            assert abs(arc.length - math.pi) < 1e-12
            assert abs(arc.radius - 1.0) < 1e-14

    def test_full_circle_for_cap(self):
        params = standard_of_volume(2, 2, [0.3, 0.7])
        arcs = extract_arcs(params, complete_graph(2))
        assert len(arcs) == 1
        assert arcs[0].full_circle
