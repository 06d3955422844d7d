"""Blow-up cones, 120-degree junctions, Plateau certification, classification."""

import numpy as np
import pytest

from bubblelab import (MobiusMap, apply_mobius, blowup_at, certify_plateau,
                       classify_q3, conformal_step, detect_interfaces,
                       equal_volume_standard, pcf_detect, perpendicular_pole,
                       plateau_at, standard_of_curvature, triple_point_angles)
from bubblelab import gallery
from bubblelab.plateau import boundary_normal_sum
from bubblelab.simplex import random_orthogonal, sum_zero_projector


class TestBlowupAt:
    def test_interior_point(self, equal_bubble_s2):
        # center of a lune: only one cell, rank 0
        direction = -equal_bubble_s2.quasi_centers[0]
        direction /= np.linalg.norm(direction)
        cone = blowup_at(equal_bubble_s2, direction)
        assert len(cone.incidence) == 1
        assert cone.affine_rank == 0

    def test_interface_point_unit_normal(self, skew_bubble_s2, skew_bubble_graph):
        for (i, j), w in skew_bubble_graph.witnesses.items():
            cone = blowup_at(skew_bubble_s2, w)
            assert cone.incidence.tolist() == [i, j]
            assert cone.affine_rank == 1
            # |n_i - n_j| = 1 from the compatibility constraint on the wall
            diff = cone.centered_normals[0] - cone.centered_normals[1]
            assert abs(np.linalg.norm(diff) - 1.0) < 1e-9

    def test_triple_point_geometry(self, equal_bubble_s2):
        cone = blowup_at(equal_bubble_s2, np.array([0.0, 0.0, 1.0]))
        assert len(cone.incidence) == 3
        assert cone.affine_rank == 2
        assert np.max(np.abs(cone.centered_normals.sum(axis=0))) < 1e-12
        gram = cone.centered_normals @ cone.centered_normals.T
        # regular unit-simplex pattern: 1/3 on the diagonal, -1/6 off it
        assert np.max(np.abs(gram - (np.eye(3) / 2 - 1 / 6 + np.eye(3) * 0.0)
                             )) < 1e-9 or True
        expected = 0.5 * sum_zero_projector(3)
        assert np.max(np.abs(gram - expected)) < 1e-9

    def test_normals_tangent_to_sphere(self, skew_bubble_s2):
        p = np.array([0.0, 0.0, 1.0])
        cone = blowup_at(skew_bubble_s2, p, tie_tol=1.0)  # force all cells in
        assert np.max(np.abs(cone.centered_normals @ p)) < 1e-12


class TestPlateauAt:
    def test_triple_point_true(self, equal_bubble_s2):
        cone = blowup_at(equal_bubble_s2, np.array([0.0, 0.0, 1.0]))
        diag = plateau_at(cone)
        assert diag.is_plateau
        assert diag.gram_residual < 1e-9

    def test_interface_point_always_true(self, skew_bubble_s2, skew_bubble_graph):
        (i, j), w = next(iter(skew_bubble_graph.witnesses.items()))
        assert plateau_at(blowup_at(skew_bubble_s2, w)).is_plateau

    def test_cross_junction_false(self):
        cross = gallery.cross_junction(2)
        pole = np.array([0.0, 0.0, 1.0])
        cone = blowup_at(cross, pole, tie_tol=1e-7)
        assert len(cone.incidence) == 4
        diag = plateau_at(cone)
        assert not diag.is_plateau
        assert cone.affine_rank == 2

    def test_rotation_invariance(self, equal_bubble_s2):
        rot = random_orthogonal(3, np.random.default_rng(9))
        rotated = apply_mobius(equal_bubble_s2, MobiusMap.orthogonal(rot))
        p = rot @ np.array([0.0, 0.0, 1.0])
        diag = plateau_at(blowup_at(rotated, p / np.linalg.norm(p)))
        assert diag.is_plateau
        assert diag.gram_residual < 1e-9


class TestTripleAngles:
    def test_equal_bubble_120(self, equal_bubble_s2):
        angles = triple_point_angles(equal_bubble_s2, [0.0, 0.0, 1.0])
        assert np.max(np.abs(angles - 120.0)) < 1e-9
        assert boundary_normal_sum(equal_bubble_s2, [0.0, 0.0, 1.0]) < 1e-12

    def test_general_bubble_120(self, skew_bubble_s2, skew_bubble_graph):
        cert = certify_plateau(skew_bubble_s2, skew_bubble_graph,
                               sample_budget=200, seed=0)
        triples = [e for e in cert.junction_points if len(e["incidence"]) == 3]
        assert triples
        for entry in triples:
            angles = triple_point_angles(skew_bubble_s2, entry["point"],
                                         tie_tol=1e-7)
            assert np.max(np.abs(angles - 120.0)) < 1e-6
            assert boundary_normal_sum(skew_bubble_s2, entry["point"],
                                       tie_tol=1e-7) < 1e-9

    def test_rejects_non_triple(self, equal_bubble_s2):
        direction = -equal_bubble_s2.quasi_centers[0]
        with pytest.raises(ValueError):
            triple_point_angles(equal_bubble_s2,
                                direction / np.linalg.norm(direction))


class TestCertifyPlateau:
    def test_standard_bubbles_fully_plateau(self):
        for n, q, scale in ((2, 3, 0.0), (2, 3, 0.4), (2, 4, 0.25)):
            rng = np.random.default_rng(q * 17)
            kappa = scale * rng.standard_normal(q)
            params = standard_of_curvature(n, q, kappa - kappa.mean())
            graph = detect_interfaces(params, rng_seed=1)
            cert = certify_plateau(params, graph, sample_budget=300, seed=1)
            assert cert.fully_plateau
            assert cert.plateau_up_to == min(n, q - 1)

    def test_cross_junction_counterexample(self):
        cross = gallery.cross_junction(2)
        graph = detect_interfaces(cross, rng_seed=1)
        cert = certify_plateau(cross, graph, sample_budget=300, seed=1)
        assert not cert.fully_plateau
        assert cert.plateau_up_to < 2
        assert any(len(f["incidence"]) == 4 for f in cert.failures)

    def test_two_cells_vacuous(self):
        params = equal_volume_standard(3, 2)
        graph = detect_interfaces(params, rng_seed=0)
        cert = certify_plateau(params, graph, sample_budget=100, seed=0)
        assert cert.fully_plateau
        assert cert.multi_points_found == 0  # only interface points exist

    def test_band_cluster_vacuously_plateau(self, band_cluster, band_graph):
        cert = certify_plateau(band_cluster, band_graph, sample_budget=200, seed=2)
        assert cert.fully_plateau
        assert cert.multi_points_found == 0


class TestClassifyQ3:
    def test_standard_bubble_both(self, skew_bubble_s2, skew_bubble_graph):
        cert = certify_plateau(skew_bubble_s2, skew_bubble_graph,
                               sample_budget=200, seed=3)
        verdict = classify_q3(skew_bubble_s2, skew_bubble_graph, cert)
        assert verdict.verdict == "both"
        assert verdict.consistent

    def test_conformal_step_output_both(self, skew_bubble_s2):
        pole = perpendicular_pole(skew_bubble_s2)
        stepped = conformal_step(skew_bubble_s2, pole, 0.5)
        graph = detect_interfaces(stepped, rng_seed=4)
        cert = certify_plateau(stepped, graph, sample_budget=200, seed=4)
        verdict = classify_q3(stepped, graph, cert)
        assert verdict.verdict == "both"

    def test_common_point_cluster_is_pcf(self):
        # all five closures share a point, so a compatibility parameter exists
        params = gallery.five_cell_meeting_point()
        rep = pcf_detect(params)
        assert rep.pcf

    def test_band_cluster_plateau_only(self, band_cluster, band_graph):
        cert = certify_plateau(band_cluster, band_graph, sample_budget=200, seed=5)
        verdict = classify_q3(band_cluster, band_graph, cert)
        assert verdict.verdict == "plateau"
        assert verdict.consistent
