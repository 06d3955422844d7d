"""Standard bubbles, Moebius maps, prescribed volumes, model profile."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblelab import (MobiusMap, NewtonConfig, apply_mobius, complete_graph,
                       detect_interfaces, equal_volume_standard, measure_exact_s2,
                       mobius_point_flow, model_profile, pde_residual,
                       perpendicular_pole, standard_of_curvature,
                       standard_of_volume, validate_spherical)
from bubblelab.cluster import spherical_residuals
from bubblelab.simplex import random_orthogonal, sum_zero_projector
from bubblelab.standard import gradient_vs_curvature, mobius_conformal_factor


def random_kappa(q, rng, scale=0.5):
    k = scale * rng.standard_normal(q)
    return k - k.mean()


class TestEqualVolumeStandard:
    def test_hemispheres(self):
        params = equal_volume_standard(2, 2)
        assert abs(np.linalg.norm(params.pair_center(0, 1)) - 1.0) < 1e-14
        assert np.all(params.curvatures == 0.0)

    def test_three_lunes(self, equal_bubble_s2, equal_bubble_graph):
        report = measure_exact_s2(equal_bubble_s2, equal_bubble_graph)
        assert np.max(np.abs(report.volumes - 1.0 / 3.0)) < 1e-13
        assert abs(report.total_perimeter - 0.75) < 1e-13

    def test_gram_identity_all_admissible(self):
        for n in range(2, 6):
            for q in range(2, n + 3):
                params = equal_volume_standard(n, q)
                gram = params.quasi_centers @ params.quasi_centers.T
                assert np.max(np.abs(gram - 0.5 * sum_zero_projector(q))) < 1e-12

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            equal_volume_standard(2, 5)


class TestMobiusPointFlow:
    def test_identity_at_zero(self):
        p = np.array([0.6, 0.8, 0.0])
        assert np.allclose(mobius_point_flow(p, [0, 0, 1], 0.0), p)

    def test_pole_is_fixed(self):
        pole = np.array([0.0, 0.0, 1.0])
        assert np.allclose(mobius_point_flow(pole, pole, 1.7), pole)

    def test_orthogonal_point_moves_by_tanh(self):
        p = np.array([1.0, 0.0, 0.0])
        pole = np.array([0.0, 0.0, 1.0])
        out = mobius_point_flow(p, pole, math.log(2.0))
        assert abs(out @ pole - 3.0 / 5.0) < 1e-14  # tanh(ln 2) = 3/5
        assert abs(np.linalg.norm(out) - 1.0) < 1e-14

    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_group_law(self, s, t, seed):
        rng = np.random.default_rng(seed)
        p = rng.standard_normal(3)
        p /= np.linalg.norm(p)
        pole = np.array([0.0, 0.0, 1.0])
        once = mobius_point_flow(mobius_point_flow(p, pole, s), pole, t)
        direct = mobius_point_flow(p, pole, s + t)
        assert np.max(np.abs(once - direct)) < 1e-10

    def test_conformal_factor_formula(self):
        rng = np.random.default_rng(1)
        p = rng.standard_normal(4)
        p /= np.linalg.norm(p)
        pole = np.zeros(4)
        pole[3] = 1.0
        t = 0.73
        assert abs(mobius_conformal_factor(p, pole, t)
                   - 1.0 / (math.cosh(t) + (p @ pole) * math.sinh(t))) < 1e-15


class TestApplyMobius:
    def test_identity_at_zero(self, skew_bubble_s2):
        out = apply_mobius(skew_bubble_s2, MobiusMap.flow([0, 0, 1], 0.0))
        assert np.allclose(out.quasi_centers, skew_bubble_s2.quasi_centers)
        assert np.allclose(out.curvatures, skew_bubble_s2.curvatures)

    def test_perpendicular_curvatures_scale_by_cosh(self, skew_bubble_s2):
        pole = perpendicular_pole(skew_bubble_s2)
        out = apply_mobius(skew_bubble_s2, MobiusMap.flow(pole, 0.9))
        assert np.allclose(out.curvatures,
                           skew_bubble_s2.curvatures * math.cosh(0.9), atol=1e-14)

    def test_non_unit_pole_rejected(self):
        with pytest.raises(ValueError):
            MobiusMap.flow([0.0, 0.0, 2.0], 0.1)

    def test_orthogonal_part(self, skew_bubble_s2):
        rot = random_orthogonal(3, np.random.default_rng(3))
        out = apply_mobius(skew_bubble_s2, MobiusMap.orthogonal(rot))
        assert np.allclose(out.quasi_centers, skew_bubble_s2.quasi_centers @ rot.T)
        assert np.allclose(out.curvatures, skew_bubble_s2.curvatures)

    def test_residuals_preserved_under_random_flows(self, skew_bubble_s2):
        rng = np.random.default_rng(7)
        base = spherical_residuals(skew_bubble_s2)
        for _ in range(100):
            theta = rng.standard_normal(3)
            theta /= np.linalg.norm(theta)
            t = rng.uniform(-1.0, 1.0)
            out = apply_mobius(skew_bubble_s2, MobiusMap.flow(theta, t))
            assert np.max(np.abs(spherical_residuals(out) - base)) < 1e-10

    def test_composition(self, skew_bubble_s2):
        pole = perpendicular_pole(skew_bubble_s2)
        combo = MobiusMap.composition(MobiusMap.flow(pole, 0.4),
                                      MobiusMap.flow(pole, 0.3))
        direct = MobiusMap.flow(pole, 0.7)
        a = apply_mobius(skew_bubble_s2, combo)
        b = apply_mobius(skew_bubble_s2, direct)
        assert np.allclose(a.quasi_centers, b.quasi_centers, atol=1e-12)

    def test_volumes_match_pushforward_weights(self, hemispheres):
        # V(Phi_t(cell)) equals the Jacobian-weighted count of flowed samples
        pole = np.array([0.0, 1.0, 0.0])  # orthogonal to the hemisphere centers
        t = 1.0
        flowed = apply_mobius(hemispheres, MobiusMap.flow(pole, t))
        graph = detect_interfaces(flowed, samples_per_pair=512, rng_seed=0)
        exact = measure_exact_s2(flowed, graph)
        rng = np.random.default_rng(11)
        pts = rng.standard_normal((400_000, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        weights = mobius_conformal_factor(pts, pole, t) ** 2  # n = 2
        cells = np.argmin(hemispheres.affine_values(pts), axis=1)
        est = np.array([weights[cells == i].sum() for i in range(2)]) / len(pts)
        assert np.max(np.abs(est - exact.volumes)) < 4.0 * 1.5 / math.sqrt(len(pts))


class TestStandardOfCurvature:
    def test_zero_kappa_matches_equal_volume(self):
        a = standard_of_curvature(3, 4, np.zeros(4))
        gram_a = a.quasi_centers @ a.quasi_centers.T
        b = equal_volume_standard(3, 4)
        gram_b = b.quasi_centers @ b.quasi_centers.T
        assert np.max(np.abs(gram_a - gram_b)) < 1e-12

    def test_full_gram_identity_random(self):
        rng = np.random.default_rng(2)
        for n, q in ((2, 3), (3, 4), (4, 5), (5, 6), (4, 6)):
            kappa = random_kappa(q, rng)
            params = standard_of_curvature(n, q, kappa)
            target = 0.5 * sum_zero_projector(q) + np.outer(kappa, kappa)
            gram = params.quasi_centers @ params.quasi_centers.T
            assert np.max(np.abs(gram - target)) < 1e-10
            assert validate_spherical(params).passed

    def test_single_pair_identity(self):
        k = 0.35
        params = standard_of_curvature(3, 2, np.array([k, -k]))
        assert abs(np.linalg.norm(params.pair_center(0, 1)) ** 2
                   - (1.0 + 4.0 * k * k)) < 1e-12

    def test_measures_invariant_under_embedding_rotation(self):
        rng = np.random.default_rng(4)
        kappa = random_kappa(3, rng)
        params = standard_of_curvature(2, 3, kappa)
        rot = random_orthogonal(3, rng)
        rotated = apply_mobius(params, MobiusMap.orthogonal(rot))
        g1 = detect_interfaces(params, rng_seed=1)
        g2 = detect_interfaces(rotated, rng_seed=1)
        r1 = measure_exact_s2(params, g1)
        r2 = measure_exact_s2(rotated, g2)
        assert np.max(np.abs(np.sort(r1.volumes) - np.sort(r2.volumes))) < 1e-10
        assert abs(r1.total_perimeter - r2.total_perimeter) < 1e-10


class TestStandardOfVolume:
    def test_equal_volumes_give_zero_kappa(self):
        params = standard_of_volume(2, 3, [1 / 3, 1 / 3, 1 / 3])
        assert np.max(np.abs(params.curvatures)) < 1e-8

    def test_quarter_cap_curvature(self):
        # cos t = 1 - 2 v = 1/2, so kappa_01 = cot t = 1/sqrt(3)
        params = standard_of_volume(2, 2, [0.25, 0.75])
        assert abs(params.pair_curvature(0, 1) - 1.0 / math.sqrt(3.0)) < 1e-9

    def test_permutation_equivariance(self):
        v = [0.5, 0.3, 0.2]
        direct = standard_of_volume(2, 3, v)
        perm = standard_of_volume(2, 3, [v[1], v[2], v[0]])
        expected = direct.curvatures[[1, 2, 0]]
        assert np.max(np.abs(perm.curvatures - expected)) < 1e-8

    def test_realizes_target_volumes(self):
        target = np.array([0.2, 0.45, 0.35])
        params = standard_of_volume(2, 3, target)
        rep = measure_exact_s2(params, complete_graph(3))
        assert np.max(np.abs(rep.volumes - target)) < 1e-9

    def test_rejects_bad_volumes(self):
        with pytest.raises(ValueError):
            standard_of_volume(2, 3, [0.5, 0.5, 0.0])


class TestModelProfile:
    def test_single_bubble_closed_form(self):
        cfg = NewtonConfig(tol=1e-11)
        for v in (0.5, 0.25, 0.4):
            point = model_profile(2, 2, [v, 1 - v], cfg=cfg)
            assert abs(point.value - math.sqrt(v * (1 - v))) < 1e-10

    def test_equal_double_bubble_value(self):
        point = model_profile(2, 3, [1 / 3, 1 / 3, 1 / 3], cfg=NewtonConfig(tol=1e-11))
        assert abs(point.value - 0.75) < 1e-10
        assert np.max(np.abs(point.grad)) < 1e-5  # symmetry: gradient vanishes

    def test_gradient_matches_curvature(self):
        point = model_profile(2, 3, [0.5, 0.3, 0.2], fd_step_hess=2e-3,
                              cfg=NewtonConfig(tol=1e-11))
        assert gradient_vs_curvature(point) < 1e-3

    def test_symmetry_under_permutation(self):
        cfg = NewtonConfig(tol=1e-11)
        a = model_profile(2, 3, [0.5, 0.3, 0.2], cfg=cfg)
        b = model_profile(2, 3, [0.2, 0.5, 0.3], cfg=cfg)
        assert abs(a.value - b.value) < 1e-9

    def test_pde_residual_exact_backend(self):
        cfg = NewtonConfig(tol=1e-11)
        for n, q, v in ((2, 2, [0.5, 0.5]), (2, 2, [0.25, 0.75]),
                        (2, 3, [0.45, 0.3, 0.25])):
            point = model_profile(n, q, v, fd_step_grad=1e-3, fd_step_hess=2e-3,
                                  cfg=cfg)
            assert abs(pde_residual(point)) < 1e-4

    def test_fd_step_guard(self):
        with pytest.raises(ValueError):
            model_profile(2, 2, [0.02, 0.98], fd_step_hess=0.1)
