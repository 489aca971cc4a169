"""Array response math: defining formulas, closed forms and densities."""

import numpy as np
import pytest

from beamalign import (
    AngleGrid,
    ArrayConfig,
    beam_gain,
    cn_density,
    cn_log_density,
    grid_gains,
    steering_matrix,
    steering_vector,
)


class TestAngleGrid:
    def test_point_formula_and_count(self):
        grid = AngleGrid(-1.0, 1.0, 8)
        assert grid.points.shape == (8,)
        expected = -1.0 + np.arange(8) * (2.0 / 8)
        np.testing.assert_allclose(grid.points, expected, rtol=0, atol=0)

    def test_points_strictly_increasing_within_bounds(self):
        grid = AngleGrid(-np.pi / 3, np.pi / 3, 128)
        assert np.all(np.diff(grid.points) > 0)
        assert grid.points[0] >= grid.theta_min
        assert grid.points[-1] <= grid.theta_max

    def test_constant_spacing(self):
        grid = AngleGrid(-np.pi / 3, np.pi / 3, 128)
        d = np.diff(grid.points)
        assert np.all(np.abs(d - grid.spacing) <= 1e-12 * grid.spacing)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            AngleGrid(1.0, -1.0, 8)
        with pytest.raises(ValueError):
            AngleGrid(-1.0, 1.0, 0)

    def test_nearest_index(self):
        grid = AngleGrid(-1.0, 1.0, 8)
        assert grid.nearest_index(grid.points[5]) == 5
        assert grid.nearest_index(grid.points[5] + 0.4 * grid.spacing) == 5


class TestSteeringVector:
    def test_boresight_is_all_ones(self):
        a = steering_vector(ArrayConfig(4, 0.5), 0.0)
        np.testing.assert_allclose(a, np.ones(4), atol=1e-15)

    def test_endfire_two_elements(self):
        a = steering_vector(ArrayConfig(2, 0.5), np.pi / 2)
        np.testing.assert_allclose(a, [1.0, -1.0], atol=1e-12)

    def test_matches_scalar_loop(self):
        # independent elementwise evaluation of the defining formula
        cfg = ArrayConfig(64, 0.5)
        phi = 0.3
        a = steering_vector(cfg, phi)
        import cmath

        for n in range(64):
            expected = cmath.exp(1j * n * 2 * cmath.pi * 0.5 * cmath.sin(phi))
            assert abs(a[n] - expected) < 1e-12

    def test_first_element_one_and_unit_modulus(self):
        rng = np.random.default_rng(7)
        cfg = ArrayConfig(16, 0.37)
        for phi in rng.uniform(-np.pi / 2, np.pi / 2, size=25):
            a = steering_vector(cfg, phi)
            assert a[0] == 1.0 + 0.0j
            np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)

    def test_steering_matrix_columns(self):
        cfg = ArrayConfig(8, 0.5)
        grid = AngleGrid(-1.0, 1.0, 4)
        mat = steering_matrix(cfg, grid)
        for i in range(4):
            np.testing.assert_allclose(mat[:, i], steering_vector(cfg, grid.points[i]))


class TestBeamGain:
    def test_matched_filter(self):
        cfg = ArrayConfig(16, 0.5)
        phi = 0.21
        w = steering_vector(cfg, phi) / np.sqrt(16)
        g = beam_gain(w, cfg, phi, sqrt_power=2.0)
        assert abs(g - 2.0 * np.sqrt(16)) < 1e-12
        assert abs(g.imag) < 1e-12

    def test_orthogonal_vector_gives_zero(self):
        cfg = ArrayConfig(4, 0.5)
        a = steering_vector(cfg, 0.35)
        w = np.zeros(4, complex)
        w[0], w[1] = a[1], -a[0]  # orthogonal by construction
        w /= np.linalg.norm(w)
        assert abs(beam_gain(w, cfg, 0.35)) < 1e-12

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            beam_gain(np.ones(3), ArrayConfig(4, 0.5), 0.0)

    def test_conjugate_linear_in_w(self):
        rng = np.random.default_rng(3)
        cfg = ArrayConfig(8, 0.5)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        for c in (2.0, 1j, 0.3 - 0.8j):
            lhs = beam_gain(c * w, cfg, 0.4)
            rhs = np.conj(c) * beam_gain(w, cfg, 0.4)
            assert abs(lhs - rhs) <= 1e-12 * abs(rhs)

    def test_grid_gains_match_scalar(self):
        rng = np.random.default_rng(11)
        cfg = ArrayConfig(8, 0.5)
        grid = AngleGrid(-1.0, 1.0, 16)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        g = grid_gains(w, cfg, grid, sqrt_power=1.7)
        for i in (0, 5, 15):
            assert abs(g[i] - beam_gain(w, cfg, grid.points[i], 1.7)) < 1e-12


class TestCNDensity:
    def test_standard_at_origin(self):
        assert abs(cn_density(0j, 0j, 1.0) - 1.0 / np.pi) < 1e-15

    def test_peak_value(self):
        for v in (0.25, 1.0, 7.0):
            assert abs(cn_density(2 - 1j, 2 - 1j, v) - 1.0 / (np.pi * v)) < 1e-15

    def test_quadrature_integrates_to_one(self):
        # midpoint rule over +-6 sqrt(v) on a 200 x 200 grid
        v = 0.7
        mean = 0.4 - 0.2j
        half = 6.0 * np.sqrt(v)
        edges = np.linspace(-half, half, 201)
        centers = (edges[:-1] + edges[1:]) / 2.0
        cell = (edges[1] - edges[0]) ** 2
        re, im = np.meshgrid(centers + mean.real, centers + mean.imag)
        total = cn_density(re + 1j * im, mean, v).sum() * cell
        assert abs(total - 1.0) < 1e-3

    def test_invalid_variance(self):
        with pytest.raises(ValueError):
            cn_density(0j, 0j, 0.0)
        with pytest.raises(ValueError):
            cn_density(0j, 0j, -1.0)
        with pytest.raises(ValueError):
            cn_log_density(0j, 0j, 0.0)

    def test_depends_only_on_distance(self):
        rng = np.random.default_rng(5)
        y, mean, v = 1.3 - 0.4j, -0.2 + 0.9j, 1.8
        base = cn_density(y, mean, v)
        for _ in range(20):
            rot = np.exp(1j * rng.uniform(0, 2 * np.pi))
            shifted = cn_density(mean + rot * (y - mean), mean, v)
            assert abs(shifted - base) < 1e-14

    def test_log_density_consistent(self):
        y, mean, v = 0.3 + 0.1j, -0.5j, 0.4
        assert abs(np.exp(cn_log_density(y, mean, v)) - cn_density(y, mean, v)) < 1e-15
