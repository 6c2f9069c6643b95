"""Deterministic toy datasets and the two-basin ablation benchmark."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from basis_sep.priors import GmmPrior
from basis_sep.sampler import ComponentSet, posterior_log_density
from basis_sep.toys import (
    TwoBasinBenchmark,
    toy_color_images,
    toy_gmm_2d,
    toy_images,
    toy_line_images,
    two_basin_benchmark,
)


class TestToyImages:
    def test_shape_count_and_range(self):
        images = toy_images(5, shape=(1, 4, 4), seed=3, low=0.2, high=0.8)
        assert len(images) == 5
        for img in images:
            assert img.shape == (1, 4, 4)
            assert img.data.min() >= 0.2 and img.data.max() <= 0.8

    def test_deterministic_per_seed(self):
        a = toy_images(4, seed=11)
        b = toy_images(4, seed=11)
        c = toy_images(4, seed=12)
        for x, y in zip(a, b):
            assert_array_equal(x.data, y.data)
        assert np.any(a[0].data != c[0].data)

    def test_default_images_are_well_separated(self):
        images = toy_images()
        rows = np.stack([img.data for img in images])
        dists = np.linalg.norm(rows[:, None, :] - rows[None, :, :], axis=2)
        np.fill_diagonal(dists, np.inf)
        assert dists.min() > 2.0

    def test_validation(self):
        with pytest.raises(ValueError, match="count"):
            toy_images(0)
        with pytest.raises(ValueError, match="low"):
            toy_images(3, low=0.9, high=0.1)

    def test_color_variant(self):
        images = toy_color_images(3)
        assert images[0].shape == (3, 8, 8)
        with pytest.raises(ValueError, match="3, h, w"):
            toy_color_images(3, shape=(1, 8, 8))


class TestToyLineImages:
    def test_adjacent_spacing_is_exact(self):
        images = toy_line_images(6, spacing=0.12)
        rows = np.stack([img.data for img in images])
        for i in range(5):
            assert np.linalg.norm(rows[i + 1] - rows[i]) == pytest.approx(
                0.12, rel=1e-12
            )

    def test_middle_image_of_odd_count_is_flat_half(self):
        images = toy_line_images(5, spacing=0.1)
        assert_allclose(images[2].data, 0.5, rtol=0, atol=1e-15)

    def test_equal_mixtures_collide_by_index_sum(self):
        """(i, j) and (i', j') with i + j == i' + j' give the same equal mixture."""
        images = toy_line_images(8, spacing=0.1)
        rows = np.stack([img.data for img in images])
        m_03 = 0.5 * (rows[0] + rows[3])
        m_12 = 0.5 * (rows[1] + rows[2])
        assert_allclose(m_03, m_12, atol=1e-15)
        m_07 = 0.5 * (rows[0] + rows[7])
        m_34 = 0.5 * (rows[3] + rows[4])
        assert_allclose(m_07, m_34, atol=1e-15)
        # different index sums do not collide
        assert np.linalg.norm(0.5 * (rows[0] + rows[1]) - m_03) > 0.01

    def test_values_stay_in_unit_range(self):
        images = toy_line_images(10, spacing=0.15)
        rows = np.stack([img.data for img in images])
        assert rows.min() >= 0.0 and rows.max() <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 2"):
            toy_line_images(1)
        with pytest.raises(ValueError, match="spacing"):
            toy_line_images(4, spacing=0.0)
        with pytest.raises(ValueError, match="unit range"):
            toy_line_images(40, spacing=0.15)
        with pytest.raises(ValueError, match="channels"):
            toy_line_images(4, shape=(8, 8))


class TestToyGmm2d:
    def test_is_fixed_three_cluster_mixture(self):
        prior = toy_gmm_2d()
        assert isinstance(prior, GmmPrior)
        assert prior.shape == (2,)
        assert prior.weights.shape == (3,)
        assert prior.weights.sum() == pytest.approx(1.0)
        assert prior.has_log_density and prior.has_sampling

    def test_samples_cluster_near_means(self):
        prior = toy_gmm_2d()
        pts = prior.sample(0.0, 3000, np.random.default_rng(0))
        dists = np.linalg.norm(pts[:, None, :] - prior.means[None], axis=2)
        assert np.mean(dists.min(axis=1) < 0.3) > 0.99


class TestTwoBasinBenchmark:
    def test_fixed_structure(self):
        bench = two_basin_benchmark()
        assert isinstance(bench, TwoBasinBenchmark)
        assert bench.operator.k == 2
        assert_allclose(bench.operator.alpha, [0.5, 0.5])
        assert bench.mixture.data[0] == 0.5
        assert_allclose(bench.prior.means.ravel(), [0.0, 0.55, 1.0])
        assert bench.prior.weights[1] < bench.prior.weights[0]

    def test_initial_state_is_seeded_and_inside_square(self):
        bench = two_basin_benchmark()
        a = bench.initial_state(3)
        b = bench.initial_state(3)
        c = bench.initial_state(4)
        assert a.components.shape == (2, 1)
        assert_array_equal(a.components, b.components)
        assert np.any(a.components != c.components)
        for seed in range(20):
            comps = bench.initial_state(seed).components
            assert comps.min() >= bench.init_low
            assert comps.max() <= bench.init_high

    def test_basin_ordering_under_posterior_density(self):
        """Exact pair beats the decoy, which beats the initialization trap."""
        bench = two_basin_benchmark()
        sigma, gamma2 = 0.01, 1e-4

        def density(a, b):
            comps = ComponentSet(np.array([[a], [b]]), (1,))
            return posterior_log_density(bench.prior, bench.operator,
                                         bench.mixture, comps, sigma, gamma2)

        exact = density(0.0, 1.0)
        decoy = density(0.55, 0.55)
        trap = density(0.0, 0.0)
        assert exact > decoy + 5
        assert decoy > trap + 100
