"""Tree-ensemble prior, moves, backfitting and serialization."""

import numpy as np
import pytest

from qpanel.trees import (
    Forest,
    depth_split_probability,
    draw_prior_tree,
    leaf_prior_scale,
)


def _sine_data(n, rng):
    x = np.column_stack([rng.uniform(0, 1, n), rng.uniform(0, 1, n)])
    f = np.sin(4 * x[:, 0]) + (x[:, 1] > 0.5)
    return x, f


class TestPrior:
    def test_depth_split_probability(self):
        assert depth_split_probability(0, 0.95, 2.0) == pytest.approx(0.95)
        assert depth_split_probability(1, 0.95, 2.0) == pytest.approx(0.95 / 4.0)
        assert depth_split_probability(3, 0.5, 1.0) == pytest.approx(0.125)

    def test_leaf_prior_scale(self):
        # (y_max - y_min) / (2 * gamma * sqrt(S))
        assert leaf_prior_scale(-1.0, 3.0, 2.0, 25) == pytest.approx(4.0 / (4.0 * 5.0))

    def test_prior_tree_root_split_rate(self):
        rng = np.random.default_rng(0)
        splits = [np.array([0.2, 0.5, 0.8])]
        grew = sum(
            draw_prior_tree(rng, 1, splits, 0.6, 2.0).root.feature >= 0
            for _ in range(20000)
        )
        assert grew / 20000 == pytest.approx(0.6, abs=0.02)

    def test_prior_tree_depth_zero_when_alpha_zero(self):
        rng = np.random.default_rng(1)
        splits = [np.array([0.5])]
        for _ in range(50):
            tree = draw_prior_tree(rng, 1, splits, 0.0, 2.0)
            assert tree.n_leaves() == 1


class TestForestMechanics:
    def test_total_fit_matches_predict_on_training_points(self):
        rng = np.random.default_rng(2)
        x, f = _sine_data(120, rng)
        y = f + 0.1 * rng.standard_normal(120)
        forest = Forest(x, y.min(), y.max(), n_trees=10)
        for _ in range(30):
            forest.backfit_sweep(y, np.full(120, 0.01), rng)
        np.testing.assert_allclose(forest.total_fit(), forest.predict(x), atol=1e-10)

    def test_split_values_exclude_feature_max(self):
        x = np.array([[0.1], [0.5], [0.9], [0.9]])
        forest = Forest(x, 0.0, 1.0, n_trees=1)
        np.testing.assert_allclose(np.sort(forest.split_values[0]), [0.1, 0.5])

    def test_backfit_recovers_step_function(self):
        rng = np.random.default_rng(3)
        n = 400
        x = rng.uniform(0, 1, (n, 1))
        f = np.where(x[:, 0] > 0.5, 2.0, -2.0)
        y = f + 0.2 * rng.standard_normal(n)
        forest = Forest(x, y.min(), y.max(), n_trees=20)
        fits = []
        for s in range(300):
            forest.backfit_sweep(y, np.full(n, 0.04), rng)
            if s >= 150:
                fits.append(forest.total_fit().copy())
        post_mean = np.mean(fits, axis=0)
        rmse = np.sqrt(np.mean((post_mean - f) ** 2))
        assert rmse < 0.25

    def test_heteroskedastic_weights_downweight_noisy_half(self):
        # a noisier right half should not drag the fit away from the truth
        rng = np.random.default_rng(4)
        n = 600
        x = np.linspace(0, 1, n)[:, None]
        f = np.where(x[:, 0] > 0.5, 1.0, -1.0)
        s2 = np.where(x[:, 0] > 0.5, 4.0, 0.01)
        y = f + np.sqrt(s2) * rng.standard_normal(n)
        forest = Forest(x, y.min(), y.max(), n_trees=20)
        fits = []
        for s in range(300):
            forest.backfit_sweep(y, s2, rng)
            if s >= 150:
                fits.append(forest.total_fit().copy())
        post_mean = np.mean(fits, axis=0)
        left = post_mean[x[:, 0] < 0.45]
        assert np.abs(left + 1.0).mean() < 0.15

    def test_serialization_roundtrip(self):
        rng = np.random.default_rng(5)
        x, f = _sine_data(150, rng)
        y = f + 0.1 * rng.standard_normal(150)
        forest = Forest(x, y.min(), y.max(), n_trees=8)
        for _ in range(50):
            forest.backfit_sweep(y, np.full(150, 0.02), rng)
        packed = forest.to_arrays()
        clone = Forest.from_arrays(packed)
        x_new = rng.uniform(0, 1, (40, 2))
        np.testing.assert_allclose(clone.predict(x_new), forest.predict(x_new))

    def test_single_point_feature_never_splits(self):
        # one unique value per feature leaves nothing to split on
        rng = np.random.default_rng(6)
        x = np.ones((30, 2))
        y = rng.standard_normal(30)
        forest = Forest(x, y.min(), y.max(), n_trees=5)
        for _ in range(50):
            forest.backfit_sweep(y, np.ones(30), rng)
        assert all(t.n_leaves() == 1 for t in forest.trees)


class TestConjugateLeaves:
    def test_pure_noise_keeps_fit_small(self):
        # with zero signal the posterior fit should hover near zero
        rng = np.random.default_rng(7)
        n = 200
        x = rng.uniform(0, 1, (n, 1))
        y = rng.standard_normal(n)
        forest = Forest(x, y.min(), y.max(), n_trees=10)
        fits = []
        for s in range(200):
            forest.backfit_sweep(y, np.ones(n), rng)
            if s >= 100:
                fits.append(forest.total_fit().copy())
        assert np.abs(np.mean(fits, axis=0)).mean() < 0.35
