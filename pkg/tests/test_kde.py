import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from batchuni.kde import KdeConfig, batch_normalize, kde_density, kde_weights

batches = arrays(
    np.float64,
    st.tuples(st.integers(1, 25), st.integers(1, 4)),
    elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False),
)


class TestBatchNormalize:
    def test_two_points(self):
        z, mean, std = batch_normalize([[0.0], [2.0]])
        np.testing.assert_allclose(z.ravel(), [-1.0, 1.0])
        assert mean[0] == 1.0 and std[0] == 1.0

    def test_idempotent(self):
        x = np.random.default_rng(0).normal(size=(50, 3))
        z = batch_normalize(x)[0]
        np.testing.assert_allclose(batch_normalize(z)[0], z, atol=1e-12)

    def test_constant_dimension(self):
        z = batch_normalize([[5.0, 1.0], [5.0, 3.0]])[0]
        np.testing.assert_array_equal(z[:, 0], [0.0, 0.0])
        np.testing.assert_allclose(z[:, 1], [-1.0, 1.0])

    def test_too_small(self):
        with pytest.raises(ValueError):
            batch_normalize([[1.0, 2.0]])


class TestDensity:
    def test_single_sample(self):
        assert kde_density([[3.0, -1.0]], 2.0)[0] == 1.0

    def test_identical_samples(self):
        np.testing.assert_array_equal(kde_density([[0.3, 0.7]] * 2, 5.0), [1.0, 1.0])

    def test_half_kernel_distance(self):
        sigma = 4.0
        d = math.sqrt(math.log(2) / sigma)
        np.testing.assert_allclose(kde_density([[0.0], [d]], sigma), [0.75, 0.75], rtol=1e-12)

    def test_matches_direct_double_sum(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(12, 3))
        direct = [np.mean([math.exp(-0.7 * np.sum((a - b) ** 2)) for b in x]) for a in x]
        np.testing.assert_allclose(kde_density(x, 0.7), direct, rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(batches, st.floats(0.01, 10))
    def test_bounds(self, x, sigma):
        k = kde_density(x, sigma)
        assert np.all(k >= 1 / len(x) - 1e-15) and np.all(k <= 1 + 1e-15)

    @settings(max_examples=100, deadline=None)
    @given(batches, st.randoms(use_true_random=False))
    def test_permutation_equivariant(self, x, rnd):
        perm = list(range(len(x)))
        rnd.shuffle(perm)
        np.testing.assert_allclose(kde_density(x[perm], 1.3), kde_density(x, 1.3)[perm], rtol=1e-12, atol=1e-15)


class TestWeights:
    def test_uniform_spacing(self):
        # points on a circle: every sample sees the same neighbourhood
        t = 2 * np.pi * np.arange(8) / 8
        x = np.column_stack([np.cos(t), np.sin(t)])
        w = kde_weights(x, KdeConfig(1.0)).weights
        np.testing.assert_allclose(w, w[0], rtol=1e-12)
        k = kde_density(x, 1.0)[0]
        assert w[0] == pytest.approx(1 / (k + 1e-6))

    def test_single(self):
        assert kde_weights([[1.0]], KdeConfig(1.0, 1e-6)).weights[0] == pytest.approx(1 / (1 + 1e-6))

    def test_isolated_sample(self):
        wv = kde_weights([[0.0], [0.0], [10.0]], KdeConfig(1.0, 1e-6))
        np.testing.assert_allclose(wv.densities, [2 / 3, 2 / 3, 1 / 3], rtol=1e-12)
        w = wv.weights
        assert w[0] == w[1] and w[2] > w[0]

    def test_identical_exactly_uniform(self):
        x = np.tile([[0.1, 0.2, 0.3]], (7, 1))
        w = kde_weights(x, KdeConfig(4.0)).weights
        assert np.all(w == w[0])

    def test_normalize_flag(self):
        x = np.random.default_rng(1).normal(size=(30, 2)) * [1.0, 100.0]
        on = kde_weights(x, KdeConfig(0.5, normalize_batch=True)).weights
        expected = 1 / (kde_density(batch_normalize(x)[0], 0.5) + 1e-6)
        np.testing.assert_allclose(on, expected, rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(batches, st.floats(1.01, 5))
    def test_moving_away_does_not_decrease_weight(self, x, scale):
        cfg = KdeConfig(0.8)
        before = kde_weights(x, cfg).weights[0]
        y = x.copy()
        # push sample 0 radially away from all others' centroid by enlarging
        # every distance to it: scale the whole batch about sample 1 and move
        # sample 0 further out along its own offset
        if len(x) < 2:
            return
        y[0] = x[0] + (scale - 1) * (x[0] - x[1:].mean(axis=0)) + (scale - 1) * 10
        d_before = np.sum((x[1:] - x[0]) ** 2, axis=1)
        d_after = np.sum((y[1:] - y[0]) ** 2, axis=1)
        if np.all(d_after >= d_before):
            assert kde_weights(y, cfg).weights[0] >= before

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KdeConfig(0.0)
        with pytest.raises(ValueError):
            KdeConfig(1.0, weight_floor=0.0)
