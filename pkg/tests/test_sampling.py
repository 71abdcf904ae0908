import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochtex.sampling import (
    ONE_MINUS_EPSILON,
    DegenerateWeightsError,
    NoiseSource,
    RngStream,
    hash_uniform,
    positivized_pair,
    reservoir_sample,
    reuse_uniform,
    sample_discrete,
)

GRID = (np.arange(100_000) + 0.5) / 100_000


def frequencies(fn, n_items, grid=GRID):
    counts = np.zeros(n_items)
    for xi in grid:
        counts[fn(xi)] += 1
    return counts / len(grid)


class TestReuseUniform:
    def test_taken_branch_rescales(self):
        assert reuse_uniform(0.25, 0.5) == (True, 0.5)

    def test_rejected_branch_rescales(self):
        assert reuse_uniform(0.75, 0.5) == (False, 0.5)

    def test_certain_branch_keeps_xi(self):
        assert reuse_uniform(0.3, 1.0) == (True, 0.3)

    def test_output_stays_below_one(self):
        taken, xi = reuse_uniform(ONE_MINUS_EPSILON, 0.3)
        assert not taken and xi < 1.0
        taken, xi = reuse_uniform(math.nextafter(0.5, 0.0), 0.5)
        assert taken and xi < 1.0

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            reuse_uniform(0.5, 1.5)

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.77])
    def test_warped_values_are_uniform(self, p):
        xs = (np.arange(1_000_000) + 0.5) / 1_000_000
        taken = xs < p
        warped = np.sort(np.where(taken, xs / p, (xs - p) / (1 - p)))
        # KS statistic of the pooled warped values (both branches)
        ks = np.max(np.abs(warped - (np.arange(len(warped)) + 0.5) / len(warped)))
        assert ks < 0.01
        scalar = [reuse_uniform(x, p)[1] for x in xs[::997]]
        np.testing.assert_allclose(scalar, np.where(xs[::997] < p, xs[::997] / p, (xs[::997] - p) / (1 - p)),
                                   rtol=1e-15)


class TestSampleDiscrete:
    def test_uniform_quarters(self):
        j, pdf, _ = sample_discrete([1, 1, 1, 1], 0.6)
        assert (j, pdf) == (2, 0.25)

    def test_single_nonzero(self):
        j, pdf, _ = sample_discrete([0, 2, 0], 0.9)
        assert (j, pdf) == (1, 1.0)

    def test_frequency(self):
        f = frequencies(lambda x: sample_discrete([1, 3], x)[0], 2)
        assert abs(f[1] - 0.75) < 0.005

    @pytest.mark.parametrize("w", [[], [0, 0], [1, -1], [1, math.nan], [math.inf]])
    def test_degenerate(self, w):
        with pytest.raises(DegenerateWeightsError):
            sample_discrete(w, 0.5)

    def test_xi_near_one_picks_last_nonzero(self):
        assert sample_discrete([1, 1, 0], ONE_MINUS_EPSILON)[0] == 1


class TestReservoir:
    def test_single_item(self):
        j, total, _ = reservoir_sample([5], 0.7)
        assert (j, total) == (0, 5.0)

    def test_two_equal(self):
        f = frequencies(lambda x: reservoir_sample([1, 1], x)[0], 2)
        np.testing.assert_allclose(f, [0.5, 0.5], atol=0.005)

    def test_matches_sample_discrete(self):
        w = [1, 2, 1]
        f1 = frequencies(lambda x: reservoir_sample(w, x)[0], 3)
        f2 = frequencies(lambda x: sample_discrete(w, x)[0], 3)
        np.testing.assert_allclose(f1, [0.25, 0.5, 0.25], atol=0.005)
        np.testing.assert_allclose(f1, f2, atol=1e-3)

    def test_all_zero(self):
        with pytest.raises(DegenerateWeightsError):
            reservoir_sample([0, 0, 0], 0.5)

    def test_negative(self):
        with pytest.raises(DegenerateWeightsError):
            reservoir_sample([1, -1], 0.5)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=6).filter(lambda w: sum(w) > 1e-3))
    def test_distribution_equals_sample_discrete(self, w):
        grid = (np.arange(20_000) + 0.5) / 20_000
        f1 = frequencies(lambda x: reservoir_sample(w, x)[0], len(w), grid)
        f2 = frequencies(lambda x: sample_discrete(w, x)[0], len(w), grid)
        expect = np.asarray(w) / sum(w)
        # both are step functions of xi: off by at most one grid cell per breakpoint
        assert np.max(np.abs(f1 - expect)) < 2 * len(w) / len(grid) + 1e-12
        assert np.max(np.abs(f1 - f2)) < 4 * len(w) / len(grid) + 1e-12


class TestPositivized:
    def test_all_positive(self):
        pos, neg, _ = positivized_pair([0.2, 0.8], 0.3)
        assert neg is None
        assert pos.weight_sum == pytest.approx(1.0)

    def test_mitchell_half_texel(self):
        w = [-0.0625, 0.5625, 0.5625, -0.0625]
        counts = np.zeros(4)
        for xi in GRID[::5]:
            pos, neg, _ = positivized_pair(w, xi)
            assert pos.weight_sum == pytest.approx(1.125)
            assert neg.weight_sum == pytest.approx(0.125)
            counts[neg.index] += 1
        f = counts / counts.sum()
        np.testing.assert_allclose(f[[0, 3]], [0.5, 0.5], atol=0.01)

    def test_expectation_matches_signed_sum(self, rng):
        w = np.array([-0.0625, 0.5625, 0.5625, -0.0625])
        t = np.array([1.0, 2.0, 3.0, 4.0])
        xs = rng.random(200_000)
        est = np.empty(len(xs))
        for i, xi in enumerate(xs):
            pos, neg, _ = positivized_pair(w, xi)
            est[i] = pos.weight_sum * t[pos.index] - neg.weight_sum * t[neg.index]
        se = est.std() / math.sqrt(len(est))
        assert abs(est.mean() - w @ t) < 3 * se

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.floats(-2, 2).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=5),
           st.integers(0, 2**32 - 1))
    def test_expectation_property(self, w, seed):
        w = np.asarray(w)
        t = np.random.default_rng(seed).random(len(w))
        # exact expectation from the selection probabilities on a fine xi grid
        grid = (np.arange(4000) + 0.5) / 4000
        est = []
        for xi in grid:
            pos, neg, _ = positivized_pair(w, xi)
            v = 0.0
            if pos is not None:
                v += pos.weight_sum * t[pos.index]
            if neg is not None:
                v -= neg.weight_sum * t[neg.index]
            est.append(v)
        est = np.asarray(est)
        se = est.std() / math.sqrt(len(est))
        assert abs(est.mean() - w @ t) <= 3 * se + 1e-9

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegenerateWeightsError):
            positivized_pair([0.0, 0.0], 0.5)


class TestStreams:
    def test_replay_is_bit_identical(self):
        a = RngStream(42).uniforms(np.arange(100), 3, 7, 2)
        b = RngStream(42).uniforms(np.arange(100), 3, 7, 2)
        assert np.array_equal(a, b)

    def test_seed_and_dims_decorrelate(self):
        a = RngStream(1).uniforms(np.arange(1000), 0, 0, 0)
        b = RngStream(2).uniforms(np.arange(1000), 0, 0, 0)
        c = RngStream(1).uniforms(np.arange(1000), 0, 0, 1)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, c)[0, 1]) < 0.1

    def test_range_and_moments(self):
        u = hash_uniform(7, np.arange(200_000), 5, 3, 1)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005
        assert abs(u.var() - 1 / 12) < 0.002

    def test_scalar_matches_batch(self):
        s = RngStream(9)
        assert s.uniform(3, 4, 5, 6) == s.uniforms(np.array([3]), 4, 5, 6)[0]


class TestNoiseSource:
    def test_white_matches_stream(self):
        n = NoiseSource("white", 5)
        assert np.array_equal(n.uniforms(np.arange(10), 2, 3, 4), RngStream(5).uniforms(np.arange(10), 2, 3, 4))

    def test_mask_tiles_and_frames(self):
        masks = [np.full((4, 4), 0.25), np.full((4, 4), 0.75)]
        n = NoiseSource("mask", masks=masks)
        assert np.all(n.uniforms(np.arange(9), np.arange(9), 0, 0) == 0.25)
        assert np.all(n.uniforms(np.arange(9), 1, 3, 5) == 0.75)

    def test_dim_zero_reads_mask_directly(self):
        m = np.arange(16, dtype=float).reshape(4, 4) / 16
        n = NoiseSource("mask", masks=[m])
        assert n.uniforms(np.array([2]), np.array([1]), 0, 0)[0] == m[1, 2]
        # other dimensions read shifted texels
        assert n.uniforms(np.array([2]), np.array([1]), 0, 3)[0] in m

    def test_from_directory(self, tmp_path):
        from stochtex.imageio import save_pfm
        from stochtex.texture import Image2D

        for i in range(2):
            save_pfm(tmp_path / f"mask_{i}.pfm", Image2D(np.full((8, 8, 1), 0.125 * (i + 1))))
        n = NoiseSource.from_directory(tmp_path)
        assert n.masks.shape == (2, 8, 8)
        with pytest.raises(FileNotFoundError):
            NoiseSource.from_directory(tmp_path / "missing")

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSource("pink")
        with pytest.raises(ValueError):
            NoiseSource("mask", masks=[np.ones((2, 2))])
