import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BACKENDS, latin_hypercube
from stochtex import backend, filters
from stochtex.kernels import KernelSpec, eval_kernel, kernel_weights_1d
from stochtex.sampling import sample_discrete
from stochtex.texture import FetchCounter, Grid3D, Image2D, LookupRequest, ewa_deterministic, filter_batch

SWEEP = (np.arange(100_000) + 0.5) / 100_000


def corner_freq(sel, base, k):
    """Frequency table (k per axis) of selected offsets from ``base``."""
    off = sel.coords - np.asarray(base)
    d = off.shape[1]
    idx = np.zeros(len(off), dtype=np.int64)
    for axis in reversed(range(d)):
        idx = idx * k + off[:, axis]
    return (np.bincount(idx, minlength=k**d) / len(off)).reshape((k,) * d)


def axis_freq(sel, base, axis, lo, k):
    off = sel.coords[:, axis] - base[axis] - lo
    return np.bincount(off, minlength=k) / len(off)


class TestBilinear:
    def test_integer_position_is_base_texel(self, impl):
        sel = filters.bilinear_batch(np.tile([3.0, 5.0], (1000, 1)), SWEEP[::100], impl)
        assert np.all(sel.coords == [3, 5])

    def test_corner_frequencies(self, impl):
        sel = filters.bilinear_batch(np.tile([2.5, 2.5], (len(SWEEP), 1)), SWEEP, impl)
        np.testing.assert_allclose(corner_freq(sel, (2, 2), 2), 0.25, atol=0.005)

    def test_expectation(self, impl, rng):
        img = Image2D(rng.random((4, 4, 3)))
        p = np.array([1.25, 1.75])
        sel = filters.bilinear_batch(np.tile(p, (len(SWEEP), 1)), SWEEP, impl)
        mean = sel.evaluate(img).mean(axis=0)
        np.testing.assert_allclose(mean, filter_batch(img, p[None], KernelSpec("tent"))[0], atol=1e-3)


class TestTrilinear:
    def test_integer_position(self, impl):
        sel = filters.trilinear_batch(np.tile([1.0, 2.0, 3.0], (500, 1)), SWEEP[::200], impl)
        assert np.all(sel.coords == [1, 2, 3])

    def test_corner_frequencies(self, impl):
        sel = filters.trilinear_batch(np.tile([0.5, 0.5, 0.5], (len(SWEEP), 1)), SWEEP, impl)
        np.testing.assert_allclose(corner_freq(sel, (0, 0, 0), 2), 0.125, atol=0.005)


class TestBicubic:
    def test_axis_frequencies_at_integer(self, impl):
        sel = filters.bicubic_bspline_batch(np.tile([4.0, 4.0], (len(SWEEP), 1)), SWEEP, impl)
        for axis in (0, 1):
            np.testing.assert_allclose(axis_freq(sel, (4, 4), axis, -1, 4), [1 / 6, 4 / 6, 1 / 6, 0], atol=0.005)

    def test_constant_image_zero_variance(self, impl, rng):
        img = Image2D(np.full((8, 8, 3), 0.42))
        sel = filters.bicubic_bspline_batch(rng.uniform(0, 7, (1000, 2)), rng.random(1000), impl)
        np.testing.assert_array_equal(sel.evaluate(img), 0.42)


class TestTricubic:
    def test_axis_frequencies_at_integer(self, impl):
        sel = filters.tricubic_bspline_batch(np.tile([4.0, 4.0, 4.0], (len(SWEEP), 1)), SWEEP, impl)
        for axis in range(3):
            np.testing.assert_allclose(axis_freq(sel, (4, 4, 4), axis, -1, 4), [1 / 6, 4 / 6, 1 / 6, 0], atol=0.005)

    def test_matches_chained_sample_discrete(self, impl):
        p = np.array([2.3, 5.6, 1.1])
        base = np.floor(p).astype(int)
        w = [np.array([v for _, v in kernel_weights_1d(KernelSpec("bspline3"), f)]) for f in p - base]
        grid = SWEEP[::4]
        ref = np.zeros((4, 4, 4))
        for xi in grid:
            ix, _, xi = sample_discrete(w[0], xi)
            iy, _, xi = sample_discrete(w[1], xi)
            iz, _, _ = sample_discrete(w[2], xi)
            ref[iz, iy, ix] += 1
        ref /= len(grid)
        sel = filters.tricubic_bspline_batch(np.tile(p, (len(grid), 1)), grid, impl)
        got = corner_freq(sel, base - 1, 4)
        assert np.max(np.abs(got - ref)) < 1e-3
        # and both match the product weights (fresh uniforms per axis)
        exact = w[2][:, None, None] * w[1][None, :, None] * w[0][None, None, :]
        assert np.max(np.abs(got - exact)) < 1e-3


class TestMitchell:
    def test_integer_position(self, impl):
        sel = filters.mitchell_positivized_batch(np.tile([3.0, 3.0], (200, 1)), SWEEP[::500], -0.5, impl)
        assert np.all(sel.coords == [3, 3])
        np.testing.assert_allclose(sel.weights, 1.0)
        assert not sel.has_negative.any()

    def test_signed_sums(self, impl):
        sel = filters.mitchell_positivized_batch(np.tile([1.5, 1.5], (1000, 1)), SWEEP[::100], -0.5, impl)
        np.testing.assert_allclose(sel.weights - sel.neg_weights, 1.0, atol=1e-6)
        np.testing.assert_allclose(sel.weights, 1.28125)
        np.testing.assert_allclose(sel.neg_weights, 0.28125)

    def test_fetch_count(self, impl, rng):
        img = Image2D(rng.random((8, 8, 1)))
        sel = filters.mitchell_positivized_batch(rng.uniform(1, 6, (500, 2)), rng.random(500), -0.5, impl)
        c = FetchCounter()
        sel.evaluate(img, c)
        assert c.count == sel.fetch_count() <= 1000

    def test_variance_below_naive_abs_weight_sampling(self):
        checker = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
        img = Image2D(checker)
        for p in ([3.5, 3.5], [3.25, 3.7], [2.9, 4.1]):
            p = np.array(p)
            base = np.floor(p).astype(int)
            wx = np.array([v for _, v in kernel_weights_1d(KernelSpec("mitchell"), p[0] - base[0])])
            wy = np.array([v for _, v in kernel_weights_1d(KernelSpec("mitchell"), p[1] - base[1])])
            w = (wy[:, None] * wx[None, :]).ravel()
            t = np.array([img.fetch(base[0] + dx, base[1] + dy)[0] for dy in range(-1, 3) for dx in range(-1, 3)])
            # naive: pick j with |w_j| / sum|w|, estimate sign(w_j) sum|w| t_j
            a = np.abs(w).sum()
            naive_var = np.sum(np.abs(w) / a * (np.sign(w) * a * t) ** 2) - (w @ t) ** 2
            sel = filters.mitchell_positivized_batch(np.tile(p, (len(SWEEP), 1)), SWEEP)
            est = sel.evaluate(img)[:, 0]
            assert abs(est.mean() - w @ t) < 1e-3
            assert np.isfinite(est.var()) and est.var() < naive_var


class TestGaussian:
    def test_tiny_sigma_is_nearest(self, impl, rng):
        st_ = rng.uniform(2, 5, (2000, 2))
        sel = filters.discrete_gaussian_batch(st_, 1e-3, rng.random(2000), impl)
        near = np.floor(st_ + 0.5).astype(int)
        assert np.mean(np.all(sel.coords == near, axis=1)) > 0.999

    def test_constant_image(self, impl, rng):
        img = Image2D(np.full((8, 8, 2), 0.25))
        sel = filters.discrete_gaussian_batch(rng.uniform(1, 6, (300, 2)), 0.5, rng.random(300), impl)
        np.testing.assert_array_equal(sel.evaluate(img), 0.25)

    def test_wide_sigma_warns(self):
        with pytest.warns(filters.TruncationWarning):
            filters.discrete_gaussian_batch(np.zeros((1, 2)), 0.9, [0.5])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            filters.discrete_gaussian_batch(np.zeros((1, 2)), 0.8, [0.5])
        with pytest.raises(ValueError):
            filters.discrete_gaussian_batch(np.zeros((1, 2)), 0.0, [0.5])

    def test_scalar_uses_normalized_uv(self):
        sel = filters.select_discrete_gaussian((0.5, 0.5), (8, 8), 1e-3, 0.3)
        assert sel.primary_coord in {(3, 3), (4, 3), (3, 4), (4, 4)}
        sel = filters.select_discrete_gaussian((3.5 / 8, 2.5 / 8), (8, 8), 1e-3, 0.7)
        assert sel.primary_coord == (3, 2)


class TestEwa:
    def test_constant_image(self, impl, rng):
        img = Image2D(np.full((32, 32, 3), 0.8))
        n = 200
        sel = filters.ewa_batch(rng.uniform(8, 24, (n, 2)), (2.0, 0.0), (0.0, 2.0), rng.random(n), impl)
        np.testing.assert_array_equal(sel.evaluate(img), 0.8)

    def test_single_fetch(self, rng):
        img = Image2D(rng.random((32, 32, 1)))
        c = FetchCounter()
        filters.select_ewa((10.2, 11.7), (3.0, 1.0), (-0.5, 2.0), 0.4).estimate(img, c)
        assert c.count == 1

    def test_degenerate_falls_back(self):
        sel = filters.select_ewa((2.25, 3.5), (0.0, 0.0), (0.0, 0.0), 0.3)
        assert sel.fallback
        assert not filters.select_ewa((2.25, 3.5), (1.0, 0.0), (0.0, 1.0), 0.3).fallback

    def test_expectation(self, impl, rng):
        img = Image2D(rng.random((32, 32, 2)))
        uv, d0, d1 = (14.3, 15.8), (2.5, 0.7), (-0.4, 1.6)
        sel = filters.ewa_batch(np.tile(uv, (len(SWEEP), 1)), d0, d1, SWEEP, impl)
        mean = sel.evaluate(img).mean(axis=0)
        np.testing.assert_allclose(mean, ewa_deterministic(img, LookupRequest(uv, d0, d1)), atol=2e-3)


class TestFis:
    def test_tent_histogram(self, rng):
        u = latin_hypercube(rng, 2, 200_000)
        sel = filters.fis_batch(np.tile([3.5, 3.0], (200_000, 1)), KernelSpec("tent"), u)
        np.testing.assert_allclose(axis_freq(sel, (3, 3), 0, 0, 2), [0.5, 0.5], atol=0.005)

    def test_gaussian_radius_zero(self):
        assert filters.fis_offset_uv((0.3, 0.6), (16, 16), KernelSpec("gaussian", sigma=0.7), [1.0, 0.2]) == (0.3, 0.6)

    def test_uniform_counts(self):
        assert filters.fis_uniforms_needed(KernelSpec("tent")) == 2
        assert filters.fis_uniforms_needed(KernelSpec("bspline3"), 3) == 9
        assert filters.fis_uniforms_needed(KernelSpec("gaussian"), 3) == 4
        with pytest.raises(ValueError):
            filters.fis_offset_uv((0.5, 0.5), (4, 4), KernelSpec("bspline3"), [0.5, 0.5])

    def test_no_sampler_for_mitchell(self):
        from stochtex.kernels import NoContinuousSamplerError

        with pytest.raises(NoContinuousSamplerError):
            filters.fis_batch(np.zeros((1, 2)), KernelSpec("mitchell"), np.zeros((2, 1)))


class TestBackends:
    @pytest.mark.skipif(backend.compiled is None, reason="compiled backend not built")
    def test_bit_identical(self, rng):
        py, cy = backend.get("python"), backend.get("cython")
        n = 20_000
        st2 = rng.uniform(-3, 40, (n, 2))
        st3 = rng.uniform(-3, 40, (n, 3))
        xi = rng.random(n)
        xi[:5] = [0.0, np.nextafter(1.0, 0.0), 0.5, 0.25, 0.75]
        for name in ("bilinear", "bicubic_bspline"):
            for a, b in zip(getattr(py, name)(st2, xi), getattr(cy, name)(st2, xi)):
                assert np.array_equal(a, b), name
        for name in ("trilinear", "tricubic_bspline"):
            for a, b in zip(getattr(py, name)(st3, xi), getattr(cy, name)(st3, xi)):
                assert np.array_equal(a, b), name
        for a, b in zip(py.mitchell_positivized(st2, xi, -0.5), cy.mitchell_positivized(st2, xi, -0.5)):
            assert np.array_equal(a, b)
        for sigma in (1e-3, 0.3, 0.5, 0.8):
            for a, b in zip(py.discrete_gaussian(st2, sigma, xi), cy.discrete_gaussian(st2, sigma, xi)):
                assert np.array_equal(a, b)
        m = 2000
        d0 = rng.normal(0, 3, (m, 2))
        d1 = rng.normal(0, 3, (m, 2))
        for a, b in zip(py.ewa(st2[:m], d0, d1, xi[:m]), cy.ewa(st2[:m], d0, d1, xi[:m])):
            assert np.array_equal(a, b)
        assert np.array_equal(py.nearest(st3), cy.nearest(st3))

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            backend.get("fortran")

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 1, exclude_max=True),
           st.sampled_from(["bilinear", "bicubic", "mitchell", "gaussian"]))
    def test_selection_within_footprint(self, x, y, xi, method):
        for impl in BACKENDS:
            sel = filters.select_batch(method, np.array([[x, y]]), [xi], sigma=0.6, impl=impl)
            base = np.floor([x, y])
            off = sel.coords[0] - base
            lo, hi = (0, 1) if method == "bilinear" else (-1, 2)
            assert np.all(off >= lo) and np.all(off <= hi)
            assert 0.0 <= sel.xi[0] < 1.0


class TestWarpInvariance:
    def test_chained_equals_fresh_uniforms(self):
        """Chained warping of one uniform reproduces independent per-axis draws."""
        p = np.array([6.3, 2.8])
        base = np.floor(p).astype(int)
        wx = np.array([v for _, v in kernel_weights_1d(KernelSpec("bspline3"), p[0] - base[0])])
        wy = np.array([v for _, v in kernel_weights_1d(KernelSpec("bspline3"), p[1] - base[1])])
        sel = filters.bicubic_bspline_batch(np.tile(p, (len(SWEEP), 1)), SWEEP)
        got = corner_freq(sel, base - 1, 4)
        assert np.max(np.abs(got - wy[:, None] * wx[None, :])) < 1e-3


class TestLod:
    def test_minor_two_texels(self):
        assert filters.continuous_lod((64, 64), (2 / 64, 0), (0, 2 / 64), 0, 10, 64) == pytest.approx(1.0)
        level, (g0, g1) = filters.stochastic_lod((64, 64), (2 / 64, 0), (0, 2 / 64), 0, 10, 64, 0.5)
        assert level == 1
        assert g0 == pytest.approx((1.0, 0.0)) and g1 == pytest.approx((0.0, 1.0))

    def test_clamped_at_zero(self):
        lv = filters.stochastic_lod_batch((64, 64), (1 / 64, 0), (0, 1 / 64), 0, 10, 64, SWEEP)
        assert np.all(lv == 0)

    def test_stochastic_rounding(self):
        m = 2**1.5 / 64
        lv = filters.stochastic_lod_batch((64, 64), (m, 0), (0, m), 0, 10, 64, SWEEP)
        f = np.bincount(lv, minlength=3) / len(lv)
        np.testing.assert_allclose(f[1:3], [0.5, 0.5], atol=0.01)

    def test_expected_level_equals_continuous(self):
        m = 2**2.3 / 64
        lv = filters.stochastic_lod_batch((64, 64), (m, 0), (0, m), 0, 10, 64, SWEEP)
        assert lv.mean() == pytest.approx(2.3, abs=1e-3)

    def test_anisotropy_clamp(self):
        minor, major = filters.lod_axes((1, 1), (100.0, 0.0), (0.0, 0.5), 64)
        assert major == 100.0 and minor == pytest.approx(100 / 64)
        minor, _ = filters.lod_axes((1, 1), (100.0, 0.0), (0.0, 0.5), 1000)
        assert minor == 0.5
        with pytest.raises(ValueError):
            filters.lod_axes((1, 1), (1, 0), (0, 1), 0.5)

    def test_level_count(self):
        assert filters.mip_level_count((1, 1)) == 1
        assert filters.mip_level_count((256, 256)) == 9
        assert filters.mip_level_count((5, 3)) == 4


class TestScreenJitter:
    def test_center(self):
        assert filters.screen_jitter((3, 7), (0.5, 0.5)) == (3.5, 7.5)

    @settings(max_examples=50)
    @given(st.integers(0, 1000), st.integers(0, 1000), st.floats(0, 1, exclude_max=True),
           st.floats(0, 1, exclude_max=True))
    def test_stays_in_pixel(self, x, y, a, b):
        sx, sy = filters.screen_jitter((x, y), (a, b))
        assert x <= sx < x + 1 and y <= sy < y + 1

    def test_mean(self, rng):
        u = rng.random((2, 100_000))
        sx, sy = filters.screen_jitter((np.full(100_000, 4), np.full(100_000, 9)), u)
        assert abs(sx.mean() - 4.5) < 0.005 and abs(sy.mean() - 9.5) < 0.005


def test_scalar_selection_counts_fetches(rng):
    img = Image2D(rng.random((8, 8, 3)))
    g = Grid3D(rng.random((8, 8, 8)))
    c = FetchCounter()
    for sel, tex in ((filters.select_bilinear((2.3, 4.1), 0.2), img),
                     (filters.select_bicubic_bspline((2.3, 4.1), 0.6), img),
                     (filters.select_trilinear((2.3, 4.1, 3.3), 0.9), g),
                     (filters.select_tricubic_bspline((2.3, 4.1, 3.3), 0.1), g)):
        before = c.count
        sel.estimate(tex, c)
        assert c.count - before == 1
    sel = filters.select_bicubic_mitchell_positivized((2.5, 4.5), 0.3)
    before = c.count
    sel.estimate(img, c)
    assert c.count - before == sel.fetches <= 2


def test_uv_to_texel():
    assert filters.uv_to_texel((0.0, 0.0), (4, 4)) == (0, 0)
    assert filters.uv_to_texel((0.99, 0.51), (4, 4)) == (3, 2)
