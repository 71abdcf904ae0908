import math

import numpy as np
import pytest

from conftest import latin_hypercube
from stochtex import shading
from stochtex.kernels import KernelSpec
from stochtex.shading import (
    BrdfParams,
    FisFilter,
    MaterialBindings,
    ShadingContext,
    decode_normal,
    emission_filter_after_exhaustive,
    emission_filter_after_stochastic,
    emission_filter_before,
    filter_parameters,
    planck_emission,
    radiance_filter_after_exhaustive,
    radiance_filter_after_stochastic,
    radiance_filter_before,
    radiance_split_filter,
    shade,
    triplanar,
    triplanar_weights,
)
from stochtex.texture import FetchCounter, Grid3D, Image2D

N = np.array([0.0, 0.0, 1.0])
T = np.array([1.0, 0.0, 0.0])
B = np.array([0.0, 1.0, 0.0])
WO = np.array([0.3, -0.2, 1.0]) / math.sqrt(1.13)
L = np.array([-0.4, 0.5, 1.0]) / math.sqrt(1.41)
TENT = KernelSpec("tent")


def ctx(uv, wo=WO, light=L, **kw):
    return ShadingContext(np.zeros(3), N, T, B, wo, light, np.ones(3), np.asarray(uv, dtype=float), **kw)


def ggx_oracle(n, l, v, albedo, rough, metal, radiance=1.0):
    """Scalar reference: Lambert + GGX / Smith / Schlick."""
    ndl = float(np.dot(n, l))
    if ndl <= 0:
        return np.zeros(3)
    ndv = max(float(np.dot(n, v)), 1e-6)
    h = (l + v) / np.linalg.norm(l + v)
    ndh = max(float(np.dot(n, h)), 0.0)
    vdh = min(max(float(np.dot(v, h)), 0.0), 1.0)
    a = max(rough, 0.01) ** 2
    a2 = a * a
    d = a2 / (math.pi * (ndh * ndh * (a2 - 1) + 1) ** 2)

    def g1(x):
        return 2 * x / (x + math.sqrt(a2 + (1 - a2) * x * x))

    out = []
    for c in range(3):
        f0 = 0.04 * (1 - metal) + albedo[c] * metal
        f = f0 + (1 - f0) * (1 - vdh) ** 5
        spec = d * g1(ndl) * g1(ndv) * f / max(4 * ndl * ndv, 1e-6)
        out.append(((1 - metal) * albedo[c] / math.pi + spec) * ndl * radiance)
    return np.array(out)


class TestShade:
    def test_back_facing_is_black(self):
        c = ctx((0, 0), light=np.array([0.0, 0.6, -0.8]))
        np.testing.assert_array_equal(shade(c, BrdfParams(np.ones(3), 0.5, 0.0)), 0.0)

    def test_lambert(self):
        c = ctx((0, 0), wo=N, light=N)
        out = shade(c, BrdfParams(np.array([0.2, 0.5, 0.8]), 1.0, 0.0), specular=False)
        np.testing.assert_allclose(out, np.array([0.2, 0.5, 0.8]) / math.pi)

    def test_metalness_changes_f0(self):
        c = ctx((0, 0))
        a = shade(c, BrdfParams(np.array([0.9, 0.6, 0.2]), 0.3, 0.0))
        b = shade(c, BrdfParams(np.array([0.9, 0.6, 0.2]), 0.3, 1.0))
        assert np.all(np.abs(a - b) > 1e-3)

    def test_matches_scalar_oracle(self, rng):
        for _ in range(50):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            l = rng.normal(size=3)
            l /= np.linalg.norm(l)
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            alb, r, m = rng.random(3), rng.random(), rng.random()
            c = ShadingContext(np.zeros(3), n, T, B, v, l)
            got = shade(c, BrdfParams(alb, r, m))
            np.testing.assert_allclose(got, ggx_oracle(n, l, v, alb, r, m), rtol=1e-10, atol=1e-14)

    def test_context_validation(self):
        ctx((0, 0)).validate()
        with pytest.raises(ValueError):
            ShadingContext(np.zeros(3), np.array([0.0, 0.0, 2.0]), T, B, WO, L).validate()
        with pytest.raises(ValueError):
            ShadingContext(np.zeros(3), N, np.array([0.0, 0.6, 0.8]), B, WO, L).validate()


class TestPlanck:
    def test_zero(self):
        np.testing.assert_array_equal(planck_emission(0.0), 0.0)

    def test_monotone(self):
        t = np.linspace(500, 12000, 200)
        e = planck_emission(t)
        assert np.all(np.diff(e, axis=0) > 0)

    def test_reference_normalization(self):
        assert planck_emission(6500.0).max() == pytest.approx(1.0)

    def test_nonlinear(self):
        mid = planck_emission(5000.0)
        avg = 0.5 * (planck_emission(2000.0) + planck_emission(8000.0))
        assert np.all(avg - mid > 0.05)

    def test_rejects_bad_temperature(self):
        with pytest.raises(ValueError):
            planck_emission(-1.0)
        with pytest.raises(ValueError):
            planck_emission(np.nan)


def random_albedo_bindings(rng, size=6):
    return MaterialBindings(albedo=Image2D(rng.random((size, size, 3))), roughness=1.0, metalness=0.0,
                            specular=False)


def rand_ctx(rng, n, size=6):
    uv = rng.uniform(1, size - 2, (n, 2))
    return ShadingContext(np.zeros((n, 3)), N, T, B, WO, L, np.ones(3), uv)


class TestFilterOrders:
    @pytest.mark.parametrize("flt", [TENT, KernelSpec("bspline3"), KernelSpec("mitchell"),
                                     KernelSpec("gaussian", sigma=0.5), FisFilter(KernelSpec("gaussian", sigma=0.5)), "ewa"],
                             ids=str)
    def test_constant_textures_agree(self, flt):
        b = MaterialBindings(albedo=Image2D(np.full((8, 8, 3), 0.4)), roughness=Image2D(np.full((8, 8, 1), 0.3)),
                             metalness=Image2D(np.full((8, 8, 1), 1.0)))
        c = ShadingContext(np.zeros(3), N, T, B, WO, L, np.ones(3), np.array([[3.3, 4.1], [2.2, 2.9]]),
                           np.array([1.5, 0.2]), np.array([0.1, 1.2]))
        before = radiance_filter_before(c, b, flt)
        after = radiance_filter_after_exhaustive(c, b, flt)
        direct = shade(c, BrdfParams(np.full(3, 0.4), 0.3, 1.0))
        np.testing.assert_allclose(before, after, atol=1e-12)
        np.testing.assert_allclose(after, np.broadcast_to(direct, after.shape), atol=1e-12)

    def test_affine_albedo_equivalence(self, rng):
        for _ in range(20):
            b = random_albedo_bindings(rng)
            c = rand_ctx(rng, 8)
            for flt in (TENT, KernelSpec("bspline3"), KernelSpec("mitchell")):
                np.testing.assert_allclose(radiance_filter_before(c, b, flt),
                                           radiance_filter_after_exhaustive(c, b, flt), atol=1e-6)

    def test_normal_map_divergence(self):
        from stochtex.harness.scenes import two_normal_texture

        b = MaterialBindings(albedo=(0.7, 0.7, 0.7), normal_map=two_normal_texture(8), roughness=0.3)
        c = ctx((3.5, 3.0))
        before = radiance_filter_before(c, b, TENT)
        after = radiance_filter_after_exhaustive(c, b, TENT)
        # oracle: average of the two texel normals shaded separately vs shading their mean
        s = math.sqrt(0.5)
        n1, n2 = np.array([s, 0, s]), np.array([-s, 0, s])
        p = lambda n: BrdfParams(np.full(3, 0.7), 0.3, 0.0, n)
        oracle_after = 0.5 * (shade(c, p(n1)) + shade(c, p(n2)))
        oracle_before = shade(c, p(N))
        np.testing.assert_allclose(after, oracle_after, atol=1e-12)
        np.testing.assert_allclose(before, oracle_before, atol=1e-12)
        assert np.max(np.abs(before - after)) > 1e-2

    def test_binary_metalness_never_half(self):
        from stochtex.harness.scenes import metalness_textures

        albedo, rough, metal = metalness_textures(8, cell=1)
        seen = []
        b = MaterialBindings(albedo=albedo, roughness=rough, metalness=metal, observer=seen.append)
        c = ctx((0.5, 0.0))
        after = radiance_filter_after_exhaustive(c, b, TENT)
        assert set(np.unique(np.concatenate([s.ravel() for s in seen]))) == {0.0, 1.0}
        t0 = shade(c, BrdfParams(albedo.data[0, 0], rough.data[0, 0, 0], metal.data[0, 0, 0]))
        t1 = shade(c, BrdfParams(albedo.data[0, 1], rough.data[0, 1, 0], metal.data[0, 1, 0]))
        np.testing.assert_allclose(after, 0.5 * (t0 + t1), atol=1e-12)
        seen.clear()
        radiance_filter_before(c, b, TENT)
        assert np.allclose(np.concatenate([s.ravel() for s in seen]), 0.5)

    def test_one_texel_footprint(self, rng):
        b = MaterialBindings(albedo=Image2D(rng.random((4, 4, 3))), roughness=Image2D(rng.random((4, 4, 1))),
                             metalness=Image2D(rng.random((4, 4, 1))))
        c = ctx((2.0, 1.0))
        got = radiance_filter_after_exhaustive(c, b, TENT)
        direct = shade(c, BrdfParams(b.albedo.data[1, 2], b.roughness.data[1, 2, 0], b.metalness.data[1, 2, 0]))
        np.testing.assert_allclose(got, direct, atol=1e-14)

    def test_mismatched_texture_dims(self):
        with pytest.raises(ValueError):
            MaterialBindings(albedo=Image2D(np.ones((4, 4, 3))), roughness=Image2D(np.ones((2, 2, 1)))).textures()


def stochastic_mean(c1, b, flt, n, rng, k=1, selection="frs"):
    """Mean and standard error of ``n`` stochastic estimates at one lookup."""
    uv = np.broadcast_to(c1.uv, (n, 2))
    c = ShadingContext(np.zeros((n, 3)), N, T, B, WO, L, np.ones(3), uv,
                       np.broadcast_to(c1.dst0, (n, 2)), np.broadcast_to(c1.dst1, (n, 2)))
    xi = latin_hypercube(rng, k, n)
    est = radiance_filter_after_stochastic(c, b, flt, xi[0] if k == 1 else xi, selection)
    return est.mean(axis=0), est.std(axis=0) / math.sqrt(n)


class TestAfterStochastic:
    @pytest.mark.parametrize("flt,k", [(TENT, 1), (KernelSpec("bspline3"), 1), (KernelSpec("mitchell"), 1),
                                       (KernelSpec("gaussian", sigma=0.6), 1), ("ewa", 1),
                                       (FisFilter(KernelSpec("bspline3")), 6),
                                       (FisFilter(KernelSpec("gaussian", sigma=0.5)), 2)], ids=str)
    def test_unbiased(self, flt, k, rng):
        from stochtex.harness.scenes import metalness_textures

        albedo, rough, metal = metalness_textures(16, cell=1)
        b = MaterialBindings(albedo=Image2D(albedo.data * rng.uniform(0.5, 1.0, (16, 16, 1))),
                             roughness=rough, metalness=metal)
        c1 = ctx((7.3, 8.6), dst0=np.array([2.2, 0.4]), dst1=np.array([-0.3, 1.7]))
        ref = radiance_filter_after_exhaustive(c1, b, flt)
        mean, se = stochastic_mean(c1, b, flt, 400_000, rng, k)
        assert np.all(np.abs(mean - ref) <= 3 * se + 1e-12), (mean, ref, se)

    def test_constant_zero_variance(self, rng):
        b = MaterialBindings(albedo=Image2D(np.full((8, 8, 3), 0.3)), roughness=Image2D(np.full((8, 8, 1), 0.5)))
        c = rand_ctx(rng, 500, 8)
        est = radiance_filter_after_stochastic(c, b, KernelSpec("bspline3"), rng.random(500))
        np.testing.assert_allclose(est, np.broadcast_to(est[0], est.shape), atol=1e-15)

    def test_fetches_per_texture(self, rng):
        size = 8
        b = MaterialBindings(albedo=Image2D(rng.random((size, size, 3))), roughness=Image2D(rng.random((size, size, 1))),
                             metalness=Image2D(rng.random((size, size, 1))))
        c = rand_ctx(rng, 300, size)
        for flt in (TENT, KernelSpec("bspline3"), KernelSpec("gaussian", sigma=0.5), FisFilter(TENT)):
            cnt = FetchCounter()
            xi = rng.random((2, 300)) if isinstance(flt, FisFilter) else rng.random(300)
            radiance_filter_after_stochastic(c, b, flt, xi, counter=cnt)
            assert cnt.count == 3 * 300
        cnt = FetchCounter()
        radiance_filter_after_stochastic(c, b, KernelSpec("mitchell"), rng.random(300), counter=cnt)
        assert 3 * 300 <= cnt.count <= 2 * 3 * 300

    def test_observer_sees_texel_values_only(self, rng):
        from stochtex.harness.scenes import metalness_textures

        albedo, rough, metal = metalness_textures(8, cell=1)
        seen = []
        b = MaterialBindings(albedo=albedo, roughness=rough, metalness=metal, observer=seen.append)
        c = rand_ctx(rng, 1000, 8)
        radiance_filter_after_stochastic(c, b, KernelSpec("bspline3"), rng.random(1000))
        assert set(np.unique(np.concatenate(seen))) <= {0.0, 1.0}

    def test_independent_selection_rejects_signed(self, rng):
        b = random_albedo_bindings(rng)
        with pytest.raises(ValueError):
            radiance_filter_after_stochastic(rand_ctx(rng, 4), b, KernelSpec("mitchell"), rng.random((1, 4)),
                                             independent=True)


class TestSplit:
    def test_delta_lowpass_is_before(self, rng):
        b = MaterialBindings(albedo=Image2D(rng.random((6, 6, 3))), roughness=Image2D(rng.random((6, 6, 1))))
        c = rand_ctx(rng, 10)
        np.testing.assert_allclose(radiance_split_filter(c, b, TENT, None, None),
                                   radiance_filter_before(c, b, TENT), atol=1e-15)

    def test_unbiased_against_double_sum(self, rng):
        from stochtex.harness.scenes import two_normal_texture

        b = MaterialBindings(albedo=(0.6, 0.6, 0.6), normal_map=two_normal_texture(16), roughness=0.4)
        uv = np.array([7.3, 7.8])
        # brute force: continuous tent lowpass integrated on a fine midpoint grid
        m = 400
        g = (np.arange(m) + 0.5) / m * 2 - 1
        gx, gy = np.meshgrid(g, g)
        w = (1 - np.abs(gx)) * (1 - np.abs(gy))
        pts = np.stack([uv[0] + gx.ravel(), uv[1] + gy.ravel()], axis=1)
        cc = ShadingContext(np.zeros((len(pts), 3)), N, T, B, WO, L, np.ones(3), pts)
        vals = radiance_filter_before(cc, b, TENT)
        oracle = (w.ravel()[:, None] * vals).sum(axis=0) / w.sum()
        n = 400_000
        c = ShadingContext(np.zeros((n, 3)), N, T, B, WO, L, np.ones(3), np.broadcast_to(uv, (n, 2)))
        est = radiance_split_filter(c, b, TENT, KernelSpec("tent"), latin_hypercube(rng, 4, n))
        se = est.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(est.mean(axis=0) - oracle) < 3 * se + 1e-6)

    def test_intermediate_normals(self, rng):
        from stochtex.harness.scenes import two_normal_texture

        b = MaterialBindings(normal_map=two_normal_texture(8))
        st_ = np.column_stack([rng.uniform(1, 6, 200), rng.uniform(1, 6, 200)])
        frame = (np.broadcast_to(T, (200, 3)), np.broadcast_to(B, (200, 3)), np.broadcast_to(N, (200, 3)))
        smooth = decode_normal(frame, filter_parameters(b, TENT, st_)["normal_map"])
        texel = decode_normal((T, B, N), b.normal_map.data.reshape(-1, 3)[:2])
        off_set = np.min(np.abs(smooth[:, None, 0] - texel[None, :, 0]), axis=1) > 1e-3
        assert off_set.mean() > 0.5
        # filter-after shading only ever sees the two texel normals
        sel = shading.select_texels(TENT, st_, rng.random(200))
        raw = b.normal_map.fetch_coords(sel.coords)
        assert np.all(np.isin(np.round(raw[:, 0], 12), np.round(b.normal_map.data[0, :2, 0], 12)))


class TestTriplanar:
    def bindings(self, rng):
        return MaterialBindings(albedo=Image2D(rng.random((16, 16, 3)), "repeat"), roughness=1.0, specular=False)

    def test_axis_normal_weights(self):
        np.testing.assert_allclose(triplanar_weights(np.array([0.0, 0.0, 1.0])), [0, 0, 1])
        np.testing.assert_allclose(triplanar_weights(np.array([1.0, 1.0, 1.0]) / math.sqrt(3)), 1 / 3)

    def test_z_normal_samples_xy_plane(self, rng):
        b = self.bindings(rng)
        n = 200
        pos = rng.uniform(-1, 1, (n, 3))
        c = ShadingContext(pos, N, T, B, WO, L, np.ones(3))
        cnt = FetchCounter()
        got = triplanar(c, b, TENT, rng.random((1, n)), mode="stochastic", counter=cnt)
        assert cnt.count == n
        det = triplanar(c, b, KernelSpec("box"), mode="deterministic")
        assert np.all(np.isfinite(got)) and det.shape == got.shape

    def test_stochastic_unbiased(self, rng):
        b = self.bindings(rng)
        nrm = np.array([0.5, 0.6, 0.62])
        nrm /= np.linalg.norm(nrm)
        t = np.cross([0.0, 1.0, 0.0], nrm)
        t /= np.linalg.norm(t)
        bt = np.cross(nrm, t)
        pos = np.array([0.31, -0.47, 0.22])
        n = 300_000
        c = ShadingContext(np.broadcast_to(pos, (n, 3)), nrm, t, bt, nrm, nrm, np.ones(3))
        est = triplanar(c, b, TENT, latin_hypercube(rng, 1, n), mode="stochastic", scale=1.0)
        ref = triplanar(ShadingContext(pos, nrm, t, bt, nrm, nrm, np.ones(3)), b, TENT, mode="deterministic")
        se = est.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(est.mean(axis=0) - ref) < 3 * se + 1e-12)
        ex = triplanar(ShadingContext(pos, nrm, t, bt, nrm, nrm, np.ones(3)), b, TENT, mode="exhaustive")
        np.testing.assert_allclose(ex, ref, atol=1e-12)


class TestEmission:
    def test_constant_temperature(self, rng):
        g = Grid3D(np.full((6, 6, 6), 4200.0))
        p = rng.uniform(1, 4, (50, 3))
        for spec in (KernelSpec("box"), TENT, KernelSpec("bspline3")):
            np.testing.assert_allclose(emission_filter_before(g, p, spec),
                                       emission_filter_after_exhaustive(g, p, spec), rtol=1e-6)

    def test_before_after_differ(self):
        data = np.where(np.indices((4, 4, 4)).sum(axis=0) % 2 == 0, 2000.0, 8000.0)
        g = Grid3D(data)
        p = np.array([[1.5, 1.5, 1.5]])
        assert np.all(emission_filter_after_exhaustive(g, p, TENT) - emission_filter_before(g, p, TENT) > 0.05)

    def test_stochastic_unbiased(self, rng):
        g = Grid3D(rng.uniform(1500, 7500, (6, 6, 6)))
        p = np.array([2.3, 2.7, 3.1])
        n = 400_000
        ref = emission_filter_after_exhaustive(g, p[None], KernelSpec("bspline3"))[0]
        est = emission_filter_after_stochastic(g, np.broadcast_to(p, (n, 3)), KernelSpec("bspline3"),
                                               latin_hypercube(rng, 1, n)[0])
        se = est.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(est.mean(axis=0) - ref) < 3 * se)
        cnt = FetchCounter()
        emission_filter_after_stochastic(g, np.broadcast_to(p, (10, 3)), KernelSpec("bspline3"), rng.random(10),
                                         counter=cnt)
        assert cnt.count == 10
        cnt.reset()
        emission_filter_after_exhaustive(g, p[None], KernelSpec("bspline3"), cnt)
        assert cnt.count == 64
