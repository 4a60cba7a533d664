import math

import numpy as np
import pytest

from micropolar.datagen import ICRecipe, make_angular_ic, make_velocity_ic
from micropolar.spectral import (
    GridSpec,
    SobolevIndex,
    dealias_mask,
    divergence_norm,
    hermitian_defect,
    l2_norm,
    mollify,
    sobolev_norm,
)

from oracles import expected_growth

GRIDS = (32, 64, 128)


def norms_under_refinement(make, recipe, index, eps=0.0):
    out = []
    for n in GRIDS:
        f = make(recipe, GridSpec(n))
        out.append(sobolev_norm(mollify(f, eps) if eps else f, index))
    return np.array(out)


class TestRecipe:
    @pytest.mark.parametrize(
        "kw", [{"amplitude": 0.0}, {"amplitude": -1}, {"kind": "vortex"}, {"spectral_slope_delta": 0},
               {"seed": -1}, {"mode": (0, 0, 0)}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ICRecipe(**kw)


class TestVelocity:
    @pytest.mark.parametrize("kind", ["random-spectrum", "taylor-green", "beltrami", "single-mode"])
    def test_invariants(self, kind):
        g = GridSpec(32)
        r = ICRecipe(kind=kind, target_index=SobolevIndex(0.7), amplitude=2.5, seed=4, mode=(0, 2, 0))
        u = make_velocity_ic(r, g)
        assert divergence_norm(u) <= 1e-13 * l2_norm(u)
        assert not u.coeffs[:, 0, 0, 0].any()
        assert sobolev_norm(u, SobolevIndex(0.7)) == pytest.approx(2.5, rel=1e-10)
        assert hermitian_defect(u) <= 1e-14 * l2_norm(u)
        assert not u.coeffs[:, ~dealias_mask(g)].any()

    @pytest.mark.parametrize("s", [-0.5, 0.0, 0.8, 2.0])
    def test_beltrami_unit_shell(self, s):
        g = GridSpec(16)
        r = ICRecipe(kind="beltrami", target_index=SobolevIndex(0.3, "homogeneous"), amplitude=1.7, mode=(0, 0, 1))
        u = make_velocity_ic(r, g)
        assert sobolev_norm(u, SobolevIndex(s, "homogeneous")) == pytest.approx(1.7, rel=1e-12)

    def test_reproducible(self):
        r = ICRecipe(seed=123)
        a = make_velocity_ic(r, GridSpec(32)).coeffs
        b = make_velocity_ic(r, GridSpec(32)).coeffs
        assert a.tobytes() == b.tobytes()
        c = make_velocity_ic(ICRecipe(seed=124), GridSpec(32)).coeffs
        assert not np.allclose(a, c)

    def test_refinement_keeps_low_modes(self):
        r = ICRecipe(target_index=SobolevIndex(1.0), seed=9)
        coarse = make_velocity_ic(r, GridSpec(16))
        fine = make_velocity_ic(r, GridSpec(32))
        # shared modes (|k_i| <= 5) differ only by the per-grid normalization factor
        idx = np.r_[0:6, -5:0]
        a = coarse.coeffs[:, idx][:, :, idx][:, :, :, idx]
        b = fine.coeffs[:, idx][:, :, idx][:, :, :, idx]
        ratio = b[np.abs(a) > 1e-12] / a[np.abs(a) > 1e-12]
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
        assert abs(ratio[0].imag) < 1e-12

    def test_target_norm_stable_and_rougher_norm_grows(self):
        r = ICRecipe(target_index=SobolevIndex(1.0), seed=0)
        h1 = norms_under_refinement(make_velocity_ic, r, SobolevIndex(1.0))
        h15 = norms_under_refinement(make_velocity_ic, r, SobolevIndex(1.5))
        np.testing.assert_allclose(h1, 1.0, rtol=0.05)
        growth = h15[1:] / h15[:-1]
        predicted = [expected_growth(n, 1.0, 1.5) for n in GRIDS[:-1]]
        np.testing.assert_allclose(growth, predicted, rtol=0.02)
        assert np.all(growth >= 1.2)
        # asymptotic per-doubling growth is 2^(1/2 - delta)
        assert np.all(growth < 2 ** (0.5 - 0.01))

    @pytest.mark.xfail(strict=True, reason="1.5x per doubling exceeds the 2^(1/2-delta) ~ 1.40 ceiling of the slope")
    def test_rougher_norm_grows_by_one_and_a_half(self):
        r = ICRecipe(target_index=SobolevIndex(1.0), seed=0)
        h15 = norms_under_refinement(make_velocity_ic, r, SobolevIndex(1.5))
        assert np.all(h15[1:] / h15[:-1] >= 1.5)


class TestAngular:
    def test_single_mode_weights(self):
        g = GridSpec(16)
        r = ICRecipe(kind="single-mode", target_index=SobolevIndex(0.0), amplitude=0.6, mode=(1, 2, 2))
        w = make_angular_ic(r, g)
        for s in (-0.4, 0.5, 1.0):
            assert sobolev_norm(w, SobolevIndex(s)) == pytest.approx(0.6 * 10 ** (s / 2), rel=1e-12)
            assert sobolev_norm(w, SobolevIndex(s, "homogeneous")) == pytest.approx(0.6 * 3**s, rel=1e-12)

    def test_not_projected(self):
        w = make_angular_ic(ICRecipe(seed=2), GridSpec(16))
        assert divergence_norm(w) > 0.1 * sobolev_norm(w, SobolevIndex(1.0, "homogeneous"))

    def test_negative_regularity(self):
        r = ICRecipe(target_index=SobolevIndex(-0.4), seed=0)
        hs = norms_under_refinement(make_angular_ic, r, SobolevIndex(-0.4))
        l2 = norms_under_refinement(make_angular_ic, r, SobolevIndex(0.0))
        np.testing.assert_allclose(hs, 1.0, rtol=1e-10)
        growth = l2[1:] / l2[:-1]
        assert np.all(growth >= 1.2)
        predicted = [expected_growth(n, -0.4, 0.0) for n in GRIDS[:-1]]
        np.testing.assert_allclose(growth, predicted, rtol=0.02)

    @pytest.mark.xfail(strict=True, reason="per-grid normalization adds a slowly varying factor to the L2 growth")
    def test_growth_exponent_near_design_slope(self):
        r = ICRecipe(target_index=SobolevIndex(-0.4), seed=0)
        l2 = norms_under_refinement(make_angular_ic, r, SobolevIndex(0.0))
        exponents = np.log2(l2[1:] / l2[:-1])
        np.testing.assert_allclose(exponents, 0.4 - 0.01, rtol=0.15)

    def test_mollified_data_has_finite_l2(self):
        r = ICRecipe(target_index=SobolevIndex(-0.4), seed=0)
        raw = norms_under_refinement(make_angular_ic, r, SobolevIndex(0.0))
        moll = norms_under_refinement(make_angular_ic, r, SobolevIndex(0.0), eps=0.1)
        ratio = moll[1:] / moll[:-1]
        predicted = [expected_growth(n, -0.4, 0.0, eps=0.1) for n in GRIDS[:-1]]
        np.testing.assert_allclose(ratio, predicted, rtol=0.02)
        # no growth: the only drift left is the normalization factor, which shrinks the field
        assert np.all(ratio <= 1.0)
        assert np.all(moll < raw)
        assert math.isfinite(moll[-1])
