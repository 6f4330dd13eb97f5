"""Area-vs-participation regression and the concentration inversion."""

import math

import numpy as np
import pytest

from resospec.concentration import (
    DEFAULT_LAYER_THICKNESS,
    concentration_from_slope,
    regress_area_vs_participation,
)
from resospec.core import CONSTANTS, LossConvention
from resospec.spinmodel import effective_gyro

P = np.array([2e-5, 4e-5, 6e-5, 8e-5, 1e-4])


class TestRegression:
    def test_exact_line(self):
        res = regress_area_vs_participation(P, 3e-2 * P + 1e-7)
        assert res.slope == pytest.approx(3e-2, rel=1e-10)
        assert res.intercept == pytest.approx(1e-7, rel=1e-9)
        assert res.r_squared == pytest.approx(1.0, abs=1e-12)
        assert res.n_points == 5

    def test_exact_line_through_origin(self):
        res = regress_area_vs_participation(P, 3e-2 * P)
        assert res.intercept == pytest.approx(0.0, abs=1e-12)
        assert res.intercept_consistent_with_zero

    def test_noisy_slope_within_quoted_uncertainty(self):
        rng = np.random.default_rng(21)
        slope = 3e-2
        areas = slope * P + 0.02 * slope * np.max(P) * rng.standard_normal(P.size)
        res = regress_area_vs_participation(P, areas)
        assert abs(res.slope - slope) < 3.0 * res.sigma_slope
        assert res.r_squared > 0.9

    def test_uniform_weights_match_unweighted_estimates(self):
        areas = 3e-2 * P + 1e-7
        a = regress_area_vs_participation(P, areas)
        b = regress_area_vs_participation(P, areas, sigma_areas=np.full(P.size, 2e-7))
        assert b.slope == pytest.approx(a.slope, rel=1e-12)
        assert b.intercept == pytest.approx(a.intercept, rel=1e-9)

    def test_weighted_branch_downweights_noisy_points(self):
        areas = 3e-2 * P
        areas_off = areas.copy()
        areas_off[-1] *= 2.0  # corrupt one point, give it a huge sigma
        sig = np.full(P.size, 1e-8)
        sig[-1] = 1e-3
        res = regress_area_vs_participation(P, areas_off, sigma_areas=sig)
        assert res.slope == pytest.approx(3e-2, rel=1e-4)

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="at least 3"):
            regress_area_vs_participation(P[:2], P[:2])

    def test_identical_participations(self):
        with pytest.raises(ValueError, match="identical"):
            regress_area_vs_participation(np.full(4, 5e-5), np.ones(4))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            regress_area_vs_participation(P, P[:3])

    def test_non_finite_rejected(self):
        bad = P.copy()
        bad[0] = math.nan
        with pytest.raises(ValueError, match="non-finite"):
            regress_area_vs_participation(bad, P)


class TestConcentrationInversion:
    def test_frozen_conversion(self):
        res = concentration_from_slope(1e-9, 2.0)
        assert res.volume_m3 == pytest.approx(2.7313207213e19, rel=1e-9)
        assert res.surface_m2 == pytest.approx(
            2.7313207213e19 * DEFAULT_LAYER_THICKNESS, rel=1e-9
        )
        assert res.surface_per_cm2 == pytest.approx(res.surface_m2 * 1e-4, rel=1e-15)

    def test_plant_and_recover(self):
        c = 1.0333e25
        gamma = effective_gyro(2.0)
        slope = c * CONSTANTS.h * CONSTANTS.mu_0 * gamma / 4.0
        res = concentration_from_slope(slope, 2.0)
        assert res.volume_m3 == pytest.approx(c, rel=1e-12)

    def test_derived_convention_halves_the_concentration(self):
        paper = concentration_from_slope(1e-9, 2.0, convention=LossConvention.PAPER_4PI)
        derived = concentration_from_slope(
            1e-9, 2.0, convention=LossConvention.DERIVED_8PI
        )
        assert derived.volume_m3 == pytest.approx(0.5 * paper.volume_m3, rel=1e-12)

    def test_sigma_scales_with_slope_uncertainty(self):
        res = concentration_from_slope(1e-9, 2.0, sigma_slope=1e-10)
        assert res.sigma_volume_m3 == pytest.approx(0.1 * res.volume_m3, rel=1e-12)
        assert res.sigma_surface_per_cm2 == pytest.approx(
            0.1 * res.surface_per_cm2, rel=1e-12
        )

    def test_thickness_enters_linearly(self):
        thin = concentration_from_slope(1e-9, 2.0, layer_thickness=1e-9)
        thick = concentration_from_slope(1e-9, 2.0, layer_thickness=5e-9)
        assert thick.surface_m2 == pytest.approx(5.0 * thin.surface_m2, rel=1e-12)
        assert thick.volume_m3 == thin.volume_m3

    @pytest.mark.parametrize("slope", [0.0, -1e-9, math.nan])
    def test_nonpositive_slope_rejected(self, slope):
        with pytest.raises(ValueError, match="slope must be positive"):
            concentration_from_slope(slope, 2.0)

    def test_bad_thickness_rejected(self):
        with pytest.raises(ValueError, match="layer_thickness"):
            concentration_from_slope(1e-9, 2.0, layer_thickness=0.0)
