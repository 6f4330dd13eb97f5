"""Value objects: constants identities, validation, immutability."""

import math

import numpy as np
import pytest

from resospec.core import (
    CONSTANTS,
    ComplexTrace,
    DataFormatError,
    DiagramPoint,
    FeatureFit,
    FieldSweepPoint,
    FitError,
    GeometryKind,
    LineShape,
    LossConvention,
    LossCurve,
    ParticipationRow,
    ParticipationTable,
    PhysicalConstants,
    ProbeGeometry,
    ResonatorFit,
    SpinSpecies,
    TWO_PI,
)


def make_fit(q_i=2e5, q_c=1e5, geometry=None, phi_0=0.0, radius=0.5):
    geometry = geometry or ProbeGeometry.reflection()
    q_l = 1.0 / (1.0 / q_i + 1.0 / q_c)
    return ResonatorFit(
        omega_r=TWO_PI * 8e9,
        Q_i=q_i,
        Q_c=q_c,
        Q_l=q_l,
        phi_0=phi_0,
        circle_center=0.5 + 0.0j,
        circle_radius=radius,
        sigma_radius=1e-5,
        sigma_inv_Qi=1e-9,
        geometry=geometry,
    )


class TestConstants:
    def test_h_is_exact_si_value(self):
        assert CONSTANTS.h == 6.62607015e-34

    def test_hbar_consistent_with_h(self):
        assert abs(CONSTANTS.h - TWO_PI * CONSTANTS.hbar) <= 1e-12 * CONSTANTS.h

    def test_bohr_magneton_frequency_anchor(self):
        # mu_B/h in Hz/T, the slope of a g=1 Zeeman line.
        ratio = CONSTANTS.mu_B / CONSTANTS.h
        assert ratio == pytest.approx(13.996244936e9, rel=1e-6)

    def test_g2_gyromagnetic_slope(self):
        slope_ghz_per_t = 2.0 * CONSTANTS.mu_B / CONSTANTS.h / 1e9
        assert slope_ghz_per_t == pytest.approx(27.992489872, rel=1e-6)

    def test_inconsistent_hbar_rejected(self):
        with pytest.raises(ValueError, match="h and hbar"):
            PhysicalConstants(hbar=1.0e-34)

    def test_wrong_mu_b_rejected(self):
        with pytest.raises(ValueError, match="mu_B/h"):
            PhysicalConstants(mu_B=9.3e-24)

    def test_nonpositive_constant_rejected(self):
        with pytest.raises(ValueError, match="k_B"):
            PhysicalConstants(k_B=-1.0)


class TestProbeGeometry:
    def test_from_string_round_trip(self):
        for name in ("reflection", "hanger"):
            g = ProbeGeometry.from_string(name)
            assert str(g) == name

    def test_from_string_normalizes_case(self):
        assert ProbeGeometry.from_string(" Reflection ").is_reflection

    def test_from_string_rejects_unknown(self):
        with pytest.raises(DataFormatError, match="unknown geometry"):
            ProbeGeometry.from_string("transmission")

    def test_r_factor(self):
        # kappa_c prefactor of the response numerator.
        assert ProbeGeometry.reflection().r_factor == 2.0
        assert ProbeGeometry.hanger().r_factor == 1.0

    def test_kind_type_checked(self):
        with pytest.raises(ValueError):
            ProbeGeometry("reflection")

    def test_equality(self):
        assert ProbeGeometry.reflection() == ProbeGeometry(GeometryKind.REFLECTION)
        assert ProbeGeometry.reflection() != ProbeGeometry.hanger()


class TestComplexTrace:
    def test_arrays_copied_and_frozen(self):
        f = np.array([1.0, 2.0, 3.0])
        s = np.array([1 + 0j, 2 + 0j, 3 + 0j])
        tr = ComplexTrace(freq=f, s=s)
        f[0] = 99.0
        assert tr.freq[0] == 1.0
        with pytest.raises(ValueError):
            tr.freq[0] = 0.0
        with pytest.raises(ValueError):
            tr.s[0] = 0.0

    def test_span_and_len(self):
        tr = ComplexTrace(freq=np.linspace(1.0, 2.0, 11), s=np.ones(11, complex))
        assert len(tr) == 11
        assert tr.span == pytest.approx(1.0)

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ComplexTrace(freq=np.array([1.0, 1.0]), s=np.ones(2, complex))
        with pytest.raises(ValueError, match="strictly increasing"):
            ComplexTrace(freq=np.array([2.0, 1.0]), s=np.ones(2, complex))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            ComplexTrace(freq=np.array([1.0, np.nan]), s=np.ones(2, complex))
        with pytest.raises(ValueError, match="non-finite"):
            ComplexTrace(freq=np.array([1.0, 2.0]), s=np.array([1j, np.inf + 0j]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="lengths differ"):
            ComplexTrace(freq=np.array([1.0, 2.0]), s=np.ones(3, complex))

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="at least one sample"):
            ComplexTrace(freq=np.array([]), s=np.array([], complex))


class TestResonatorFit:
    def test_consistent_instance_accepted(self):
        fit = make_fit()
        assert fit.Q_l == pytest.approx(1.0 / (1.0 / 2e5 + 1.0 / 1e5))

    def test_inconsistent_q_triple_rejected(self):
        with pytest.raises(ValueError, match="inconsistent quality factors"):
            ResonatorFit(
                omega_r=TWO_PI * 8e9,
                Q_i=2e5,
                Q_c=1e5,
                Q_l=1e5,
                phi_0=0.0,
                circle_center=0.5 + 0j,
                circle_radius=0.5,
                sigma_radius=0.0,
                sigma_inv_Qi=0.0,
                geometry=ProbeGeometry.reflection(),
            )

    def test_radius_bounds(self):
        with pytest.raises(ValueError, match="circle_radius"):
            make_fit(radius=0.0)
        with pytest.raises(ValueError, match="circle_radius"):
            make_fit(radius=1.5)

    def test_reflection_pins_phi_zero(self):
        with pytest.raises(ValueError, match="phi_0"):
            make_fit(phi_0=0.3)
        # Hanger is free to rotate.
        make_fit(geometry=ProbeGeometry.hanger(), phi_0=0.3)

    def test_nonpositive_q_rejected(self):
        with pytest.raises(ValueError, match="Q_i"):
            make_fit(q_i=-2e5)


class TestEnums:
    def test_loss_convention_from_string(self):
        assert LossConvention.from_string("paper") is LossConvention.PAPER_4PI
        assert LossConvention.from_string(" DERIVED ") is LossConvention.DERIVED_8PI
        with pytest.raises(DataFormatError, match="loss convention"):
            LossConvention.from_string("both")

    def test_line_shapes_enumerated(self):
        assert {s.value for s in LineShape} == {
            "lorentzian",
            "split_lorentzian",
            "plateau",
        }


class TestSpinSpecies:
    def test_valid_species(self):
        sp = SpinSpecies(g=2.0, delta_0=0.0, gamma_line=TWO_PI * 0.4e9, label="x")
        assert sp.shape is LineShape.LORENTZIAN
        assert sp.hyperfine_A is None

    def test_validation(self):
        with pytest.raises(ValueError, match="g-factor"):
            SpinSpecies(g=0.0, delta_0=0.0, gamma_line=1.0)
        with pytest.raises(ValueError, match="delta_0"):
            SpinSpecies(g=2.0, delta_0=-1.0, gamma_line=1.0)
        with pytest.raises(ValueError, match="gamma_line"):
            SpinSpecies(g=2.0, delta_0=0.0, gamma_line=0.0)
        with pytest.raises(ValueError, match="hyperfine_A"):
            SpinSpecies(g=2.0, delta_0=0.0, gamma_line=1.0, hyperfine_A=0.0)
        with pytest.raises(ValueError, match="shape"):
            SpinSpecies(g=2.0, delta_0=0.0, gamma_line=1.0, shape="lorentzian")


class TestCurveAndFeatureTypes:
    def test_loss_curve_validation(self):
        LossCurve(b0=np.array([0.0, 0.1]), kappa_s=np.zeros(2), omega_r_ref=1.0)
        with pytest.raises(ValueError, match="strictly increasing"):
            LossCurve(b0=np.array([0.1, 0.0]), kappa_s=np.zeros(2), omega_r_ref=1.0)
        with pytest.raises(ValueError, match="sigma"):
            LossCurve(
                b0=np.array([0.0, 0.1]),
                kappa_s=np.zeros(2),
                omega_r_ref=1.0,
                sigma=np.array([-1.0, 1.0]),
            )

    def test_field_sweep_point(self):
        with pytest.raises(ValueError, match="b0"):
            FieldSweepPoint(b0=-0.1, fit=make_fit())
        with pytest.raises(ValueError, match="ResonatorFit"):
            FieldSweepPoint(b0=0.1, fit=None)

    def test_feature_fit_split_widths_paired(self):
        kw = dict(
            species_label="x",
            shape=LineShape.SPLIT_LORENTZIAN,
            peak_height=1.0,
            center_field=0.3,
            width_field=0.01,
            area=1e-5,
            omega_r_ref=TWO_PI * 8e9,
            fit_window=(0.0, 0.45),
        )
        with pytest.raises(ValueError, match="together"):
            FeatureFit(width_left=0.01, width_right=None, **kw)
        f = FeatureFit(width_left=0.01, width_right=0.02, **kw)
        assert f.fit_window == (0.0, 0.45)

    def test_diagram_point_validation(self):
        DiagramPoint(omega_r=1.0, b_feature=0.1, sigma_b=0.0)
        with pytest.raises(ValueError, match="sigma_b"):
            DiagramPoint(omega_r=1.0, b_feature=0.1, sigma_b=-1.0)


class TestParticipation:
    def test_lookup(self):
        table = ParticipationTable(
            rows=(
                ParticipationRow(resonator_id="a", p_f=1e-4, p_sc=2e-5),
                ParticipationRow(resonator_id="b", p_f=2e-4, p_sc=4e-5),
            )
        )
        assert table.lookup("b").p_sc == 4e-5
        with pytest.raises(KeyError, match="not in participation table"):
            table.lookup("c")

    def test_duplicate_ids_rejected(self):
        row = ParticipationRow(resonator_id="a", p_f=1e-4, p_sc=2e-5)
        with pytest.raises(ValueError, match="duplicate"):
            ParticipationTable(rows=(row, row))

    def test_participation_bounds(self):
        with pytest.raises(ValueError, match="p_f"):
            ParticipationRow(resonator_id="a", p_f=0.0, p_sc=0.5)
        with pytest.raises(ValueError, match="p_sc"):
            ParticipationRow(resonator_id="a", p_f=0.5, p_sc=1.5)


class TestErrorHierarchy:
    def test_data_format_error_is_value_error(self):
        assert issubclass(DataFormatError, ValueError)

    def test_fit_error_is_runtime_error(self):
        assert issubclass(FitError, RuntimeError)
