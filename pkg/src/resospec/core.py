"""Shared value types, physical constants, and unit conventions.

Conventions used across the package:

* frequencies and loss rates are stored internally as *angular* quantities
  in rad/s; file and CLI interfaces use Hz or GHz and say so in the key name
* magnetic fields are tesla
* every type below is an immutable value object; construction validates the
  invariants and raises on violation, so instances are safe to share between
  threads

``hbar`` is derived from the exact SI Planck constant so that
``h == 2*pi*hbar`` holds to machine precision rather than to the rounding of
a separately quoted CODATA value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Bohr magneton in frequency units, used as a sanity anchor: mu_B/h in Hz/T.
_MU_B_OVER_H_HZ_PER_T = 13.996244936e9


class DataFormatError(ValueError):
    """Malformed or inconsistent input data (files, tables, manifests)."""


class FitError(RuntimeError):
    """A numerical stage failed to produce a usable result."""


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants bundle.

    Defaults are the exact SI values where they exist (h, k_B) and CODATA
    2018 elsewhere.  ``hbar`` defaults to ``h / 2 pi`` computed in double
    precision.
    """

    h: float = 6.62607015e-34          # J s, exact
    hbar: float = 6.62607015e-34 / TWO_PI
    mu_B: float = 9.2740100783e-24     # J/T
    k_B: float = 1.380649e-23          # J/K, exact
    mu_0: float = 1.25663706212e-6     # N/A^2

    def __post_init__(self) -> None:
        for name in ("h", "hbar", "mu_B", "k_B", "mu_0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"constant {name} must be finite and positive, got {v}")
        if abs(self.h - TWO_PI * self.hbar) > 1e-12 * self.h:
            raise ValueError("h and hbar are inconsistent: h must equal 2*pi*hbar")
        ratio = self.mu_B / self.h
        if abs(ratio - _MU_B_OVER_H_HZ_PER_T) > 1e-6 * _MU_B_OVER_H_HZ_PER_T:
            raise ValueError(
                f"mu_B/h = {ratio:.9e} Hz/T is more than 1 ppm from the expected "
                f"{_MU_B_OVER_H_HZ_PER_T:.9e} Hz/T"
            )


CONSTANTS = PhysicalConstants()


class GeometryKind(enum.Enum):
    REFLECTION = "reflection"
    HANGER = "hanger"


@dataclass(frozen=True)
class ProbeGeometry:
    """Measurement topology of the resonator port.

    ``r_factor`` is the prefactor of kappa_c in the steady-state response:
    2 for a single-port reflection measurement, 1 for a side-coupled
    (hanger) transmission measurement.  It is fully determined by ``kind``.
    """

    kind: GeometryKind

    def __post_init__(self) -> None:
        if not isinstance(self.kind, GeometryKind):
            raise ValueError(f"kind must be a GeometryKind, got {self.kind!r}")

    @property
    def r_factor(self) -> float:
        return 2.0 if self.kind is GeometryKind.REFLECTION else 1.0

    @property
    def is_reflection(self) -> bool:
        return self.kind is GeometryKind.REFLECTION

    @classmethod
    def reflection(cls) -> "ProbeGeometry":
        return cls(GeometryKind.REFLECTION)

    @classmethod
    def hanger(cls) -> "ProbeGeometry":
        return cls(GeometryKind.HANGER)

    @classmethod
    def from_string(cls, name: str) -> "ProbeGeometry":
        try:
            return cls(GeometryKind(name.strip().lower()))
        except ValueError:
            raise DataFormatError(
                f"unknown geometry {name!r}: expected 'reflection' or 'hanger'"
            ) from None

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class ComplexTrace:
    """One complex scattering-parameter trace S(omega).

    ``freq`` is the angular frequency axis in rad/s, strictly increasing and
    finite; ``s`` the complex transmission/reflection samples.  Arrays are
    copied and frozen at construction.
    """

    freq: np.ndarray
    s: np.ndarray

    def __post_init__(self) -> None:
        freq = np.asarray(self.freq, dtype=float).copy()
        s = np.asarray(self.s, dtype=complex).copy()
        if freq.ndim != 1 or s.ndim != 1:
            raise ValueError("freq and s must be one-dimensional arrays")
        if freq.size != s.size:
            raise ValueError(f"freq and s lengths differ: {freq.size} vs {s.size}")
        if freq.size < 1:
            raise ValueError("trace must contain at least one sample")
        if not np.all(np.isfinite(freq)):
            raise ValueError("freq contains non-finite values")
        if not np.all(np.isfinite(s.real)) or not np.all(np.isfinite(s.imag)):
            raise ValueError("s contains non-finite values")
        if freq.size > 1 and not np.all(np.diff(freq) > 0):
            raise ValueError("freq must be strictly increasing")
        freq.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "s", s)

    def __len__(self) -> int:
        return int(self.freq.size)

    @property
    def span(self) -> float:
        """Total angular-frequency span in rad/s."""
        return float(self.freq[-1] - self.freq[0])


@dataclass(frozen=True)
class ResonatorFit:
    """Result of fitting a single resonance trace.

    All quality factors are dimensionless, ``omega_r`` is rad/s, ``phi_0``
    the impedance-mismatch rotation in radians (zero by definition for
    reflection geometry).  ``circle_center``/``circle_radius`` describe the
    resonance circle in the normalized complex plane where the off-resonant
    point sits at 1+0i.  ``sigma_inv_Qi`` is the one-sigma uncertainty of
    1/Q_i propagated from the circle-radius scatter.
    """

    omega_r: float
    Q_i: float
    Q_c: float
    Q_l: float
    phi_0: float
    circle_center: complex
    circle_radius: float
    sigma_radius: float
    sigma_inv_Qi: float
    geometry: ProbeGeometry

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega_r) and self.omega_r > 0):
            raise ValueError(f"omega_r must be positive, got {self.omega_r}")
        for name in ("Q_i", "Q_c", "Q_l"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        lhs = 1.0 / self.Q_l
        rhs = 1.0 / self.Q_i + 1.0 / self.Q_c
        if abs(lhs - rhs) > 1e-9 * lhs:
            raise ValueError(
                f"inconsistent quality factors: 1/Q_l = {lhs:.12e} but "
                f"1/Q_i + 1/Q_c = {rhs:.12e}"
            )
        if not (0.0 < self.circle_radius <= 1.0 + 1e-12):
            raise ValueError(
                f"circle_radius must lie in (0, 1], got {self.circle_radius}"
            )
        if not (math.isfinite(self.sigma_radius) and self.sigma_radius >= 0):
            raise ValueError("sigma_radius must be non-negative")
        if not (math.isfinite(self.sigma_inv_Qi) and self.sigma_inv_Qi >= 0):
            raise ValueError("sigma_inv_Qi must be non-negative")
        if not math.isfinite(self.phi_0):
            raise ValueError("phi_0 must be finite")
        if self.geometry.is_reflection and self.phi_0 != 0.0:
            raise ValueError("phi_0 is fixed to zero in reflection geometry")


class LineShape(enum.Enum):
    LORENTZIAN = "lorentzian"
    SPLIT_LORENTZIAN = "split_lorentzian"
    PLATEAU = "plateau"


class LossConvention(enum.Enum):
    """Normalization of the integrated spin loss.

    ``PAPER_4PI`` uses the published identity  integral(kappa_s) = 4 pi
    g_ens^2; ``DERIVED_8PI`` uses the value obtained by direct quadrature of
    the kappa_s line shape, which is twice that.  Both are carried so either
    bookkeeping reproduces its own round trip.
    """

    PAPER_4PI = "paper"
    DERIVED_8PI = "derived"

    @classmethod
    def from_string(cls, name: str) -> "LossConvention":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise DataFormatError(
                f"unknown loss convention {name!r}: expected 'paper' or 'derived'"
            ) from None


@dataclass(frozen=True)
class SpinSpecies:
    """A candidate paramagnetic species with a linear Zeeman line.

    omega_s(B0) = delta_0 + g mu_B B0 / hbar.  ``gamma_line`` is the full
    spectral linewidth Gamma in rad/s.  ``hyperfine_A`` (rad/s), when set,
    marks a hydrogen-like species whose electron line splits into two
    satellites separated by roughly A; such species contribute one feature
    per satellite transition.  ``shape`` selects the field-domain template
    used in multipeak fitting.
    """

    g: float
    delta_0: float
    gamma_line: float
    shape: LineShape = LineShape.LORENTZIAN
    hyperfine_A: float | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValueError(f"g-factor must be positive, got {self.g}")
        if not (math.isfinite(self.delta_0) and self.delta_0 >= 0):
            raise ValueError(f"delta_0 must be non-negative, got {self.delta_0}")
        if not (math.isfinite(self.gamma_line) and self.gamma_line > 0):
            raise ValueError(f"gamma_line must be positive, got {self.gamma_line}")
        if self.hyperfine_A is not None and not (
            math.isfinite(self.hyperfine_A) and self.hyperfine_A > 0
        ):
            raise ValueError(f"hyperfine_A must be positive, got {self.hyperfine_A}")
        if not isinstance(self.shape, LineShape):
            raise ValueError(f"shape must be a LineShape, got {self.shape!r}")


@dataclass(frozen=True)
class FieldSweepPoint:
    """One magnetic-field point of a sweep: applied field plus its fit."""

    b0: float
    fit: ResonatorFit

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b0) and self.b0 >= 0):
            raise ValueError(f"b0 must be non-negative, got {self.b0}")
        if not isinstance(self.fit, ResonatorFit):
            raise ValueError("fit must be a ResonatorFit")


@dataclass(frozen=True)
class LossCurve:
    """Spin-induced loss rate kappa_s versus applied field.

    ``kappa_s`` is the angular loss rate in rad/s after baseline
    subtraction (it may dip below zero through noise).  ``sigma`` holds the
    per-point one-sigma uncertainties, or None when unknown.
    ``omega_r_ref`` is the angular probe frequency the field axis refers to;
    rescaling the axis to a different probe frequency updates it.
    """

    b0: np.ndarray
    kappa_s: np.ndarray
    omega_r_ref: float
    sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        b0 = np.asarray(self.b0, dtype=float).copy()
        ks = np.asarray(self.kappa_s, dtype=float).copy()
        if b0.ndim != 1 or ks.ndim != 1 or b0.size != ks.size:
            raise ValueError("b0 and kappa_s must be 1-d arrays of equal length")
        if b0.size < 1:
            raise ValueError("loss curve must contain at least one point")
        if not np.all(np.isfinite(b0)) or not np.all(np.isfinite(ks)):
            raise ValueError("loss curve contains non-finite values")
        if b0.size > 1 and not np.all(np.diff(b0) > 0):
            raise ValueError("b0 must be strictly increasing")
        if not (math.isfinite(self.omega_r_ref) and self.omega_r_ref > 0):
            raise ValueError(f"omega_r_ref must be positive, got {self.omega_r_ref}")
        sigma = self.sigma
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float).copy()
            if sigma.shape != b0.shape:
                raise ValueError("sigma must match b0 in shape")
            if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
                raise ValueError("sigma must be finite and non-negative")
            sigma.setflags(write=False)
        b0.setflags(write=False)
        ks.setflags(write=False)
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "kappa_s", ks)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self) -> int:
        return int(self.b0.size)


@dataclass(frozen=True)
class FeatureFit:
    """One fitted spectral feature of a loss curve.

    ``peak_height`` is the template amplitude in rad/s, ``center_field`` the
    line center (for the plateau template: the onset) and ``width_field``
    the half width at half maximum (for the plateau: the logistic softness),
    both in tesla.  ``area`` is the analytic template area divided by
    ``omega_r_ref`` and therefore carries units of tesla; for the plateau it
    covers ``fit_window`` only.  Split templates additionally record the two
    half widths.
    """

    species_label: str
    shape: LineShape
    peak_height: float
    center_field: float
    width_field: float
    area: float
    omega_r_ref: float
    fit_window: tuple[float, float]
    width_left: float | None = None
    width_right: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.shape, LineShape):
            raise ValueError(f"shape must be a LineShape, got {self.shape!r}")
        if not (math.isfinite(self.peak_height) and self.peak_height >= 0):
            raise ValueError(f"peak_height must be non-negative, got {self.peak_height}")
        if not (math.isfinite(self.center_field)):
            raise ValueError("center_field must be finite")
        if not (math.isfinite(self.width_field) and self.width_field > 0):
            raise ValueError(f"width_field must be positive, got {self.width_field}")
        if not (math.isfinite(self.area) and self.area >= 0):
            raise ValueError(f"area must be non-negative, got {self.area}")
        if not (math.isfinite(self.omega_r_ref) and self.omega_r_ref > 0):
            raise ValueError("omega_r_ref must be positive")
        lo, hi = self.fit_window
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"fit_window must be an increasing pair, got {self.fit_window}")
        object.__setattr__(self, "fit_window", (float(lo), float(hi)))
        pair = (self.width_left, self.width_right)
        if (pair[0] is None) != (pair[1] is None):
            raise ValueError("width_left and width_right must be given together")
        if pair[0] is not None:
            for v in pair:
                if not (math.isfinite(v) and v > 0):
                    raise ValueError("split half widths must be positive")


@dataclass(frozen=True)
class DiagramPoint:
    """A feature position in the frequency-field plane.

    ``omega_r`` is the probe frequency (rad/s) at which the feature was
    observed, ``b_feature`` the fitted center field and ``sigma_b`` its
    one-sigma uncertainty (tesla).
    """

    omega_r: float
    b_feature: float
    sigma_b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega_r) and self.omega_r > 0):
            raise ValueError("omega_r must be positive")
        if not math.isfinite(self.b_feature):
            raise ValueError("b_feature must be finite")
        if not (math.isfinite(self.sigma_b) and self.sigma_b >= 0):
            raise ValueError("sigma_b must be non-negative")


@dataclass(frozen=True)
class ParticipationRow:
    """Filling factors of one resonator for the two surface layers.

    ``p_f`` is the participation of the full surface layer, ``p_sc`` the
    participation restricted to the superconductor-adjacent part.  Both are
    dimensionless in (0, 1].
    """

    resonator_id: str
    p_f: float
    p_sc: float

    def __post_init__(self) -> None:
        if not self.resonator_id:
            raise ValueError("resonator_id must be non-empty")
        for name in ("p_f", "p_sc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


@dataclass(frozen=True)
class ParticipationTable:
    rows: tuple[ParticipationRow, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        ids = [r.resonator_id for r in rows]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate resonator_id in participation table")
        object.__setattr__(self, "rows", rows)

    def lookup(self, resonator_id: str) -> ParticipationRow:
        for r in self.rows:
            if r.resonator_id == resonator_id:
                return r
        raise KeyError(f"resonator_id {resonator_id!r} not in participation table")
