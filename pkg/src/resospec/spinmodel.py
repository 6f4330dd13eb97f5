"""Spin-bath physics: Zeeman lines, hyperfine structure, resonator loading.

A dilute spin ensemble detuned by (omega_s - omega_r) from the resonator
adds a loss rate and a dispersive pull

    kappa_s = 4 g_ens^2 Gamma             /  ((omega_s - omega_r)^2 + Gamma^2/4)
    delta_s = 4 g_ens^2 (omega_s - omega_r) / ((omega_s - omega_r)^2 + Gamma^2/4)

valid in the small-cooperativity regime 4 g_ens^2 / (kappa Gamma) << 1.
Here Gamma is the full spectral linewidth of the ensemble and g_ens the
collective coupling, both angular (rad/s).

The loaded steady-state response keeps the sign convention of the bare
resonance model (denominator +2i(omega - omega_r)), so g_ens -> 0 reduces
exactly to the unloaded response:

    S(omega) = 1 - r kappa_c f / (kappa + kappa_s + 2i(omega - omega_r) - 2i delta_s)

with r = 2, f = 1 for reflection and r = 1, f = exp(i phi_0) for hanger
geometry.

Hydrogen-like species are handled with the full S=1/2, I=1/2 hyperfine
Hamiltonian; transitions are selected by their electron-spin-flip matrix
element rather than by a hardcoded level pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (
    CONSTANTS,
    TWO_PI,
    FitError,
    LossConvention,
    PhysicalConstants,
    ProbeGeometry,
    SpinSpecies,
)

_COOPERATIVITY_LIMIT = 0.1

# Spin-1/2 operators and the electron Pauli-x ladder used for transition
# weights; |<1| sigma_x/2 |2>|^2 = 1/4 for a free spin-1/2.
_SX = np.array([[0.0, 0.5], [0.5, 0.0]])
_SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
_SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
_ID = np.eye(2)
SPIN_HALF_MATRIX_ELEMENT_SQ = 0.25


def effective_gyro(g: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Gyromagnetic ratio g mu_B / hbar in rad/(s T)."""
    if not (math.isfinite(g) and g > 0):
        raise ValueError(f"g-factor must be positive, got {g}")
    return g * constants.mu_B / constants.hbar


def zeeman_frequency(
    species: SpinSpecies, b0: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Transition frequency omega_s = delta_0 + g mu_B B0 / hbar (rad/s)."""
    if not (math.isfinite(b0) and b0 >= 0):
        raise ValueError(f"b0 must be non-negative, got {b0}")
    return species.delta_0 + effective_gyro(species.g, constants) * b0


def field_for_frequency(
    species: SpinSpecies, omega: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Invert the Zeeman line: the field at which the species crosses omega."""
    if not (math.isfinite(omega) and omega > 0):
        raise ValueError(f"omega must be positive, got {omega}")
    if omega <= species.delta_0:
        raise ValueError(
            f"omega/2pi = {omega / TWO_PI:.6g} Hz is at or below the zero-field "
            f"splitting {species.delta_0 / TWO_PI:.6g} Hz; the line is never crossed"
        )
    return (omega - species.delta_0) / effective_gyro(species.g, constants)


def kappa_s(omega_s, omega_r: float, g_ens: float, gamma: float):
    """Spin-induced loss rate; accepts scalar or array omega_s."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not (math.isfinite(g_ens) and g_ens >= 0):
        raise ValueError(f"g_ens must be non-negative, got {g_ens}")
    delta = np.asarray(omega_s, dtype=float) - omega_r
    out = 4.0 * g_ens * g_ens * gamma / (delta * delta + gamma * gamma / 4.0)
    return out if out.ndim else float(out)


def delta_s(omega_s, omega_r: float, g_ens: float, gamma: float):
    """Spin-induced dispersive pull, the Kramers-Kronig partner of kappa_s.

    Odd in the detuning, extremal (value 4 g_ens^2/Gamma) at
    |omega_s - omega_r| = Gamma/2; delta_s/kappa_s = (omega_s - omega_r)/Gamma.
    """
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not (math.isfinite(g_ens) and g_ens >= 0):
        raise ValueError(f"g_ens must be non-negative, got {g_ens}")
    delta = np.asarray(omega_s, dtype=float) - omega_r
    out = 4.0 * g_ens * g_ens * delta / (delta * delta + gamma * gamma / 4.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SpinBathParams:
    """One spin ensemble seen by the resonator at a fixed field point."""

    g_ens: float
    gamma_line: float
    omega_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g_ens) and self.g_ens >= 0):
            raise ValueError(f"g_ens must be non-negative, got {self.g_ens}")
        if not (math.isfinite(self.gamma_line) and self.gamma_line > 0):
            raise ValueError(f"gamma_line must be positive, got {self.gamma_line}")
        if not (math.isfinite(self.omega_s) and self.omega_s >= 0):
            raise ValueError(f"omega_s must be non-negative, got {self.omega_s}")

    def cooperativity(self, kappa: float) -> float:
        """4 g_ens^2 / (kappa Gamma); the model assumes this stays < 0.1."""
        if not (math.isfinite(kappa) and kappa > 0):
            raise ValueError(f"kappa must be positive, got {kappa}")
        return 4.0 * self.g_ens * self.g_ens / (kappa * self.gamma_line)


def resonator_response(
    omega,
    omega_r: float,
    kappa_i: float,
    kappa_c: float,
    geometry: ProbeGeometry,
    phi_0: float = 0.0,
):
    """Unloaded steady-state response S(omega) in rate form."""
    return combined_response(omega, omega_r, kappa_i, kappa_c, (), geometry, phi_0)


def combined_response(
    omega,
    omega_r: float,
    kappa_i: float,
    kappa_c: float,
    baths,
    geometry: ProbeGeometry,
    phi_0: float = 0.0,
    extra_kappa: float = 0.0,
):
    """Response with any number of spin baths loading the resonator.

    Bath susceptibilities add linearly in the perturbative regime; each bath
    must individually satisfy the cooperativity bound.  ``extra_kappa``
    accounts for additional field-activated internal loss (e.g. wire bonds)
    that carries no dispersive part.
    """
    if not (math.isfinite(omega_r) and omega_r > 0):
        raise ValueError(f"omega_r must be positive, got {omega_r}")
    if not (math.isfinite(kappa_i) and kappa_i > 0):
        raise ValueError(f"kappa_i must be positive, got {kappa_i}")
    if not (math.isfinite(kappa_c) and kappa_c > 0):
        raise ValueError(f"kappa_c must be positive, got {kappa_c}")
    if extra_kappa < 0:
        raise ValueError("extra_kappa must be non-negative")
    kappa = kappa_i + kappa_c
    ks_total = 0.0
    ds_total = 0.0
    for bath in baths:
        coop = bath.cooperativity(kappa)
        if coop >= _COOPERATIVITY_LIMIT:
            raise ValueError(
                f"cooperativity {coop:.3g} >= {_COOPERATIVITY_LIMIT}: the "
                "perturbative spin-loading model does not apply"
            )
        ks_total += kappa_s(bath.omega_s, omega_r, bath.g_ens, bath.gamma_line)
        ds_total += delta_s(bath.omega_s, omega_r, bath.g_ens, bath.gamma_line)
    w = np.asarray(omega, dtype=float)
    denom = (
        kappa
        + ks_total
        + extra_kappa
        + 2j * (w - omega_r)
        - 2j * ds_total
    )
    if geometry.is_reflection:
        num = 2.0 * kappa_c
    else:
        num = kappa_c * np.exp(1j * phi_0)
    out = 1.0 - num / denom
    return out if out.ndim else complex(out)


def spin_loaded_response(
    omega,
    omega_r: float,
    kappa_i: float,
    kappa_c: float,
    bath: SpinBathParams,
    geometry: ProbeGeometry,
    phi_0: float = 0.0,
):
    """Response of a resonator loaded by a single spin ensemble."""
    return combined_response(
        omega, omega_r, kappa_i, kappa_c, (bath,), geometry, phi_0
    )


def integrated_loss(
    g_ens: float, omega_r: float, convention: LossConvention = LossConvention.PAPER_4PI
) -> float:
    """Frequency-integrated loss of one line, in rad/s.

    DERIVED_8PI returns the direct quadrature of the kappa_s line shape
    divided by omega_r, 8 pi g_ens^2 / omega_r; PAPER_4PI returns half that,
    matching the published normalization.
    """
    if not (math.isfinite(g_ens) and g_ens >= 0):
        raise ValueError(f"g_ens must be non-negative, got {g_ens}")
    if not (math.isfinite(omega_r) and omega_r > 0):
        raise ValueError(f"omega_r must be positive, got {omega_r}")
    factor = 8.0 * math.pi if convention is LossConvention.DERIVED_8PI else 4.0 * math.pi
    return factor * g_ens * g_ens / omega_r


def ensemble_coupling(
    concentration: float,
    g_value: float,
    omega_r: float,
    participation: float,
    convention: LossConvention,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Collective coupling g_ens (rad/s) of a uniform volume concentration.

    Under DERIVED_8PI this is the magnetic-dipole chain
    g_ens^2 = c gamma_e^2 |<1|sigma_x/2|2>|^2 (mu_0 hbar omega_r / 2) p;
    under PAPER_4PI the value is scaled so that the integrated loss under
    that bookkeeping reproduces the same concentration.
    """
    if not (math.isfinite(concentration) and concentration >= 0):
        raise ValueError(f"concentration must be non-negative, got {concentration}")
    if not (math.isfinite(participation) and 0 < participation <= 1):
        raise ValueError(f"participation must lie in (0, 1], got {participation}")
    gamma_e = effective_gyro(g_value, constants)
    g2 = (
        concentration
        * gamma_e
        * gamma_e
        * SPIN_HALF_MATRIX_ELEMENT_SQ
        * (constants.mu_0 * constants.hbar * omega_r / 2.0)
        * participation
    )
    if convention is LossConvention.PAPER_4PI:
        g2 *= 0.5
    return math.sqrt(g2)


@dataclass(frozen=True)
class HyperfineSystem:
    """An electron spin 1/2 coupled to a nuclear spin 1/2.

    ``A`` is the hyperfine constant (rad/s), ``g_e`` the electron g-factor
    and ``g_n_term`` the nuclear Zeeman coefficient in rad/(s T); the
    Hamiltonian is

        H = hbar A S.I + g_e mu_B B0 S_z - hbar g_n_term B0 I_z.
    """

    A: float
    g_e: float = 2.0
    g_n_term: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.A) and self.A > 0):
            raise ValueError(f"A must be positive, got {self.A}")
        if not (math.isfinite(self.g_e) and self.g_e > 0):
            raise ValueError(f"g_e must be positive, got {self.g_e}")
        if not math.isfinite(self.g_n_term):
            raise ValueError("g_n_term must be finite")


def _hyperfine_hamiltonian(
    hf: HyperfineSystem, b0: float, constants: PhysicalConstants
) -> np.ndarray:
    s_dot_i = (
        np.kron(_SX, _SX) + np.kron(_SY, _SY) + np.kron(_SZ, _SZ)
    )
    h = constants.hbar * hf.A * s_dot_i
    h = h + hf.g_e * constants.mu_B * b0 * np.kron(_SZ, _ID)
    h = h - constants.hbar * hf.g_n_term * b0 * np.kron(_ID, _SZ)
    return h


def breit_rabi_levels(
    hf: HyperfineSystem, b0: float, constants: PhysicalConstants = CONSTANTS
) -> np.ndarray:
    """The four hyperfine energy levels in joule, ascending.

    At zero field these are the singlet at -(3/4) hbar A and the threefold
    triplet at +(1/4) hbar A.
    """
    if not (math.isfinite(b0) and b0 >= 0):
        raise ValueError(f"b0 must be non-negative, got {b0}")
    vals = np.linalg.eigvalsh(_hyperfine_hamiltonian(hf, b0, constants))
    return np.sort(vals.real)


def hyperfine_transitions(
    hf: HyperfineSystem, b0: float, constants: PhysicalConstants = CONSTANTS
) -> list[tuple[float, float]]:
    """All level pairs as (angular frequency, electron-flip weight).

    The weight is |<i| sigma_x/2 (x) 1 |j>|^2 evaluated on the field-dressed
    eigenstates; it approaches 1/4 for the two allowed electron-spin-flip
    transitions at high field.
    """
    if not (math.isfinite(b0) and b0 >= 0):
        raise ValueError(f"b0 must be non-negative, got {b0}")
    h = _hyperfine_hamiltonian(hf, b0, constants)
    vals, vecs = np.linalg.eigh(h)
    sigma_x_half = np.kron(2.0 * _SX, _ID) / 2.0
    out = []
    for i in range(4):
        for j in range(i + 1, 4):
            elem = vecs[:, i].conj() @ (sigma_x_half @ vecs[:, j])
            freq = (vals[j] - vals[i]) / constants.hbar
            out.append((float(abs(freq)), float(abs(elem) ** 2)))
    return out


def _satellite_pair(
    hf: HyperfineSystem, b0: float, constants: PhysicalConstants
) -> tuple[float, float]:
    """Frequencies (low, high) of the two strongest transitions at b0."""
    table = hyperfine_transitions(hf, b0, constants)
    table.sort(key=lambda t: t[1], reverse=True)
    f1, f2 = table[0][0], table[1][0]
    return (f1, f2) if f1 <= f2 else (f2, f1)


def hyperfine_satellite_fields(
    hf: HyperfineSystem,
    omega_r: float,
    b_max: float = 2.0,
    constants: PhysicalConstants = CONSTANTS,
) -> tuple[float, float]:
    """Fields at which the two strong hyperfine satellites cross omega_r.

    Returns (B_low, B_high): the higher-frequency transition resonates at
    the lower field.  Roots are bracketed on a grid over (0, b_max] and
    polished with Brent's method.
    """
    if not (math.isfinite(omega_r) and omega_r > 0):
        raise ValueError(f"omega_r must be positive, got {omega_r}")
    if not (math.isfinite(b_max) and b_max > 0):
        raise ValueError(f"b_max must be positive, got {b_max}")

    def f_high(b):
        return _satellite_pair(hf, b, constants)[1] - omega_r

    def f_low(b):
        return _satellite_pair(hf, b, constants)[0] - omega_r

    grid = np.linspace(1e-5, b_max, 257)
    fields = []
    for func in (f_high, f_low):
        vals = [func(b) for b in grid]
        root = None
        for k in range(len(grid) - 1):
            if vals[k] == 0.0:
                root = float(grid[k])
                break
            if vals[k] * vals[k + 1] < 0:
                root = float(brentq(func, grid[k], grid[k + 1], xtol=1e-12))
                break
        if root is None:
            raise FitError(
                f"no satellite transition crosses omega/2pi = "
                f"{omega_r / TWO_PI:.6g} Hz below {b_max} T"
            )
        fields.append(root)
    b_low, b_high = fields
    return b_low, b_high


def spin_temperature(
    amp_low_field_peak: float,
    amp_high_field_peak: float,
    hf: HyperfineSystem,
    omega_r: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Spin temperature from the hyperfine satellite amplitude ratio.

    The satellites are fed by the two lowest levels, so their amplitude
    ratio is the Boltzmann factor  amp_high/amp_low = exp(-dE / k_B T)
    with dE the splitting of the two lower levels at the mean satellite
    field.
    """
    for name, v in (
        ("amp_low_field_peak", amp_low_field_peak),
        ("amp_high_field_peak", amp_high_field_peak),
    ):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")
    if amp_high_field_peak == amp_low_field_peak:
        raise ValueError(
            "equal satellite amplitudes imply an infinite spin temperature"
        )
    ratio = amp_high_field_peak / amp_low_field_peak
    if ratio > 1.0:
        raise ValueError(
            "higher-field satellite is stronger than the lower-field one; "
            "the level ordering would imply a negative spin temperature"
        )
    b_low, b_high = hyperfine_satellite_fields(hf, omega_r, constants=constants)
    levels = breit_rabi_levels(hf, 0.5 * (b_low + b_high), constants)
    delta_e = float(levels[1] - levels[0])
    return -delta_e / (constants.k_B * math.log(ratio))


def satellite_amplitude_ratio(
    temperature: float,
    hf: HyperfineSystem,
    omega_r: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Forward model for spin_temperature: amp_high/amp_low at temperature."""
    if not (math.isfinite(temperature) and temperature > 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    b_low, b_high = hyperfine_satellite_fields(hf, omega_r, constants=constants)
    levels = breit_rabi_levels(hf, 0.5 * (b_low + b_high), constants)
    delta_e = float(levels[1] - levels[0])
    return math.exp(-delta_e / (constants.k_B * temperature))
