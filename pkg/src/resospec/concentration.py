"""Surface spin concentration from feature areas versus participation.

The field-integrated loss of one Zeeman line scales linearly with the
surface-layer participation ratio p of the resonator mode:

    integral( kappa_s / omega_r ) dB0  =  K h mu_0 c gamma_e |<1|sigma_x/2|2>|^2 p

with gamma_e = g mu_B / hbar the gyromagnetic ratio, matrix element 1/4 for
a spin 1/2, and K the bookkeeping constant of the chosen loss convention
(1 under PAPER_4PI, 2 under DERIVED_8PI).  Regressing area against p over
several resonators therefore yields the volume concentration c from the
slope; multiplying by the assumed layer thickness gives the areal density.

The regression keeps a free intercept as a systematic check: a slope-only
line through the origin would hide participation-independent loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CONSTANTS, LossConvention, PhysicalConstants
from .spinmodel import SPIN_HALF_MATRIX_ELEMENT_SQ, effective_gyro

DEFAULT_LAYER_THICKNESS = 3e-9  # meters


@dataclass(frozen=True)
class RegressionResult:
    """Weighted least-squares line a + b p with covariance and fit quality."""

    slope: float
    intercept: float
    cov: np.ndarray
    r_squared: float
    n_points: int

    @property
    def sigma_slope(self) -> float:
        return math.sqrt(max(float(self.cov[1, 1]), 0.0))

    @property
    def sigma_intercept(self) -> float:
        return math.sqrt(max(float(self.cov[0, 0]), 0.0))

    @property
    def intercept_consistent_with_zero(self) -> bool:
        """True when the intercept is within two sigma of zero."""
        s = self.sigma_intercept
        return abs(self.intercept) <= 2.0 * s if s > 0 else self.intercept == 0.0


def regress_area_vs_participation(
    participations: np.ndarray,
    areas: np.ndarray,
    sigma_areas: np.ndarray | None = None,
) -> RegressionResult:
    """Weighted linear regression of feature area against participation."""
    p = np.asarray(participations, dtype=float)
    a = np.asarray(areas, dtype=float)
    if p.ndim != 1 or p.shape != a.shape:
        raise ValueError("participations and areas must be 1-d arrays of equal length")
    if p.size < 3:
        raise ValueError(f"need at least 3 resonators for the regression, got {p.size}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise ValueError("regression inputs contain non-finite values")
    if np.ptp(p) <= 0:
        raise ValueError("participation values are all identical; slope is undefined")
    if sigma_areas is not None:
        s = np.asarray(sigma_areas, dtype=float)
        if s.shape != p.shape or np.any(~np.isfinite(s)) or np.any(s < 0):
            raise ValueError("sigma_areas must be finite, non-negative, same length")
        weighted = bool(np.all(s > 0))
    else:
        weighted = False

    wt = 1.0 / s**2 if weighted else np.ones_like(p)
    x_mat = np.column_stack((np.ones_like(p), p))
    xtwx = x_mat.T @ (wt[:, None] * x_mat)
    beta = np.linalg.solve(xtwx, x_mat.T @ (wt * a))
    cov = np.linalg.inv(xtwx)
    resid = a - x_mat @ beta
    if not weighted:
        dof = max(p.size - 2, 1)
        cov = cov * float(wt @ resid**2) / dof
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RegressionResult(
        slope=float(beta[1]),
        intercept=float(beta[0]),
        cov=cov,
        r_squared=r2,
        n_points=int(p.size),
    )


@dataclass(frozen=True)
class ConcentrationResult:
    """Volume and surface concentrations derived from a regression slope."""

    volume_m3: float
    sigma_volume_m3: float
    surface_m2: float
    sigma_surface_m2: float
    layer_thickness: float
    convention: LossConvention

    @property
    def surface_per_cm2(self) -> float:
        return self.surface_m2 * 1e-4

    @property
    def sigma_surface_per_cm2(self) -> float:
        return self.sigma_surface_m2 * 1e-4


def concentration_from_slope(
    slope: float,
    g_value: float,
    layer_thickness: float = DEFAULT_LAYER_THICKNESS,
    convention: LossConvention = LossConvention.PAPER_4PI,
    sigma_slope: float = 0.0,
    constants: PhysicalConstants = CONSTANTS,
) -> ConcentrationResult:
    """Convert an area-vs-participation slope (tesla) into concentrations.

    c = slope / (K h mu_0 gamma_e |<1|sigma_x/2|2>|^2); the DERIVED_8PI
    convention doubles the denominator constant K, halving the inferred
    concentration for the same slope.
    """
    if not (math.isfinite(slope) and slope > 0):
        raise ValueError(
            f"slope must be positive to carry a concentration, got {slope}"
        )
    if not (math.isfinite(layer_thickness) and layer_thickness > 0):
        raise ValueError(f"layer_thickness must be positive, got {layer_thickness}")
    if not (math.isfinite(sigma_slope) and sigma_slope >= 0):
        raise ValueError("sigma_slope must be non-negative")
    gamma_e = effective_gyro(g_value, constants)
    denom = constants.h * constants.mu_0 * gamma_e * SPIN_HALF_MATRIX_ELEMENT_SQ
    if convention is LossConvention.DERIVED_8PI:
        denom *= 2.0
    volume = slope / denom
    sigma_volume = sigma_slope / denom
    return ConcentrationResult(
        volume_m3=volume,
        sigma_volume_m3=sigma_volume,
        surface_m2=volume * layer_thickness,
        sigma_surface_m2=sigma_volume * layer_thickness,
        layer_thickness=layer_thickness,
        convention=convention,
    )
