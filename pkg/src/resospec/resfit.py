"""Complex resonance fitting: delay removal, circle fit, phase fit, Q factors.

The pipeline follows the standard circle-fit method for microwave
resonators (Probst et al., Rev. Sci. Instrum. 86, 024706 (2015)):

1. estimate and remove the cable delay tau,
2. fit a circle to the delay-corrected data in the complex plane using the
   algebraic Taubin fit (G. Taubin, IEEE PAMI 13, 1115 (1991)),
3. fit the phase of the data translated to the circle center against
   theta(omega) = theta_0 +/- 2 arctan[2 Q_l (omega/omega_r - 1)],
4. locate the off-resonant point from the circle geometry, normalize, and
   convert the circle radius to coupling and internal quality factors.

Reflection geometry: the normalized circle has diameter 2 Q_l/Q_c, so
Q_c = Q_l / radius.  Hanger geometry: diameter Q_l/Q_c, Q_c = Q_l /
(2 radius), and the impedance-mismatch angle phi_0 is the rotation of the
circle about the off-resonant point.  The internal loss follows from
1/Q_i = 1/Q_l - 1/Q_c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import least_squares

from .core import (
    TWO_PI,
    ComplexTrace,
    DataFormatError,
    FitError,
    ProbeGeometry,
    ResonatorFit,
)

_MIN_FIT_POINTS = 16
# A real resonance leaves the centered-data phase within a fraction of a
# radian of the arctan model even at poor SNR; a noise blob scatters flat.
_MAX_PHASE_RMS = 0.5


@dataclass(frozen=True)
class NormalizationParams:
    """Cable delay and off-resonant reference removed from a raw trace."""

    tau: float
    s_inf: complex

    def __post_init__(self) -> None:
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if not (
            math.isfinite(self.s_inf.real)
            and math.isfinite(self.s_inf.imag)
            and abs(self.s_inf) > 0
        ):
            raise ValueError("s_inf must be finite and non-zero")


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % TWO_PI - math.pi


def _wing_slices(n: int, frac: float = 0.2) -> tuple[slice, slice]:
    k = max(int(round(frac * n)), 3)
    k = min(k, n // 2)
    return slice(0, k), slice(n - k, n)


def _taubin(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Algebraic Taubin circle fit; returns (cx, cy, radius)."""
    xm = float(x.mean())
    ym = float(y.mean())
    xr = x - xm
    yr = y - ym
    z = xr * xr + yr * yr
    zm = float(z.mean())
    if zm <= 0.0:
        raise FitError("circle fit is degenerate: all points coincide")
    scale = math.sqrt(zm)
    zr = (z - zm) / (2.0 * scale)
    m = np.column_stack((zr, xr, yr))
    _, _, vt = np.linalg.svd(m, full_matrices=False)
    a = vt[2]
    a0 = a[0] / (2.0 * scale)
    a3 = -zm * a0
    disc = a[1] * a[1] + a[2] * a[2] - 4.0 * a0 * a3
    if a0 == 0.0 or disc <= 0.0:
        raise FitError("circle fit is degenerate: points are collinear")
    radius = math.sqrt(disc) / (2.0 * abs(a0))
    if radius > 1e8 * scale:
        raise FitError(
            "circle fit is degenerate: points are collinear within tolerance"
        )
    cx = -a[1] / (2.0 * a0) + xm
    cy = -a[2] / (2.0 * a0) + ym
    return cx, cy, radius


def circle_fit(points: ComplexTrace) -> tuple[complex, float, float]:
    """Fit a circle to complex samples; returns (center, radius, sigma_radius).

    sigma_radius is the RMS of the radial residuals divided by sqrt(N), a
    first-order estimate of the standard error of the fitted radius.
    """
    if len(points) < 8:
        raise DataFormatError(
            f"circle fit needs at least 8 points, got {len(points)}"
        )
    x = points.s.real
    y = points.s.imag
    cx, cy, radius = _taubin(x, y)
    resid = np.hypot(x - cx, y - cy) - radius
    sigma = float(np.sqrt(np.mean(resid * resid)) / math.sqrt(len(points)))
    return complex(cx, cy), radius, sigma


def _wing_phase_slope(freq_hz: np.ndarray, s: np.ndarray) -> float:
    """Mean d(phase)/df over the two wings, in rad/Hz."""
    n = s.size
    left, right = _wing_slices(n)
    slopes = []
    for sl in (left, right):
        ph_raw = np.angle(s[sl])
        jumps = np.angle(np.exp(1j * np.diff(ph_raw)))
        if np.any(np.abs(jumps) > 0.95 * math.pi):
            raise FitError(
                "phase-unwrap ambiguity: adjacent wing samples jump by more "
                "than pi; the trace is undersampled for its cable delay"
            )
        ph = np.unwrap(ph_raw)
        slopes.append(np.polyfit(freq_hz[sl], ph, 1)[0])
    return float(np.mean(slopes))


def _refine_delay(trace: ComplexTrace, tau0: float) -> float:
    """Polish tau by minimizing the scatter around the best-fit circle.

    With the correct delay removed an ideal resonance lies exactly on a
    circle; a residual delay winds it into a spiral.  The wing estimate
    carries a bias from the resonance tail, so the radial residual of a
    Taubin fit is minimized over tau instead.  A parabolic vertex step
    follows the solver because the re-fitted circle absorbs the first-order
    spiral, leaving a cost quadratic in the residual delay that the
    finite-difference solver localizes only to its step size.
    """
    w = trace.freq
    s = trace.s

    def residuals(x: np.ndarray) -> np.ndarray:
        st = s * np.exp(-1j * w * (x[0] * 1e-9))
        cx, cy, radius = _taubin(st.real, st.imag)
        return np.hypot(st.real - cx, st.imag - cy) - radius

    def cost(tau_ns: float) -> float:
        r = residuals(np.array([tau_ns]))
        return float(np.sqrt(np.mean(r * r)))

    try:
        res = least_squares(
            residuals,
            x0=[tau0 * 1e9],
            method="trf",
            diff_step=1e-5,
            x_scale=[10.0],
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=400,
        )
        t = float(res.x[0])
    except (FitError, np.linalg.LinAlgError):
        return tau0
    try:
        c_best = cost(t)
        for h in (0.05, 0.002):
            c_lo, c_hi = cost(t - h), cost(t + h)
            denom = c_lo - 2.0 * c_best + c_hi
            if denom <= 0.0:
                continue  # flat within rounding; already at the floor
            step = 0.5 * h * (c_lo - c_hi) / denom
            if abs(step) > h:
                continue
            c_new = cost(t + step)
            if c_new < c_best:
                t, c_best = t + step, c_new
    except (FitError, np.linalg.LinAlgError):
        pass
    tau = t * 1e-9
    return tau if math.isfinite(tau) else tau0


def estimate_delay(trace: ComplexTrace) -> float:
    """Estimate the cable delay tau in seconds.

    Base estimate: least-squares slope of the unwrapped phase over the outer
    20% of samples on each side, averaged.  The estimate is then refined by
    minimizing the circle-fit residual, which removes the bias a resonance
    tail leaves in the wing slope; on a featureless trace the refinement
    backs off to the wing estimate.
    """
    if len(trace) < _MIN_FIT_POINTS:
        raise DataFormatError(
            f"trace too short for delay estimation: {len(trace)} points "
            f"(need {_MIN_FIT_POINTS})"
        )
    freq_hz = trace.freq / TWO_PI
    slope = _wing_phase_slope(freq_hz, trace.s)
    tau0 = slope / TWO_PI
    return _refine_delay(trace, tau0)


def normalize(trace: ComplexTrace, norm: NormalizationParams) -> ComplexTrace:
    """Remove delay and off-resonant reference: s * exp(-i omega tau) / s_inf."""
    s = trace.s * np.exp(-1j * trace.freq * norm.tau) / norm.s_inf
    return ComplexTrace(freq=trace.freq, s=s)


def estimate_s_inf(trace: ComplexTrace) -> complex:
    """Crude off-resonant level: mean of the 5% outermost samples.

    Useful as a starting value; the fit pipeline replaces it with the
    off-resonant point constructed from the circle geometry, which does not
    suffer from the finite-span bias of the wing mean.
    """
    n = len(trace)
    k = max(int(round(0.025 * n)), 1)
    return complex(np.mean(np.concatenate((trace.s[:k], trace.s[-k:]))))


def _phase_residuals(
    params: np.ndarray, w: np.ndarray, psi: np.ndarray, sign: float
) -> np.ndarray:
    omega_r, q_l, theta_0 = params
    return theta_0 + 2.0 * sign * np.arctan(2.0 * q_l * (w / omega_r - 1.0)) - psi


def _phase_fit_full(
    centered: ComplexTrace,
) -> tuple[float, float, float, float, float]:
    """Fit the centered-data phase; returns (omega_r, Q_l, theta_0, sign, rms).

    ``sign`` is the winding direction of the resonance circle: -1 for the
    convention in which the denominator carries +2i Q_l (omega/omega_r - 1),
    +1 for conjugated data.  ``rms`` is the per-point RMS phase residual of
    the converged fit, in radians.
    """
    w = centered.freq
    psi = np.unwrap(np.angle(centered.s))
    sign = -1.0 if psi[-1] - psi[0] < 0 else 1.0

    dpsi = np.gradient(psi, w)
    if w.size >= 32:
        dpsi = gaussian_filter1d(dpsi, sigma=2.0)
    i0 = int(np.argmax(np.abs(dpsi)))
    omega_r0 = float(w[i0])
    q_l0 = abs(dpsi[i0]) * omega_r0 / 4.0
    span = float(w[-1] - w[0])
    q_l0 = min(max(q_l0, 0.2 * omega_r0 / span), 1e4 * omega_r0 / span)
    theta_00 = float(np.interp(omega_r0, w, psi))

    best = None
    for q_scale in (1.0, 0.3, 3.0):
        res = least_squares(
            _phase_residuals,
            x0=[omega_r0, q_l0 * q_scale, theta_00],
            args=(w, psi, sign),
            x_scale=[omega_r0, q_l0, 1.0],
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        if best is None or res.cost < best.cost:
            best = res
        if res.cost < 1e-16 * w.size:
            break
    if best is None or not np.all(np.isfinite(best.x)):
        raise FitError("phase fit did not converge")
    omega_r, q_l, theta_0 = (float(v) for v in best.x)
    if not (w[0] <= omega_r <= w[-1]):
        raise FitError(
            "no resonance found within the scanned span: best-fit center "
            f"at {omega_r / TWO_PI:.6g} Hz lies outside "
            f"[{w[0] / TWO_PI:.6g}, {w[-1] / TWO_PI:.6g}] Hz"
        )
    if q_l <= 0:
        raise FitError("phase fit converged to a non-positive Q_l")
    rms = float(np.sqrt(2.0 * best.cost / w.size))
    return omega_r, q_l, theta_0, sign, rms


def phase_fit(
    centered: ComplexTrace, geometry: ProbeGeometry
) -> tuple[float, float, float]:
    """Fit (omega_r, Q_l, phi_0) to the phase of center-translated data.

    phi_0 is fixed to zero in reflection geometry; in hanger geometry it is
    recovered from the phase offset of the centered data relative to the
    ideal matched response.
    """
    omega_r, q_l, theta_0, sign, _ = _phase_fit_full(centered)
    if geometry.is_reflection:
        phi_0 = 0.0
    else:
        phi_0 = _wrap_angle(-sign * theta_0 - math.pi)
    return omega_r, q_l, phi_0


def extract_q(
    radius: float, q_l: float, geometry: ProbeGeometry
) -> tuple[float, float]:
    """Convert a normalized circle radius and Q_l into (Q_i, Q_c).

    Raises FitError when the radius implies coupling beyond unitarity
    (diameter of the normalized circle reaching the off-resonant point
    magnitude), which would give a non-positive internal loss.
    """
    if not (math.isfinite(radius) and radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")
    if not (math.isfinite(q_l) and q_l > 0):
        raise ValueError(f"Q_l must be positive, got {q_l}")
    diameter = radius if geometry.is_reflection else 2.0 * radius
    if diameter >= 1.0:
        raise FitError(
            f"over-coupled beyond unitarity: normalized circle diameter "
            f"parameter {diameter:.6g} >= 1 leaves no internal loss"
        )
    q_c = q_l / diameter
    inv_qi = 1.0 / q_l - 1.0 / q_c
    return 1.0 / inv_qi, q_c


def q_uncertainty(
    sigma_radius: float, radius: float, q_c: float, geometry: ProbeGeometry
) -> float:
    """Propagate the circle-radius scatter to the internal loss:

    Delta(1/Q_i) = Delta(R) / (r R^2 Q_c),  r = 1 (reflection), 2 (hanger).
    """
    if sigma_radius < 0 or radius <= 0 or q_c <= 0:
        raise ValueError("sigma_radius must be >= 0, radius and Q_c positive")
    r = 1.0 if geometry.is_reflection else 2.0
    return sigma_radius / (r * radius * radius * q_c)


def _q_from_radius(
    radius: float, q_c: float, geometry: ProbeGeometry
) -> tuple[float, float]:
    """(Q_l, Q_i) from the circle radius at an externally fixed Q_c.

    Inverts the radius relation R = Q_l/(r Q_c) so that the trace enters
    only through the radius; the scatter of 1/Q_i is then exactly the
    q_uncertainty propagation sigma_radius/(r R^2 Q_c).
    """
    r = 1.0 if geometry.is_reflection else 2.0
    q_l = r * radius * q_c
    inv_qi = 1.0 / q_l - 1.0 / q_c
    if inv_qi <= 0:
        raise FitError(
            "circle diameter implies no internal loss at the pinned Q_c; "
            "Q_i would be negative"
        )
    return q_l, 1.0 / inv_qi


def _complex_refine(
    trace: ComplexTrace,
    tau: float,
    omega_r: float,
    q_l: float,
    diameter: float,
    phi_0: float,
    p_off: complex,
    sign: float,
    fit_phi: bool,
):
    """Refine all model parameters against the raw complex trace.

    The algebraic chain (delay, circle, phase) is statistically inefficient
    under noise because each stage discards part of the information; a final
    least-squares fit of the full model

        S(omega) = P (1 - d e^{i phi} / (1 + 2 i Q_l (omega/omega_r - 1)))
                   e^{i omega tau}

    to both quadratures is efficient and leaves noiseless input untouched.
    Returns the refined (tau, omega_r, q_l, diameter, phi_0, p_off) or None
    when the refinement is unusable (fell outside the span or did not stay
    finite), in which case the caller keeps the algebraic values.
    """
    w = trace.freq
    s = trace.s
    span = float(w[-1] - w[0])
    # Reference the delay phase to band center.  Against an absolute
    # reference, a fraction of a ns of delay rotates every point by a full
    # turn, which is degenerate with arg(P) and makes the least-squares
    # valley a tight spiral; centered, dt only controls the winding across
    # the span and decouples from the overall phase.
    w_mid = 0.5 * (w[0] + w[-1])
    wc = w - w_mid

    def unpack(x: np.ndarray):
        om, ql, d = x[0], x[1], x[2]
        ph = x[3] if fit_phi else 0.0
        pre, pim, dt = x[-3], x[-2], x[-1]
        return om, ql, d, ph, pre, pim, dt

    def residuals(x: np.ndarray) -> np.ndarray:
        om, ql, d, ph, pre, pim, dt = unpack(x)
        den = 1.0 + 2j * ql * (w / om - 1.0)
        m = 1.0 - d * np.exp(1j * ph) / den
        if sign > 0:
            m = np.conj(m)
        model = (pre + 1j * pim) * m * np.exp(1j * wc * (tau + dt * 1e-9))
        r = model - s
        return np.concatenate((r.real, r.imag))

    p_mid = p_off * complex(math.cos(w_mid * tau), math.sin(w_mid * tau))
    x0 = [omega_r, q_l, diameter]
    lo = [w[0] - span, max(1.0, 0.02 * q_l), 1e-9]
    hi = [w[-1] + span, 50.0 * q_l, 2.5]
    scale = [span, q_l, max(diameter, 0.05)]
    if fit_phi:
        x0 += [phi_0]
        lo += [phi_0 - math.pi]
        hi += [phi_0 + math.pi]
        scale += [0.3]
    pscale = max(abs(p_off), 1e-6)
    x0 += [p_mid.real, p_mid.imag, 0.0]
    lo += [-10.0 * pscale, -10.0 * pscale, -100.0]
    hi += [10.0 * pscale, 10.0 * pscale, 100.0]
    scale += [pscale, pscale, 1.0]
    lo_a, hi_a = np.array(lo), np.array(hi)
    # Seeds from degenerate algebra (e.g. a huge Taubin circle on a nearly
    # flat trace) can land outside the box; clip rather than crash.
    x0_a = np.clip(np.array(x0), lo_a, hi_a)
    try:
        res = least_squares(
            residuals,
            x0=x0_a,
            bounds=(lo_a, hi_a),
            x_scale=np.array(scale),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(res.x)):
        return None
    om, ql, d, ph, pre, pim, dt = unpack(res.x)
    if not (w[0] <= om <= w[-1]) or ql <= 0 or d <= 0:
        return None
    tau_new = tau + float(dt) * 1e-9
    p_new = complex(pre, pim) * complex(
        math.cos(w_mid * tau_new), -math.sin(w_mid * tau_new)
    )
    if abs(p_new) <= 0:
        return None
    return (
        tau_new,
        float(om),
        float(ql),
        float(d),
        _wrap_angle(float(ph)),
        p_new,
    )


def fit_resonance(
    trace: ComplexTrace,
    geometry: ProbeGeometry,
    pin_q_c: float | None = None,
    return_norm: bool = False,
):
    """Run the full circle-fit pipeline on one raw trace.

    When ``pin_q_c`` is given, the coupling quality factor is fixed to that
    value and Q_i follows from the fitted circle radius alone; this is the
    sweep mode in which Q_c is pinned to its average over all field points
    and the radius carries the field dependence of the internal loss.
    With ``return_norm`` the NormalizationParams actually removed from the
    data are returned alongside the fit.
    """
    if len(trace) < _MIN_FIT_POINTS:
        raise DataFormatError(
            f"trace too short to fit: {len(trace)} points (need {_MIN_FIT_POINTS})"
        )
    tau = estimate_delay(trace)
    s1 = trace.s * np.exp(-1j * trace.freq * tau)
    try:
        cx, cy, radius_raw = _taubin(s1.real, s1.imag)
    except FitError as exc:
        # A featureless trace collapses to a point (or line) once the delay
        # is removed; there is no resonance circle to fit.
        raise FitError("no resonance found within the scanned span") from exc
    center_raw = complex(cx, cy)
    resid = np.hypot(s1.real - cx, s1.imag - cy) - radius_raw
    sigma_raw = float(np.sqrt(np.mean(resid * resid)) / math.sqrt(s1.size))

    centered = ComplexTrace(freq=trace.freq, s=s1 - center_raw)
    omega_r, q_l, theta_0, sign, phase_rms = _phase_fit_full(centered)
    if phase_rms > _MAX_PHASE_RMS:
        # The phase of real resonance data tracks the arctan model; noise
        # with no underlying circle scatters over the full angle range.
        raise FitError(
            "no resonance found within the scanned span: phase scatter "
            f"{phase_rms:.2f} rad around the best fit"
        )

    # Off-resonant point: the circle point at the asymptotic phase theta_0 +/- pi.
    p_off = center_raw - radius_raw * complex(math.cos(theta_0), math.sin(theta_0))
    if abs(p_off) <= 0:
        raise FitError("degenerate off-resonant point")
    radius = radius_raw / abs(p_off)
    sigma_radius = sigma_raw / abs(p_off)
    center = center_raw / p_off

    if geometry.is_reflection:
        phi_0 = 0.0
    else:
        # theta_0 was fitted before normalization; dividing by P rotates all
        # phases by -arg(P), so shift theta_0 into the normalized frame first.
        theta_norm = theta_0 - math.atan2(p_off.imag, p_off.real)
        phi_0 = _wrap_angle(-sign * theta_norm - math.pi)

    refined = _complex_refine(
        trace,
        tau,
        omega_r,
        q_l,
        2.0 * radius,
        phi_0,
        p_off,
        sign,
        fit_phi=not geometry.is_reflection,
    )
    if refined is not None:
        tau, omega_r, q_l, d, phi_0, p_off = refined
        radius = 0.5 * d
        center_n = 1.0 - radius * complex(math.cos(phi_0), math.sin(phi_0))
        center = center_n.conjugate() if sign > 0 else center_n
        z_n = trace.s * np.exp(-1j * trace.freq * tau) / p_off
        rad_resid = np.abs(z_n - center) - radius
        sigma_radius = float(
            np.sqrt(np.mean(rad_resid * rad_resid)) / math.sqrt(z_n.size)
        )

    if pin_q_c is None:
        q_i, q_c = extract_q(radius, q_l, geometry)
    else:
        if not (math.isfinite(pin_q_c) and pin_q_c > 0):
            raise ValueError(f"pinned Q_c must be positive, got {pin_q_c}")
        q_c = pin_q_c
        q_l, q_i = _q_from_radius(radius, q_c, geometry)
    sigma_inv_qi = q_uncertainty(sigma_radius, radius, q_c, geometry)

    fit = ResonatorFit(
        omega_r=omega_r,
        Q_i=q_i,
        Q_c=q_c,
        Q_l=q_l,
        phi_0=phi_0,
        circle_center=center,
        circle_radius=radius,
        sigma_radius=sigma_radius,
        sigma_inv_Qi=sigma_inv_qi,
        geometry=geometry,
    )
    if return_norm:
        return fit, NormalizationParams(tau=tau, s_inf=p_off)
    return fit


def pin_coupling_q(fits: list[ResonatorFit]) -> list[ResonatorFit]:
    """Re-derive Q_i for each fit with Q_c fixed to the ensemble mean.

    Pinning removes the point-to-point scatter of the coupling estimate from
    the internal-loss track; each field point then contributes only its
    circle radius, so sigma_inv_Qi is the exact standard error of 1/Q_i.
    """
    if not fits:
        return []
    q_c_mean = float(np.mean([f.Q_c for f in fits]))
    pinned = []
    for f in fits:
        q_l, q_i = _q_from_radius(f.circle_radius, q_c_mean, f.geometry)
        sigma_inv_qi = q_uncertainty(
            f.sigma_radius, f.circle_radius, q_c_mean, f.geometry
        )
        pinned.append(
            ResonatorFit(
                omega_r=f.omega_r,
                Q_i=q_i,
                Q_c=q_c_mean,
                Q_l=q_l,
                phi_0=f.phi_0,
                circle_center=f.circle_center,
                circle_radius=f.circle_radius,
                sigma_radius=f.sigma_radius,
                sigma_inv_Qi=sigma_inv_qi,
                geometry=f.geometry,
            )
        )
    return pinned


def fit_field_sweep(
    traces: list[ComplexTrace],
    geometry: ProbeGeometry,
    pin_qc: bool = True,
) -> list[ResonatorFit]:
    """Fit every trace of a field sweep; optionally pin Q_c to the mean."""
    fits = [fit_resonance(t, geometry) for t in traces]
    if pin_qc and len(fits) > 1:
        fits = pin_coupling_q(fits)
    return fits
