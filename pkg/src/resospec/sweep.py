"""Field-sweep analysis: loss extraction, multipeak fits, species diagrams.

The spin-induced loss rate is isolated from a sweep of resonator fits by
subtracting the zero-field internal loss and, above the wire-bond
activation field, a constant wire-bond contribution:

    kappa_s(B0) = omega_r/Q_i(B0) - omega_r/Q_i0 - [B0 > B_wb] omega_r/Q_i_wb

The resulting curve is decomposed into a sum of field-domain templates
(Lorentzian, split Lorentzian with independent half widths, and a logistic
plateau) by simultaneous nonlinear least squares.  Feature centers across
several probe frequencies form a frequency-field diagram whose weighted
linear regression yields the g-factor and zero-field splitting used for
species identification.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .core import (
    CONSTANTS,
    TWO_PI,
    ComplexTrace,
    DataFormatError,
    DiagramPoint,
    FeatureFit,
    FieldSweepPoint,
    FitError,
    LineShape,
    LossCurve,
    PhysicalConstants,
    ResonatorFit,
    SpinSpecies,
)
from . import resfit, spinmodel, traceio

DEFAULT_Q_I_WIREBOND = 3e5
ZERO_FIELD_CUTOFF = 2e-3  # tesla; points below count as zero-field reference

_PLATEAU_SOFTNESS_SEED = 5e-3
_PLATEAU_SOFTNESS_BOUNDS = (1e-3, 20e-3)

# Normalized-distance scales for species identification.
_G_SCALE = 0.15
_DELTA_SCALE = TWO_PI * 0.3e9


def baseline_subtract(
    points: list[FieldSweepPoint],
    q_i_zero: float | None = None,
    q_i_wirebond: float | None = DEFAULT_Q_I_WIREBOND,
    b_wirebond: float = traceio.DEFAULT_B_WIREBOND,
) -> LossCurve:
    """Convert a fitted sweep into the spin-induced loss curve.

    ``q_i_zero`` defaults to the mean over all points below 2 mT.  When
    ``q_i_wirebond`` is None no wire-bond step is subtracted (and the sweep
    need not straddle ``b_wirebond``).
    """
    if not points:
        raise ValueError("empty sweep")
    pts = sorted(points, key=lambda p: p.b0)
    b0 = np.array([p.b0 for p in pts])
    if np.any(np.diff(b0) <= 0):
        raise ValueError("duplicate field values in sweep")
    if q_i_wirebond is not None:
        if not (math.isfinite(q_i_wirebond) and q_i_wirebond > 0):
            raise ValueError(f"q_i_wirebond must be positive, got {q_i_wirebond}")
        if not (np.any(b0 <= b_wirebond) and np.any(b0 > b_wirebond)):
            raise ValueError(
                "sweep must include at least one point on each side of "
                f"b_wirebond = {b_wirebond} T"
            )
    if q_i_zero is None:
        ref = [p for p in pts if p.b0 < ZERO_FIELD_CUTOFF]
        if not ref:
            raise DataFormatError(
                "missing zero-field reference: no Q_i_zero given and no sweep "
                f"point below {ZERO_FIELD_CUTOFF} T"
            )
        q_i_zero = 1.0 / float(np.mean([1.0 / p.fit.Q_i for p in ref]))
    if not (math.isfinite(q_i_zero) and q_i_zero > 0):
        raise ValueError(f"q_i_zero must be positive, got {q_i_zero}")

    omega_ref = pts[0].fit.omega_r
    kappa = np.array([p.fit.omega_r / p.fit.Q_i for p in pts])
    kappa -= omega_ref / q_i_zero
    if q_i_wirebond is not None:
        kappa -= np.where(b0 > b_wirebond, omega_ref / q_i_wirebond, 0.0)
    sigma = np.array([p.fit.omega_r * p.fit.sigma_inv_Qi for p in pts])
    return LossCurve(b0=b0, kappa_s=kappa, omega_r_ref=omega_ref, sigma=sigma)


def rescale_field(curve: LossCurve, omega_tilde: float) -> LossCurve:
    """Rescale the field axis to a common probe frequency.

    B0 -> B0 * omega_tilde / omega_r_ref moves every linear Zeeman feature
    to the field it would occupy at omega_tilde; kappa values are untouched.
    """
    if not (math.isfinite(omega_tilde) and omega_tilde > 0):
        raise ValueError(f"omega_tilde must be positive, got {omega_tilde}")
    factor = omega_tilde / curve.omega_r_ref
    return LossCurve(
        b0=curve.b0 * factor,
        kappa_s=curve.kappa_s,
        omega_r_ref=omega_tilde,
        sigma=curve.sigma,
    )


@dataclass
class _Component:
    label: str
    shape: LineShape
    seed: list[float]
    lower: list[float]
    upper: list[float]
    dropped: bool = False

    @property
    def nparams(self) -> int:
        return len(self.seed)


def _profile(shape: LineShape, params: np.ndarray, b: np.ndarray) -> np.ndarray:
    if shape is LineShape.LORENTZIAN:
        h, c, w = params
        return h * w * w / ((b - c) ** 2 + w * w)
    if shape is LineShape.SPLIT_LORENTZIAN:
        h, c, wl, wr = params
        w = np.where(b < c, wl, wr)
        return h * w * w / ((b - c) ** 2 + w * w)
    h, c, s = params
    return h * expit((b - c) / s)


def _expand_templates(
    templates: list[SpinSpecies],
    omega_r_ref: float,
    window: tuple[float, float],
    constants: PhysicalConstants,
) -> list[_Component]:
    lo, hi = window
    comps: list[_Component] = []
    for k, sp in enumerate(templates):
        label = sp.label or f"template_{k}"
        gamma_field = sp.gamma_line / (2.0 * spinmodel.effective_gyro(sp.g, constants))
        if sp.shape is LineShape.PLATEAU:
            try:
                onset = spinmodel.field_for_frequency(sp, omega_r_ref, constants)
            except ValueError:
                continue
            if not (lo <= onset <= hi):
                continue
            comps.append(
                _Component(
                    label=label,
                    shape=sp.shape,
                    seed=[0.0, onset, _PLATEAU_SOFTNESS_SEED],
                    lower=[0.0, lo, _PLATEAU_SOFTNESS_BOUNDS[0]],
                    upper=[np.inf, hi, _PLATEAU_SOFTNESS_BOUNDS[1]],
                )
            )
            continue
        if sp.hyperfine_A is not None:
            hf = spinmodel.HyperfineSystem(A=sp.hyperfine_A, g_e=sp.g)
            try:
                b_lo, b_hi = spinmodel.hyperfine_satellite_fields(
                    hf, omega_r_ref, constants=constants
                )
            except FitError:
                continue
            centers = [(f"{label}_low", b_lo), (f"{label}_high", b_hi)]
        else:
            try:
                centers = [(label, spinmodel.field_for_frequency(sp, omega_r_ref, constants))]
            except ValueError:
                continue
        for name, center in centers:
            if not (lo <= center <= hi):
                continue
            width = min(max(gamma_field, 1e-5), (hi - lo) / 2.0)
            if sp.shape is LineShape.SPLIT_LORENTZIAN:
                seed = [0.0, center, width, width]
                lower = [0.0, lo, 1e-6, 1e-6]
                upper = [np.inf, hi, hi - lo, hi - lo]
            else:
                seed = [0.0, center, width]
                lower = [0.0, lo, 1e-6]
                upper = [np.inf, hi, hi - lo]
            comps.append(
                _Component(label=name, shape=sp.shape, seed=seed, lower=lower, upper=upper)
            )
    return comps


def _check_resolution(comps: list[_Component], b: np.ndarray) -> None:
    for comp in comps:
        if comp.shape is LineShape.PLATEAU:
            center, half = comp.seed[1], 4.0 * comp.seed[2]
        else:
            center, half = comp.seed[1], comp.seed[2]
        npts = int(np.count_nonzero((b >= center - half) & (b <= center + half)))
        if npts < 5:
            raise DataFormatError(
                f"insufficient field resolution for template {comp.label!r}: "
                f"{npts} points within +/-{half:.4g} T of {center:.4g} T (need 5)"
            )


def _pack(comps: list[_Component]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    active = [c for c in comps if not c.dropped]
    x0 = np.concatenate([c.seed for c in active]) if active else np.array([])
    lo = np.concatenate([c.lower for c in active]) if active else np.array([])
    hi = np.concatenate([c.upper for c in active]) if active else np.array([])
    scale = np.maximum(np.abs(x0), 1e-4)
    return x0, lo, hi, scale


def _model_from_vector(
    comps: list[_Component], x: np.ndarray, b: np.ndarray
) -> np.ndarray:
    out = np.zeros_like(b)
    k = 0
    for comp in comps:
        if comp.dropped:
            continue
        p = x[k : k + comp.nparams]
        out += _profile(comp.shape, p, b)
        k += comp.nparams
    return out


def _run_nls(
    comps: list[_Component],
    b: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    # Seed heights from the data at the seed centers (after zeroing the rest).
    for comp in comps:
        if comp.dropped:
            continue
        c = comp.seed[1]
        idx = int(np.argmin(np.abs(b - c)))
        comp.seed[0] = max(float(y[idx]), 0.0)
    x0, lo, hi, scale = _pack(comps)
    if x0.size == 0:
        return x0

    def residuals(x: np.ndarray) -> np.ndarray:
        return (_model_from_vector(comps, x, b) - y) * weights

    res = least_squares(
        residuals,
        x0=np.clip(x0, lo, hi),
        bounds=(lo, hi),
        x_scale=scale,
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=4000,
    )
    if not np.all(np.isfinite(res.x)):
        raise FitError("multipeak fit did not converge")
    return res.x


def _area_params(shape: LineShape, params: np.ndarray, window, omega_ref) -> float:
    lo, hi = window
    if shape is LineShape.LORENTZIAN:
        h, _, w = params
        return math.pi * h * w / omega_ref
    if shape is LineShape.SPLIT_LORENTZIAN:
        h, _, wl, wr = params
        return math.pi * h * (wl + wr) / 2.0 / omega_ref
    h, c, s = params
    # integral of expit((b-c)/s) db = s * softplus((b-c)/s)
    upper = s * np.logaddexp(0.0, (hi - c) / s)
    lower = s * np.logaddexp(0.0, (lo - c) / s)
    return h * (upper - lower) / omega_ref


def multipeak_fit(
    curve: LossCurve,
    templates: list[SpinSpecies],
    fit_window: tuple[float, float] | None = None,
    constants: PhysicalConstants = CONSTANTS,
) -> list[FeatureFit]:
    """Decompose a loss curve into template features by simultaneous NLS.

    Every template seeds its center at the field where its line crosses
    the curve's probe frequency (both satellites for hyperfine species);
    templates whose seed falls outside ``fit_window`` are skipped.  All
    amplitudes are bounded non-negative, the plateau softness to 1-20 mT.
    When two non-plateau components converge onto the same center within
    one grid step, the smaller-area one is zeroed and the fit repeated
    once; zeroed components are returned with zero amplitude.
    """
    if fit_window is None:
        fit_window = (float(curve.b0[0]), float(curve.b0[-1]))
    lo, hi = fit_window
    if not (lo < hi):
        raise ValueError(f"fit_window must be an increasing pair, got {fit_window}")
    mask = (curve.b0 >= lo) & (curve.b0 <= hi)
    b = curve.b0[mask]
    y = curve.kappa_s[mask]
    if b.size < 8:
        raise DataFormatError(
            f"only {b.size} points inside the fit window; need at least 8"
        )
    if curve.sigma is not None and np.all(curve.sigma[mask] > 0):
        s = curve.sigma[mask]
        weights = np.mean(s) / s
    else:
        weights = np.ones_like(b)

    comps = _expand_templates(templates, curve.omega_r_ref, (lo, hi), constants)
    if not comps:
        return []
    _check_resolution(comps, b)
    grid_step = float(np.median(np.diff(b))) if b.size > 1 else hi - lo

    x = _run_nls(comps, b, y, weights)

    # Tie break: collapse duplicate centers, keep the larger area.
    fitted: dict[int, np.ndarray] = {}
    k = 0
    for i, comp in enumerate(comps):
        if comp.dropped:
            continue
        fitted[i] = x[k : k + comp.nparams]
        k += comp.nparams
    changed = False
    idxs = [i for i in fitted if comps[i].shape is not LineShape.PLATEAU]
    for a_pos, i in enumerate(idxs):
        for j in idxs[a_pos + 1 :]:
            if comps[i].dropped or comps[j].dropped:
                continue
            if abs(fitted[i][1] - fitted[j][1]) < grid_step:
                area_i = _area_params(comps[i].shape, fitted[i], (lo, hi), curve.omega_r_ref)
                area_j = _area_params(comps[j].shape, fitted[j], (lo, hi), curve.omega_r_ref)
                loser = j if area_i >= area_j else i
                comps[loser].dropped = True
                changed = True
    if changed:
        x = _run_nls(comps, b, y, weights)
        fitted = {}
        k = 0
        for i, comp in enumerate(comps):
            if comp.dropped:
                continue
            fitted[i] = x[k : k + comp.nparams]
            k += comp.nparams

    out: list[FeatureFit] = []
    for i, comp in enumerate(comps):
        if comp.dropped:
            params = np.array(comp.seed)
            params[0] = 0.0
        else:
            params = fitted[i]
        area = _area_params(comp.shape, params, (lo, hi), curve.omega_r_ref)
        wl = wr = None
        if comp.shape is LineShape.SPLIT_LORENTZIAN:
            wl, wr = float(params[2]), float(params[3])
            width = 0.5 * (wl + wr)
        else:
            width = float(params[2])
        out.append(
            FeatureFit(
                species_label=comp.label,
                shape=comp.shape,
                peak_height=float(params[0]),
                center_field=float(params[1]),
                width_field=width,
                area=float(area),
                omega_r_ref=curve.omega_r_ref,
                fit_window=(lo, hi),
                width_left=wl,
                width_right=wr,
            )
        )
    return out


def multipeak_model(curve_b: np.ndarray, features: list[FeatureFit]) -> np.ndarray:
    """Evaluate the summed template model of fitted features on a field axis."""
    b = np.asarray(curve_b, dtype=float)
    out = np.zeros_like(b)
    for f in features:
        if f.shape is LineShape.SPLIT_LORENTZIAN:
            params = np.array([f.peak_height, f.center_field, f.width_left, f.width_right])
        else:
            params = np.array([f.peak_height, f.center_field, f.width_field])
        out += _profile(f.shape, params, b)
    return out


def peak_area(feature: FeatureFit) -> float:
    """Analytic area of a fitted template divided by omega_r_ref, in tesla.

    Lorentzian: pi h w; split Lorentzian: pi h (w_l + w_r)/2; plateau:
    the logistic integrated over the feature's fit window.
    """
    if feature.shape is LineShape.SPLIT_LORENTZIAN:
        params = np.array(
            [feature.peak_height, feature.center_field, feature.width_left, feature.width_right]
        )
    else:
        params = np.array([feature.peak_height, feature.center_field, feature.width_field])
    return float(
        _area_params(feature.shape, params, feature.fit_window, feature.omega_r_ref)
    )


def build_diagram(
    points: list[DiagramPoint], constants: PhysicalConstants = CONSTANTS
) -> tuple[float, float, np.ndarray]:
    """Weighted linear regression of omega_r = delta_0 + (g mu_B/hbar) B0.

    Returns (g, delta_0, covariance) with the 2x2 covariance ordered
    (delta_0, g).  Field uncertainties are propagated onto the frequency
    axis through the fitted slope (two reweighting passes).
    """
    if len(points) < 2:
        raise ValueError(f"need at least 2 diagram points, got {len(points)}")
    b = np.array([p.b_feature for p in points])
    w = np.array([p.omega_r for p in points])
    sig_b = np.array([p.sigma_b for p in points])
    if np.ptp(b) <= 0:
        raise ValueError("diagram points share a single field value")

    slope, intercept = np.polyfit(b, w, 1)
    x_mat = np.column_stack((np.ones_like(b), b))
    scaled = np.any(sig_b > 0)
    for _ in range(2):
        if scaled:
            sig_y = np.maximum(np.abs(slope) * sig_b, 1e-30)
            sig_y[sig_b == 0] = np.min(sig_y[sig_b > 0]) if np.any(sig_b > 0) else 1.0
        else:
            sig_y = np.ones_like(b)
        wt = 1.0 / sig_y**2
        xtwx = x_mat.T @ (wt[:, None] * x_mat)
        beta = np.linalg.solve(xtwx, x_mat.T @ (wt * w))
        intercept, slope = beta
    cov = np.linalg.inv(xtwx)
    if not scaled:
        resid = w - x_mat @ beta
        dof = max(len(points) - 2, 1)
        cov = cov * float(resid @ resid) / dof

    conv = constants.hbar / constants.mu_B
    g = slope * conv
    jac = np.diag([1.0, conv])
    cov_out = jac @ cov @ jac.T
    return float(g), float(intercept), cov_out


def identify_species(
    g: float, delta_0: float, catalog: list[SpinSpecies]
) -> tuple[SpinSpecies, float]:
    """Match fitted (g, delta_0) against a catalog; returns (species, score).

    The score is exp(-d) of the normalized distance in the (g, delta_0)
    plane; hyperfine species are matched against both linearized satellite
    branches (effective intercepts +/- A/2).
    """
    if not catalog:
        raise ValueError("species catalog is empty")
    if not (math.isfinite(g) and g > 0):
        raise ValueError(f"g must be positive, got {g}")
    if not math.isfinite(delta_0):
        raise ValueError("delta_0 must be finite")
    best: tuple[float, SpinSpecies] | None = None
    for sp in catalog:
        if sp.hyperfine_A is not None:
            candidates = [(sp.g, sp.hyperfine_A / 2.0), (sp.g, -sp.hyperfine_A / 2.0)]
        else:
            candidates = [(sp.g, sp.delta_0)]
        for gc, dc in candidates:
            d = math.hypot((g - gc) / _G_SCALE, (delta_0 - dc) / _DELTA_SCALE)
            if best is None or d < best[0]:
                best = (d, sp)
    return best[1], math.exp(-best[0])


@dataclass(frozen=True)
class SweepAnalysis:
    """Bundle of everything one analyzed sweep produces."""

    resonator_id: str
    points: tuple[FieldSweepPoint, ...]
    curve: LossCurve
    features: tuple[FeatureFit, ...]

    @property
    def labeled_diagram_points(self) -> list[tuple[FeatureFit, DiagramPoint]]:
        """(feature, diagram point) pairs for the Zeeman-line features.

        Plateaus carry no line center and dropped features no information,
        so both are skipped.  The field uncertainty is the fitted width
        shrunk by the number of sweep points under the line.
        """
        pairs = []
        for f in self.features:
            if f.shape is LineShape.PLATEAU or f.peak_height == 0.0:
                continue
            sigma = f.width_field / math.sqrt(max(len(self.curve), 2))
            pairs.append(
                (
                    f,
                    DiagramPoint(
                        omega_r=f.omega_r_ref, b_feature=f.center_field, sigma_b=sigma
                    ),
                )
            )
        return pairs

    @property
    def diagram_points(self) -> list[DiagramPoint]:
        return [p for _, p in self.labeled_diagram_points]


def analyze_manifest(
    manifest: traceio.SweepManifest,
    templates: list[SpinSpecies],
    q_i_wirebond: float | None = DEFAULT_Q_I_WIREBOND,
    rescale_to: float | None = None,
    fit_window: tuple[float, float] | None = None,
    pin_qc: bool = True,
    jobs: int = 1,
    constants: PhysicalConstants = CONSTANTS,
) -> SweepAnalysis:
    """Full pipeline: load traces, fit, subtract baselines, fit features.

    ``jobs`` bounds the number of traces fitted concurrently; the output
    ordering is by field regardless.  ``rescale_to`` (rad/s) moves the loss
    curve to a common probe frequency before the multipeak fit.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    traces = [traceio.parse_csv_or_touchstone(e.trace_path) for e in manifest.entries]

    def fit_one(trace: ComplexTrace) -> ResonatorFit:
        return resfit.fit_resonance(trace, manifest.geometry)

    if jobs == 1:
        fits = [fit_one(t) for t in traces]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fits = list(pool.map(fit_one, traces))
    if pin_qc and len(fits) > 1:
        fits = resfit.pin_coupling_q(fits)
    points = tuple(
        FieldSweepPoint(b0=e.b0, fit=f) for e, f in zip(manifest.entries, fits)
    )
    curve = baseline_subtract(
        list(points),
        q_i_zero=manifest.q_i_zero_field,
        q_i_wirebond=q_i_wirebond,
        b_wirebond=manifest.b_wirebond,
    )
    if rescale_to is not None:
        curve = rescale_field(curve, rescale_to)
    features = tuple(
        multipeak_fit(curve, templates, fit_window=fit_window, constants=constants)
    )
    return SweepAnalysis(
        resonator_id=manifest.resonator_id,
        points=points,
        curve=curve,
        features=features,
    )
