"""Forward-model generator for synthetic traces and full sweep campaigns.

Traces are built from the same steady-state response the fitting chain
inverts, dressed with the instrumental factors of a raw measurement:

    S_meas(omega) = S_model(omega) * s_inf * exp(i omega tau) + noise

with additive complex Gaussian noise of equal variance in both quadratures
(``noise_sigma`` is the per-quadrature standard deviation).  A campaign
couples each resonator to every species of the scenario at every field
point, writes one trace file per point plus a manifest per resonator, and
records the exact generating parameters in ``truth.json``.

All randomness derives from a single scenario seed through spawned
numpy SeedSequences, so identical seeds reproduce campaigns bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CONSTANTS,
    TWO_PI,
    ComplexTrace,
    DataFormatError,
    LossConvention,
    PhysicalConstants,
    ProbeGeometry,
    SpinSpecies,
)
from . import catalog as catalog_mod
from . import spinmodel, traceio

# Hyperfine transitions weaker than this |<sigma_x/2>|^2 are dropped from
# the forward model (the two strong satellites sit at ~1/4).
_WEIGHT_FLOOR = 1e-3


@dataclass(frozen=True)
class SynthResonator:
    """Generating parameters of one resonator."""

    resonator_id: str
    omega_r: float
    q_i: float
    q_c: float
    geometry: ProbeGeometry
    tau: float = 0.0
    s_inf: complex = 1.0 + 0.0j
    phi_0: float = 0.0
    p_f: float | None = None
    p_sc: float | None = None

    def __post_init__(self) -> None:
        if not self.resonator_id:
            raise ValueError("resonator_id must be non-empty")
        for name in ("omega_r", "q_i", "q_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if abs(self.s_inf) <= 0 or not (
            math.isfinite(self.s_inf.real) and math.isfinite(self.s_inf.imag)
        ):
            raise ValueError("s_inf must be finite and non-zero")
        if not math.isfinite(self.phi_0):
            raise ValueError("phi_0 must be finite")
        if self.geometry.is_reflection and self.phi_0 != 0.0:
            raise ValueError("phi_0 must be zero in reflection geometry")
        for name in ("p_f", "p_sc"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and 0 < v <= 1):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def q_l(self) -> float:
        return 1.0 / (1.0 / self.q_i + 1.0 / self.q_c)

    @property
    def kappa_i(self) -> float:
        return self.omega_r / self.q_i

    @property
    def kappa_c(self) -> float:
        return self.omega_r / self.q_c


@dataclass(frozen=True)
class SynthSpeciesSpec:
    """One species of a scenario and its coupling strength.

    Exactly one of ``g_ens`` (rad/s, the collective coupling of a strong
    transition) or ``concentration`` (1/m^3, converted per resonator via
    its participation) must be given.  ``surface`` selects which
    participation column drives the conversion.
    """

    species: SpinSpecies
    g_ens: float | None = None
    concentration: float | None = None
    surface: str = "sc"

    def __post_init__(self) -> None:
        if (self.g_ens is None) == (self.concentration is None):
            raise ValueError("give exactly one of g_ens or concentration")
        if self.g_ens is not None and not (
            math.isfinite(self.g_ens) and self.g_ens >= 0
        ):
            raise ValueError(f"g_ens must be non-negative, got {self.g_ens}")
        if self.concentration is not None and not (
            math.isfinite(self.concentration) and self.concentration >= 0
        ):
            raise ValueError(f"concentration must be non-negative, got {self.concentration}")
        if self.surface not in ("sc", "f"):
            raise ValueError(f"surface must be 'sc' or 'f', got {self.surface!r}")


@dataclass(frozen=True)
class SynthScenario:
    resonators: tuple[SynthResonator, ...]
    species: tuple[SynthSpeciesSpec, ...] = ()
    field_grid: tuple[float, ...] = (0.0,)
    seed: int = 0
    noise_sigma: float = 0.0
    freq_points: int = 401
    span_linewidths: float = 30.0
    q_i_wirebond: float | None = 3e5
    b_wirebond: float = traceio.DEFAULT_B_WIREBOND
    convention: LossConvention = LossConvention.PAPER_4PI

    def __post_init__(self) -> None:
        if not self.resonators:
            raise ValueError("scenario needs at least one resonator")
        ids = [r.resonator_id for r in self.resonators]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate resonator ids in scenario")
        grid = tuple(float(b) for b in self.field_grid)
        if not grid:
            raise ValueError("field_grid must be non-empty")
        if any(not (math.isfinite(b) and b >= 0) for b in grid):
            raise ValueError("field_grid values must be non-negative")
        if sorted(grid) != list(grid) or len(set(grid)) != len(grid):
            grid = tuple(sorted(set(grid)))
        object.__setattr__(self, "field_grid", grid)
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError("noise_sigma must be non-negative")
        if self.freq_points < 16:
            raise ValueError("freq_points must be at least 16")
        if not (math.isfinite(self.span_linewidths) and self.span_linewidths >= 6):
            raise ValueError("span_linewidths must be at least 6")
        if self.q_i_wirebond is not None and not (
            math.isfinite(self.q_i_wirebond) and self.q_i_wirebond > 0
        ):
            raise ValueError("q_i_wirebond must be positive when given")


def make_freq_grid(res: SynthResonator, n: int, span_linewidths: float) -> np.ndarray:
    """Linear angular-frequency grid centered on the bare resonance."""
    half = 0.5 * span_linewidths * res.omega_r / res.q_l
    return np.linspace(res.omega_r - half, res.omega_r + half, n)


def synth_trace(
    res: SynthResonator,
    freq_grid: np.ndarray,
    noise_sigma: float = 0.0,
    seed: int | np.random.SeedSequence | None = None,
    baths: tuple[spinmodel.SpinBathParams, ...] = (),
    extra_kappa: float = 0.0,
) -> ComplexTrace:
    """Generate one trace; raises when the grid is too narrow to fit later."""
    w = np.asarray(freq_grid, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("freq_grid must be a 1-d array with at least 2 points")
    span = w[-1] - w[0]
    linewidth = res.omega_r / res.q_l
    if span < 6.0 * linewidth:
        raise DataFormatError(
            f"grid too narrow: span {span:.4g} rad/s covers "
            f"{span / linewidth:.2f} linewidths (need 6)"
        )
    s = spinmodel.combined_response(
        w,
        res.omega_r,
        res.kappa_i,
        res.kappa_c,
        baths,
        res.geometry,
        res.phi_0,
        extra_kappa=extra_kappa,
    )
    s = s * res.s_inf * np.exp(1j * w * res.tau)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(2 * w.size)
        s = s + noise_sigma * (noise[: w.size] + 1j * noise[w.size :])
    return ComplexTrace(freq=w, s=s)


def _transition_list(
    spec: SynthSpeciesSpec,
    b0: float,
    constants: PhysicalConstants,
) -> list[tuple[float, float]]:
    """(omega_s, weight/0.25) pairs contributed by one species at b0."""
    sp = spec.species
    if sp.hyperfine_A is not None:
        hf = spinmodel.HyperfineSystem(A=sp.hyperfine_A, g_e=sp.g)
        table = spinmodel.hyperfine_transitions(hf, b0, constants)
        return [
            (freq, weight / spinmodel.SPIN_HALF_MATRIX_ELEMENT_SQ)
            for freq, weight in table
            if weight >= _WEIGHT_FLOOR
        ]
    return [(spinmodel.zeeman_frequency(sp, b0, constants), 1.0)]


def _coupling_for(
    spec: SynthSpeciesSpec,
    res: SynthResonator,
    convention: LossConvention,
    constants: PhysicalConstants,
) -> float:
    if spec.g_ens is not None:
        return spec.g_ens
    p = res.p_sc if spec.surface == "sc" else res.p_f
    if p is None:
        raise ValueError(
            f"resonator {res.resonator_id!r} has no participation value for "
            f"surface {spec.surface!r} but species {spec.species.label!r} is "
            "specified by concentration"
        )
    return spinmodel.ensemble_coupling(
        spec.concentration, spec.species.g, res.omega_r, p, convention, constants
    )


def _baths_at_field(
    scenario: SynthScenario,
    res: SynthResonator,
    b0: float,
    constants: PhysicalConstants,
) -> tuple[spinmodel.SpinBathParams, ...]:
    baths = []
    for spec in scenario.species:
        if spec.species.shape.value == "plateau":
            continue  # the plateau is not a Zeeman line; no forward model here
        g_eff = _coupling_for(spec, res, scenario.convention, constants)
        if g_eff == 0.0:
            continue
        for omega_s, rel_weight in _transition_list(spec, b0, constants):
            baths.append(
                spinmodel.SpinBathParams(
                    g_ens=g_eff * math.sqrt(rel_weight),
                    gamma_line=spec.species.gamma_line,
                    omega_s=omega_s,
                )
            )
    return tuple(baths)


def _species_truth(
    scenario: SynthScenario,
    res: SynthResonator,
    constants: PhysicalConstants,
) -> list[dict]:
    """Expected features of each species for this resonator."""
    out = []
    gyro_cache = {}
    for spec in scenario.species:
        sp = spec.species
        if sp.shape.value == "plateau":
            continue
        g_eff = _coupling_for(spec, res, scenario.convention, constants)
        gamma_field = sp.gamma_line / (2.0 * spinmodel.effective_gyro(sp.g, constants))
        if sp.hyperfine_A is not None:
            hf = spinmodel.HyperfineSystem(A=sp.hyperfine_A, g_e=sp.g)
            b_lo, b_hi = spinmodel.hyperfine_satellite_fields(
                hf, res.omega_r, constants=constants
            )
            centers = [(f"{sp.label}_low", b_lo), (f"{sp.label}_high", b_hi)]
        else:
            try:
                centers = [
                    (sp.label, spinmodel.field_for_frequency(sp, res.omega_r, constants))
                ]
            except ValueError:
                centers = []
        for name, center in centers:
            gyro = gyro_cache.setdefault(
                sp.g, spinmodel.effective_gyro(sp.g, constants)
            )
            out.append(
                {
                    "label": name,
                    "center_field_tesla": center,
                    "width_field_tesla": gamma_field,
                    "g_ens_rad_per_s": g_eff,
                    "kappa_peak_rad_per_s": 16.0 * g_eff**2 / sp.gamma_line,
                    "area_tesla": 8.0 * math.pi * g_eff**2 / (gyro * res.omega_r),
                }
            )
    return out


def synth_sweep(
    scenario: SynthScenario,
    out_dir: str,
    constants: PhysicalConstants = CONSTANTS,
) -> dict:
    """Write a full campaign (manifests, traces, truth.json); returns truth."""
    os.makedirs(out_dir, exist_ok=True)
    root_seq = np.random.SeedSequence(scenario.seed)
    res_seqs = root_seq.spawn(len(scenario.resonators))
    truth: dict = {
        "schema_version": 1,
        "seed": scenario.seed,
        "noise_sigma": scenario.noise_sigma,
        "convention": scenario.convention.value,
        "q_i_wirebond": scenario.q_i_wirebond,
        "b_wirebond_tesla": scenario.b_wirebond,
        "field_grid_tesla": list(scenario.field_grid),
        "resonators": [],
    }
    for i_res, res in enumerate(scenario.resonators):
        res_dir = os.path.join(out_dir, res.resonator_id)
        trace_dir = os.path.join(res_dir, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        grid = make_freq_grid(res, scenario.freq_points, scenario.span_linewidths)
        point_seqs = res_seqs[i_res].spawn(len(scenario.field_grid))
        rel_paths = []
        for i_b, b0 in enumerate(scenario.field_grid):
            baths = _baths_at_field(scenario, res, b0, constants)
            extra = 0.0
            if scenario.q_i_wirebond is not None and b0 > scenario.b_wirebond:
                extra = res.omega_r / scenario.q_i_wirebond
            trace = synth_trace(
                res,
                grid,
                noise_sigma=scenario.noise_sigma,
                seed=point_seqs[i_b],
                baths=baths,
                extra_kappa=extra,
            )
            rel = os.path.join("traces", f"point_{i_b:04d}.csv")
            traceio.write_csv_trace(os.path.join(res_dir, rel), trace)
            rel_paths.append(rel)
        manifest = traceio.SweepManifest(
            resonator_id=res.resonator_id,
            geometry=res.geometry,
            entries=tuple(
                traceio.ManifestEntry(b0=b, trace_path=p)
                for b, p in zip(scenario.field_grid, rel_paths)
            ),
            q_i_zero_field=res.q_i,
            b_wirebond=scenario.b_wirebond,
        )
        traceio.write_manifest(
            os.path.join(res_dir, "manifest.csv"), manifest, rel_paths
        )
        truth["resonators"].append(
            {
                "resonator_id": res.resonator_id,
                "f_r_hz": res.omega_r / TWO_PI,
                "q_i": res.q_i,
                "q_c": res.q_c,
                "geometry": str(res.geometry),
                "tau_s": res.tau,
                "s_inf_re": res.s_inf.real,
                "s_inf_im": res.s_inf.imag,
                "phi_0_rad": res.phi_0,
                "p_f": res.p_f,
                "p_sc": res.p_sc,
                "manifest": os.path.join(res.resonator_id, "manifest.csv"),
                "features": _species_truth(scenario, res, constants),
            }
        )
    with open(os.path.join(out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return truth


def _resonator_from_dict(d: dict) -> SynthResonator:
    try:
        s_inf = d.get("s_inf", [1.0, 0.0])
        return SynthResonator(
            resonator_id=str(d["id"]),
            omega_r=TWO_PI * 1e9 * float(d["f_r_ghz"]),
            q_i=float(d["q_i"]),
            q_c=float(d["q_c"]),
            geometry=ProbeGeometry.from_string(d.get("geometry", "reflection")),
            tau=1e-9 * float(d.get("tau_ns", 0.0)),
            s_inf=complex(float(s_inf[0]), float(s_inf[1])),
            phi_0=float(d.get("phi_0_rad", 0.0)),
            p_f=None if d.get("p_f") is None else float(d["p_f"]),
            p_sc=None if d.get("p_sc") is None else float(d["p_sc"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataFormatError(f"bad resonator entry {d!r}: {exc}") from None


def _species_spec_from_dict(d: dict) -> SynthSpeciesSpec:
    sp = catalog_mod.species_from_dict(d)
    g_ens_khz = d.get("g_ens_khz")
    conc = d.get("concentration_per_cm3")
    try:
        return SynthSpeciesSpec(
            species=sp,
            g_ens=None if g_ens_khz is None else TWO_PI * 1e3 * float(g_ens_khz),
            concentration=None if conc is None else 1e6 * float(conc),
            surface=str(d.get("surface", "sc")),
        )
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"bad species entry {d!r}: {exc}") from None


def load_scenario(path: str) -> SynthScenario:
    """Read a scenario JSON file (frequencies in GHz, delays in ns)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    grid_spec = doc.get("field_grid_tesla", [0.0])
    if isinstance(grid_spec, dict):
        try:
            grid = list(
                np.linspace(
                    float(grid_spec["start"]),
                    float(grid_spec["stop"]),
                    int(grid_spec["num"]),
                )
            )
            if grid_spec.get("include_zero") and 0.0 not in grid:
                grid = [0.0] + grid
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: bad field_grid_tesla spec: {exc}") from None
    else:
        grid = [float(b) for b in grid_spec]
    q_wb = doc.get("q_i_wirebond", 3e5)
    try:
        return SynthScenario(
            resonators=tuple(_resonator_from_dict(r) for r in doc.get("resonators", [])),
            species=tuple(_species_spec_from_dict(s) for s in doc.get("species", [])),
            field_grid=tuple(grid),
            seed=int(doc.get("seed", 0)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            freq_points=int(doc.get("freq_points", 401)),
            span_linewidths=float(doc.get("span_linewidths", 30.0)),
            q_i_wirebond=None if q_wb is None else float(q_wb),
            b_wirebond=float(doc.get("b_wirebond_tesla", traceio.DEFAULT_B_WIREBOND)),
            convention=LossConvention.from_string(doc.get("convention", "paper")),
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
