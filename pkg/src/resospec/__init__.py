"""Resonator spectroscopy of magnetic-field-dependent microwave loss.

The chain goes: fit complex resonance traces (``resfit``), turn a field
sweep of fits into a spin-induced loss curve and decompose it into spectral
features (``sweep``), identify the responsible spin species from the
field-frequency diagram (``sweep``, ``spinmodel``, ``catalog``), and
convert integrated line areas into spin concentrations
(``concentration``).  ``synth`` generates campaigns from the same forward
model for end-to-end validation, and ``cli`` wraps everything for the
shell.
"""

from .core import (
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
)
from .resfit import (
    NormalizationParams,
    circle_fit,
    estimate_delay,
    estimate_s_inf,
    extract_q,
    fit_field_sweep,
    fit_resonance,
    normalize,
    phase_fit,
    pin_coupling_q,
    q_uncertainty,
)
from .spinmodel import (
    SPIN_HALF_MATRIX_ELEMENT_SQ,
    HyperfineSystem,
    SpinBathParams,
    breit_rabi_levels,
    delta_s,
    ensemble_coupling,
    field_for_frequency,
    hyperfine_satellite_fields,
    hyperfine_transitions,
    integrated_loss,
    kappa_s,
    resonator_response,
    satellite_amplitude_ratio,
    spin_loaded_response,
    spin_temperature,
    zeeman_frequency,
)
from .sweep import (
    SweepAnalysis,
    analyze_manifest,
    baseline_subtract,
    build_diagram,
    identify_species,
    multipeak_fit,
    multipeak_model,
    peak_area,
    rescale_field,
)
from .concentration import (
    ConcentrationResult,
    RegressionResult,
    concentration_from_slope,
    regress_area_vs_participation,
)
from .catalog import DEFAULT_CATALOG, load_catalog, save_catalog
from .synth import (
    SynthResonator,
    SynthScenario,
    SynthSpeciesSpec,
    load_scenario,
    synth_sweep,
    synth_trace,
)
from .traceio import (
    SweepManifest,
    load_manifest,
    load_participation,
    parse_csv_trace,
    parse_touchstone_s1p,
    read_results,
    write_results,
)

__version__ = "0.1.0"
