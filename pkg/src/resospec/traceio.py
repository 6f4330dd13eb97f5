"""File interfaces: Touchstone and CSV traces, sweep manifests, result files.

Only one-port Touchstone version 1 files are supported.  CSV traces carry
columns (freq_hz, s_re, s_im).  A sweep manifest is a CSV table
(b0_tesla, trace_path) preceded by ``# key: value`` preamble lines; trace
paths are interpreted relative to the manifest file.  Analysis results are
written as a single JSON document with an explicit ``schema_version``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TWO_PI,
    ComplexTrace,
    DataFormatError,
    FeatureFit,
    FieldSweepPoint,
    LineShape,
    LossCurve,
    ParticipationRow,
    ParticipationTable,
    ProbeGeometry,
    ResonatorFit,
)

_FREQ_UNIT_HZ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}

RESULTS_SCHEMA_VERSION = 1

DEFAULT_B_WIREBOND = 0.010  # tesla


def _to_trace(freq_hz: list[float], s: list[complex], origin: str) -> ComplexTrace:
    freq = np.asarray(freq_hz, dtype=float)
    if freq.size == 0:
        raise DataFormatError(f"{origin}: no data rows found")
    if freq.size > 1 and not np.all(np.diff(freq) > 0):
        raise DataFormatError(f"{origin}: frequency axis is not strictly increasing")
    return ComplexTrace(freq=TWO_PI * freq, s=np.asarray(s, dtype=complex))


def parse_touchstone_s1p(path: str) -> ComplexTrace:
    """Read a one-port Touchstone v1 file (.s1p).

    Honors the option line (frequency unit and RI/MA/DB format); defaults to
    ``# GHz S MA R 50`` when absent, per the v1 standard.  Version 2 files
    and two-port data are rejected.
    """
    unit_scale = 1e9
    fmt = "ma"
    saw_option = False
    freq_hz: list[float] = []
    svals: list[complex] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("!"):
                continue
            if line.startswith("["):
                # [Version], [Number of Ports], ... are Touchstone v2 keywords.
                raise DataFormatError(
                    f"{path}:{lineno}: Touchstone v2 keyword {line.split()[0]!r} "
                    "is not supported (v1 only)"
                )
            if line.startswith("#"):
                if saw_option:
                    # The standard allows only one option line.
                    raise DataFormatError(f"{path}:{lineno}: repeated option line")
                saw_option = True
                tokens = line[1:].split()
                tl = [t.lower() for t in tokens]
                for t in tl:
                    if t in _FREQ_UNIT_HZ:
                        unit_scale = _FREQ_UNIT_HZ[t]
                    elif t in ("ri", "ma", "db"):
                        fmt = t
                continue
            # Strip trailing comments on data lines.
            if "!" in line:
                line = line.split("!", 1)[0].strip()
            fields = line.split()
            try:
                values = [float(x) for x in fields]
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: non-numeric data {line!r}"
                ) from None
            if len(values) != 3:
                if len(values) in (5, 9):
                    raise DataFormatError(
                        f"{path}:{lineno}: {len(values)} columns look like "
                        "two-port data; only one-port files are supported"
                    )
                raise DataFormatError(
                    f"{path}:{lineno}: expected 3 columns (f, a, b), got {len(values)}"
                )
            f, a, b = values
            freq_hz.append(f * unit_scale)
            if fmt == "ri":
                svals.append(complex(a, b))
            elif fmt == "ma":
                svals.append(a * np.exp(1j * math.radians(b)))
            else:  # db
                svals.append(10.0 ** (a / 20.0) * np.exp(1j * math.radians(b)))
    return _to_trace(freq_hz, svals, path)


def parse_csv_trace(path: str) -> ComplexTrace:
    """Read a CSV trace with columns freq_hz, s_re, s_im (extras ignored)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: empty file")
        names = [n.strip().lower() for n in reader.fieldnames]
        required = ("freq_hz", "s_re", "s_im")
        for col in required:
            if col not in names:
                raise DataFormatError(f"{path}: missing column {col!r}")
        idx = {col: names.index(col) for col in required}
        freq_hz: list[float] = []
        svals: list[complex] = []
        for lineno, row in enumerate(reader, start=2):
            vals = list(row.values())
            # DictReader folds extras; re-read positionally via the header order.
            try:
                f = float(vals[idx["freq_hz"]])
                re = float(vals[idx["s_re"]])
                im = float(vals[idx["s_im"]])
            except (TypeError, ValueError, IndexError):
                raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            freq_hz.append(f)
            svals.append(complex(re, im))
    return _to_trace(freq_hz, svals, path)


def parse_csv_or_touchstone(path: str) -> ComplexTrace:
    """Dispatch on file extension: .s1p/.s2p go to the Touchstone parser."""
    lower = path.lower()
    if lower.endswith(".s2p"):
        raise DataFormatError(f"{path}: two-port Touchstone files are not supported")
    if lower.endswith(".s1p"):
        return parse_touchstone_s1p(path)
    return parse_csv_trace(path)


def write_csv_trace(path: str, trace: ComplexTrace) -> None:
    """Write a trace in the CSV format parse_csv_trace reads, full precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("freq_hz,s_re,s_im\n")
        for w, s in zip(trace.freq, trace.s):
            fh.write(f"{w / TWO_PI:.17g},{s.real:.17g},{s.imag:.17g}\n")


@dataclass(frozen=True)
class ManifestEntry:
    b0: float
    trace_path: str


@dataclass(frozen=True)
class SweepManifest:
    """A field sweep: ordered (B0, trace file) entries plus header metadata.

    ``trace_path`` entries are stored resolved against the manifest
    directory so callers can open them directly.
    """

    resonator_id: str
    geometry: ProbeGeometry
    entries: tuple[ManifestEntry, ...]
    q_i_zero_field: float | None = None
    b_wirebond: float = DEFAULT_B_WIREBOND

    def __post_init__(self) -> None:
        if not self.resonator_id:
            raise ValueError("resonator_id must be non-empty")
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("manifest has no entries")
        b0s = [e.b0 for e in entries]
        if len(set(b0s)) != len(b0s):
            raise ValueError("duplicate field values in manifest")
        if sorted(b0s) != b0s:
            entries = tuple(sorted(entries, key=lambda e: e.b0))
        if self.q_i_zero_field is not None and not (
            math.isfinite(self.q_i_zero_field) and self.q_i_zero_field > 0
        ):
            raise ValueError("q_i_zero_field must be positive when given")
        if not (math.isfinite(self.b_wirebond) and self.b_wirebond >= 0):
            raise ValueError("b_wirebond must be non-negative")
        object.__setattr__(self, "entries", entries)

    @property
    def fields(self) -> np.ndarray:
        return np.array([e.b0 for e in self.entries])


def load_manifest(path: str) -> SweepManifest:
    """Read a sweep manifest CSV with ``# key: value`` preamble lines."""
    meta: dict[str, str] = {}
    rows: list[tuple[float, str]] = []
    header: list[str] | None = None
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" not in body:
                    raise DataFormatError(
                        f"{path}:{lineno}: preamble line must be '# key: value'"
                    )
                key, value = body.split(":", 1)
                meta[key.strip().lower()] = value.strip()
                continue
            if header is None:
                header = [c.strip().lower() for c in line.split(",")]
                if header[:2] != ["b0_tesla", "trace_path"]:
                    raise DataFormatError(
                        f"{path}:{lineno}: expected header 'b0_tesla,trace_path', "
                        f"got {line!r}"
                    )
                continue
            parts = [c.strip() for c in line.split(",")]
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: malformed row {line!r}")
            try:
                b0 = float(parts[0])
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: bad field value {parts[0]!r}"
                ) from None
            rows.append((b0, os.path.join(base, parts[1])))
    if header is None or not rows:
        raise DataFormatError(f"{path}: no manifest rows found")
    if "resonator_id" not in meta:
        raise DataFormatError(f"{path}: preamble missing 'resonator_id'")
    if "geometry" not in meta:
        raise DataFormatError(f"{path}: preamble missing 'geometry'")
    b0s = [b for b, _ in rows]
    if len(set(b0s)) != len(b0s):
        raise DataFormatError(f"{path}: duplicate b0_tesla entries")
    q_i_zero = None
    if "q_i_zero_field" in meta:
        try:
            q_i_zero = float(meta["q_i_zero_field"])
        except ValueError:
            raise DataFormatError(f"{path}: bad q_i_zero_field value") from None
    b_wb = DEFAULT_B_WIREBOND
    if "b_wirebond_tesla" in meta:
        try:
            b_wb = float(meta["b_wirebond_tesla"])
        except ValueError:
            raise DataFormatError(f"{path}: bad b_wirebond_tesla value") from None
    try:
        return SweepManifest(
            resonator_id=meta["resonator_id"],
            geometry=ProbeGeometry.from_string(meta["geometry"]),
            entries=tuple(ManifestEntry(b0=b, trace_path=p) for b, p in rows),
            q_i_zero_field=q_i_zero,
            b_wirebond=b_wb,
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_manifest(path: str, manifest: SweepManifest, trace_paths: list[str]) -> None:
    """Write a manifest; ``trace_paths`` are written verbatim (relative)."""
    if len(trace_paths) != len(manifest.entries):
        raise ValueError("trace_paths length does not match manifest entries")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# resonator_id: {manifest.resonator_id}\n")
        fh.write(f"# geometry: {manifest.geometry}\n")
        if manifest.q_i_zero_field is not None:
            fh.write(f"# q_i_zero_field: {manifest.q_i_zero_field:.17g}\n")
        fh.write(f"# b_wirebond_tesla: {manifest.b_wirebond:.17g}\n")
        fh.write("b0_tesla,trace_path\n")
        for entry, rel in zip(manifest.entries, trace_paths):
            fh.write(f"{entry.b0:.17g},{rel}\n")


def load_participation(path: str) -> ParticipationTable:
    """Read a participation CSV with columns resonator_id, p_f, p_sc."""
    rows: list[ParticipationRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: empty file")
        names = [n.strip().lower() for n in reader.fieldnames]
        for col in ("resonator_id", "p_f", "p_sc"):
            if col not in names:
                raise DataFormatError(f"{path}: missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            vals = {k.strip().lower(): v for k, v in row.items() if k is not None}
            try:
                rows.append(
                    ParticipationRow(
                        resonator_id=vals["resonator_id"].strip(),
                        p_f=float(vals["p_f"]),
                        p_sc=float(vals["p_sc"]),
                    )
                )
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    try:
        return ParticipationTable(rows=tuple(rows))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def _fit_to_dict(fit: ResonatorFit) -> dict:
    return {
        "f_r_hz": fit.omega_r / TWO_PI,
        "q_i": fit.Q_i,
        "q_c": fit.Q_c,
        "q_l": fit.Q_l,
        "phi_0_rad": fit.phi_0,
        "circle_center_re": fit.circle_center.real,
        "circle_center_im": fit.circle_center.imag,
        "circle_radius": fit.circle_radius,
        "sigma_radius": fit.sigma_radius,
        "sigma_inv_qi": fit.sigma_inv_Qi,
        "geometry": str(fit.geometry),
    }


def _fit_from_dict(d: dict) -> ResonatorFit:
    return ResonatorFit(
        omega_r=TWO_PI * d["f_r_hz"],
        Q_i=d["q_i"],
        Q_c=d["q_c"],
        Q_l=d["q_l"],
        phi_0=d["phi_0_rad"],
        circle_center=complex(d["circle_center_re"], d["circle_center_im"]),
        circle_radius=d["circle_radius"],
        sigma_radius=d["sigma_radius"],
        sigma_inv_Qi=d["sigma_inv_qi"],
        geometry=ProbeGeometry.from_string(d["geometry"]),
    )


def _feature_to_dict(f: FeatureFit) -> dict:
    d = {
        "species_label": f.species_label,
        "shape": f.shape.value,
        "peak_height_rad_per_s": f.peak_height,
        "center_field_tesla": f.center_field,
        "width_field_tesla": f.width_field,
        "area_tesla": f.area,
        "f_ref_hz": f.omega_r_ref / TWO_PI,
        "fit_window_tesla": list(f.fit_window),
    }
    if f.width_left is not None:
        d["width_left_tesla"] = f.width_left
        d["width_right_tesla"] = f.width_right
    return d


def _feature_from_dict(d: dict) -> FeatureFit:
    return FeatureFit(
        species_label=d["species_label"],
        shape=LineShape(d["shape"]),
        peak_height=d["peak_height_rad_per_s"],
        center_field=d["center_field_tesla"],
        width_field=d["width_field_tesla"],
        area=d["area_tesla"],
        omega_r_ref=TWO_PI * d["f_ref_hz"],
        fit_window=tuple(d["fit_window_tesla"]),
        width_left=d.get("width_left_tesla"),
        width_right=d.get("width_right_tesla"),
    )


def write_results(path: str, fits: list) -> None:
    """Write resonator and feature fits to one JSON results document.

    ``fits`` may mix ResonatorFit and FeatureFit instances; they are sorted
    into separate arrays.  The document carries ``schema_version`` so readers
    can reject unknown layouts.
    """
    res, feat = [], []
    for f in fits:
        if isinstance(f, ResonatorFit):
            res.append(_fit_to_dict(f))
        elif isinstance(f, FeatureFit):
            feat.append(_feature_to_dict(f))
        else:
            raise ValueError(f"unsupported result object {type(f).__name__}")
    doc = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "resonator_fits": res,
        "feature_fits": feat,
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path: str) -> tuple[list[ResonatorFit], list[FeatureFit]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != RESULTS_SCHEMA_VERSION:
        raise DataFormatError(
            f"{path}: unsupported schema_version {version!r} "
            f"(expected {RESULTS_SCHEMA_VERSION})"
        )
    fits = [_fit_from_dict(d) for d in doc.get("resonator_fits", [])]
    feats = [_feature_from_dict(d) for d in doc.get("feature_fits", [])]
    return fits, feats


def sweep_results_doc(
    resonator_id: str,
    points: tuple[FieldSweepPoint, ...] | list[FieldSweepPoint],
    curve: LossCurve,
    features: tuple[FeatureFit, ...] | list[FeatureFit],
    diagram: dict | None = None,
) -> dict:
    """Assemble the full per-resonator sweep report as a JSON-ready dict."""
    doc = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "resonator_id": resonator_id,
        "resonator_fits": [
            dict(_fit_to_dict(p.fit), b0_tesla=p.b0) for p in points
        ],
        "loss_curve": {
            "b0_tesla": [float(b) for b in curve.b0],
            "kappa_s_rad_per_s": [float(k) for k in curve.kappa_s],
            "f_ref_hz": curve.omega_r_ref / TWO_PI,
        },
        "feature_fits": [_feature_to_dict(f) for f in features],
    }
    if curve.sigma is not None:
        doc["loss_curve"]["sigma_rad_per_s"] = [float(s) for s in curve.sigma]
    if diagram is not None:
        doc["diagram"] = diagram
    return doc


def write_json_doc(path: str, doc: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_loss_csv(path: str, curve: LossCurve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if curve.sigma is None:
            fh.write("b0_tesla,kappa_s_rad_per_s\n")
            for b, k in zip(curve.b0, curve.kappa_s):
                fh.write(f"{b:.17g},{k:.17g}\n")
        else:
            fh.write("b0_tesla,kappa_s_rad_per_s,sigma_rad_per_s\n")
            for b, k, s in zip(curve.b0, curve.kappa_s, curve.sigma):
                fh.write(f"{b:.17g},{k:.17g},{s:.17g}\n")


def write_features_csv(
    path: str, features: tuple[FeatureFit, ...] | list[FeatureFit]
) -> None:
    cols = (
        "species_label,shape,peak_height_rad_per_s,center_field_tesla,"
        "width_field_tesla,width_left_tesla,width_right_tesla,area_tesla,f_ref_hz"
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(cols + "\n")
        for f in features:
            wl = "" if f.width_left is None else f"{f.width_left:.17g}"
            wr = "" if f.width_right is None else f"{f.width_right:.17g}"
            fh.write(
                f"{f.species_label},{f.shape.value},{f.peak_height:.17g},"
                f"{f.center_field:.17g},{f.width_field:.17g},{wl},{wr},"
                f"{f.area:.17g},{f.omega_r_ref / TWO_PI:.17g}\n"
            )
