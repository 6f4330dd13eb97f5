"""Command-line interface.

Subcommands cover the whole chain: ``synth`` generates a campaign from a
scenario file, ``fit-trace`` fits one trace, ``analyze-sweep`` runs the
field-sweep analysis for one or more manifests, ``species-id`` matches a
fitted line against the species catalog, and ``concentration`` turns an
area-vs-participation table into a spin concentration.

Exit codes: 0 success, 1 fit failure (no resonance, degenerate circle,
unidentifiable line), 2 bad input or usage.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from .core import (
    CONSTANTS,
    TWO_PI,
    DataFormatError,
    FitError,
    LossConvention,
    ProbeGeometry,
)
from . import catalog as catalog_mod
from . import concentration as conc_mod
from . import resfit, sweep, synth, traceio

SEED_ENV_VAR = "RESOSPEC_SEED"


def _load_templates(args) -> list:
    cat = (
        catalog_mod.load_catalog(args.catalog)
        if getattr(args, "catalog", None)
        else list(catalog_mod.DEFAULT_CATALOG)
    )
    labels = getattr(args, "labels", None)
    if not labels:
        return cat
    by_label = {sp.label: sp for sp in cat}
    picked = []
    for label in labels.split(","):
        label = label.strip()
        if label not in by_label:
            raise DataFormatError(
                f"unknown species label {label!r}; catalog has "
                f"{sorted(by_label)}"
            )
        picked.append(by_label[label])
    return picked


def _cmd_fit_trace(args) -> int:
    trace = traceio.parse_csv_or_touchstone(args.trace)
    geometry = ProbeGeometry.from_string(args.geometry)
    fit, norm = resfit.fit_resonance(trace, geometry, return_norm=True)
    print(f"f_r      = {fit.omega_r / TWO_PI / 1e9:.9g} GHz")
    print(f"Q_i      = {fit.Q_i:.6g}  (sigma(1/Q_i) = {fit.sigma_inv_Qi:.3g})")
    print(f"Q_c      = {fit.Q_c:.6g}")
    print(f"Q_l      = {fit.Q_l:.6g}")
    print(f"phi_0    = {fit.phi_0:.6g} rad")
    print(f"tau      = {norm.tau * 1e9:.6g} ns")
    print(f"geometry = {fit.geometry}")
    if args.json:
        traceio.write_results(args.json, [fit])
        print(f"wrote {args.json}")
    if args.figure:
        from . import plots

        plots.plot_trace_fit(trace, fit, norm, args.figure)
        print(f"wrote {args.figure}")
    return 0


def _cmd_analyze_sweep(args) -> int:
    templates = _load_templates(args) if (args.labels or args.catalog) else []
    window = None
    if args.window:
        window = (1e-3 * args.window[0], 1e-3 * args.window[1])
    rescale_to = TWO_PI * 1e9 * args.rescale_ghz if args.rescale_ghz else None
    q_wb = None if args.no_wirebond else args.q_wirebond
    os.makedirs(args.out_dir, exist_ok=True)

    analyses = []
    for manifest_path in args.manifest:
        manifest = traceio.load_manifest(manifest_path)
        analysis = sweep.analyze_manifest(
            manifest,
            templates,
            q_i_wirebond=q_wb,
            rescale_to=rescale_to,
            fit_window=window,
            pin_qc=not args.no_pin_qc,
            jobs=args.jobs,
        )
        analyses.append(analysis)
        stem = os.path.join(args.out_dir, analysis.resonator_id)
        traceio.write_json_doc(
            stem + "_results.json",
            traceio.sweep_results_doc(
                analysis.resonator_id,
                analysis.points,
                analysis.curve,
                analysis.features,
            ),
        )
        traceio.write_loss_csv(stem + "_loss.csv", analysis.curve)
        if analysis.features:
            traceio.write_features_csv(stem + "_features.csv", analysis.features)
        if args.figures:
            from . import plots

            plots.plot_loss_curve(
                analysis.curve,
                analysis.features,
                stem + "_loss.svg",
                title=analysis.resonator_id,
            )
        n_feat = sum(1 for f in analysis.features if f.peak_height > 0)
        print(
            f"{analysis.resonator_id}: {len(analysis.points)} points, "
            f"{n_feat} features -> {stem}_results.json"
        )

    if args.diagram_species:
        pts = []
        for analysis in analyses:
            pts += [
                p
                for f, p in analysis.labeled_diagram_points
                if f.species_label == args.diagram_species
            ]
        if len(pts) < 2:
            raise FitError(
                f"need at least 2 resonators with feature "
                f"{args.diagram_species!r} for a diagram, got {len(pts)}"
            )
        g_fit, delta_0, cov = sweep.build_diagram(pts)
        species, score = sweep.identify_species(
            g_fit, delta_0, list(catalog_mod.DEFAULT_CATALOG)
        )
        diagram = {
            "species_label": args.diagram_species,
            "g": g_fit,
            "delta_0_ghz": delta_0 / (TWO_PI * 1e9),
            "sigma_g": float(np.sqrt(cov[1, 1])),
            "sigma_delta_0_ghz": float(np.sqrt(cov[0, 0])) / (TWO_PI * 1e9),
            "best_match": species.label,
            "match_score": score,
        }
        path = os.path.join(args.out_dir, "diagram.json")
        traceio.write_json_doc(path, diagram)
        print(
            f"diagram: g = {g_fit:.4g}, delta_0/2pi = "
            f"{delta_0 / (TWO_PI * 1e9):.4g} GHz, best match "
            f"{species.label!r} (score {score:.3f}) -> {path}"
        )
        if args.figures:
            from . import plots

            plots.plot_diagram(
                pts, g_fit, delta_0, os.path.join(args.out_dir, "diagram.svg")
            )
    return 0


def _cmd_species_id(args) -> int:
    cat = (
        catalog_mod.load_catalog(args.catalog)
        if args.catalog
        else list(catalog_mod.DEFAULT_CATALOG)
    )
    delta_0 = TWO_PI * 1e9 * args.delta0_ghz
    species, score = sweep.identify_species(args.g, delta_0, cat)
    print(f"best match: {species.label} (score {score:.4f})")
    scored = sorted(
        ((sweep.identify_species(args.g, delta_0, [sp])[1], sp) for sp in cat),
        reverse=True,
        key=lambda t: t[0],
    )
    for s, sp in scored:
        d0 = 0.0 if sp.delta_0 == 0 else sp.delta_0 / (TWO_PI * 1e9)
        print(f"  {sp.label:<16} g = {sp.g:<6g} delta_0 = {d0:g} GHz  score = {s:.4f}")
    return 0


def _read_area_table(path: str):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: empty file")
        names = [n.strip().lower() for n in reader.fieldnames]
        for col in ("participation", "area_tesla"):
            if col not in names:
                raise DataFormatError(f"{path}: missing column {col!r}")
        has_sigma = "sigma_area_tesla" in names
        p, a, s = [], [], []
        for lineno, row in enumerate(reader, start=2):
            vals = {k.strip().lower(): v for k, v in row.items() if k is not None}
            try:
                p.append(float(vals["participation"]))
                a.append(float(vals["area_tesla"]))
                if has_sigma:
                    s.append(float(vals["sigma_area_tesla"]))
            except (TypeError, ValueError, KeyError):
                raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
    if not p:
        raise DataFormatError(f"{path}: no data rows found")
    return np.array(p), np.array(a), (np.array(s) if has_sigma else None)


def _cmd_concentration(args) -> int:
    p, a, sig = _read_area_table(args.table)
    reg = conc_mod.regress_area_vs_participation(p, a, sig)
    convention = LossConvention.from_string(args.convention)
    result = conc_mod.concentration_from_slope(
        reg.slope,
        args.g,
        layer_thickness=1e-9 * args.thickness_nm,
        convention=convention,
        sigma_slope=reg.sigma_slope,
    )
    print(f"slope      = {reg.slope:.6g} +- {reg.sigma_slope:.3g} T")
    print(
        f"intercept  = {reg.intercept:.6g} +- {reg.sigma_intercept:.3g} T"
        f"  ({'consistent with zero' if reg.intercept_consistent_with_zero else 'NOT consistent with zero'})"
    )
    print(f"R^2        = {reg.r_squared:.6f}  (n = {reg.n_points})")
    print(
        f"volume concentration  = {result.volume_m3:.4g} 1/m^3 "
        f"+- {result.sigma_volume_m3:.3g}"
    )
    print(
        f"surface concentration = {result.surface_per_cm2:.4g} 1/cm^2 "
        f"+- {result.sigma_surface_per_cm2:.3g} "
        f"(layer {args.thickness_nm:g} nm, convention {convention.value})"
    )
    if args.figure:
        from . import plots

        plots.plot_area_regression(p, a, reg, args.figure, sigma_areas=sig)
        print(f"wrote {args.figure}")
    return 0


def _cmd_synth(args) -> int:
    scenario = synth.load_scenario(args.scenario)
    seed = args.seed
    if seed is None and SEED_ENV_VAR in os.environ:
        try:
            seed = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise DataFormatError(
                f"{SEED_ENV_VAR} must be an integer, got "
                f"{os.environ[SEED_ENV_VAR]!r}"
            ) from None
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    truth = synth.synth_sweep(scenario, args.out_dir)
    n_traces = len(truth["resonators"]) * len(truth["field_grid_tesla"])
    print(
        f"wrote {len(truth['resonators'])} resonators x "
        f"{len(truth['field_grid_tesla'])} fields = {n_traces} traces "
        f"(seed {scenario.seed}) under {args.out_dir}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resospec",
        description="Resonator spectroscopy of magnetic-field-dependent loss.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-trace", help="fit one resonance trace")
    p.add_argument("trace", help="CSV or Touchstone .s1p trace file")
    p.add_argument(
        "--geometry", default="reflection", choices=("reflection", "hanger")
    )
    p.add_argument("--json", help="write the fit as a JSON results file")
    p.add_argument("--figure", help="write an SVG figure of data and fit")
    p.set_defaults(func=_cmd_fit_trace)

    p = sub.add_parser("analyze-sweep", help="run the field-sweep analysis")
    p.add_argument("manifest", nargs="+", help="sweep manifest CSV file(s)")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument(
        "--labels",
        help="comma-separated catalog labels to fit as features",
    )
    p.add_argument("--catalog", help="species catalog JSON (default: built-in)")
    p.add_argument(
        "--window",
        nargs=2,
        type=float,
        metavar=("LO_MT", "HI_MT"),
        help="feature fit window in mT",
    )
    p.add_argument(
        "--rescale-ghz",
        type=float,
        help="rescale field axes to this common probe frequency (GHz)",
    )
    p.add_argument(
        "--q-wirebond",
        type=float,
        default=sweep.DEFAULT_Q_I_WIREBOND,
        help="wirebond loss step Q (default %(default)g)",
    )
    p.add_argument(
        "--no-wirebond",
        action="store_true",
        help="no wirebond step in the loss baseline",
    )
    p.add_argument(
        "--no-pin-qc",
        action="store_true",
        help="fit Q_c per point instead of pinning the sweep mean",
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel trace fits")
    p.add_argument(
        "--diagram-species",
        help="regress this feature's centers across manifests into (g, delta_0)",
    )
    p.add_argument(
        "--figures", action="store_true", help="also render SVG figures"
    )
    p.set_defaults(func=_cmd_analyze_sweep)

    p = sub.add_parser("species-id", help="match (g, delta_0) to the catalog")
    p.add_argument("--g", type=float, required=True, help="effective g-value")
    p.add_argument(
        "--delta0-ghz",
        type=float,
        required=True,
        help="zero-field splitting / 2 pi in GHz",
    )
    p.add_argument("--catalog", help="species catalog JSON (default: built-in)")
    p.set_defaults(func=_cmd_species_id)

    p = sub.add_parser(
        "concentration", help="spin concentration from an area table"
    )
    p.add_argument(
        "table",
        help="CSV with columns participation, area_tesla[, sigma_area_tesla]",
    )
    p.add_argument("--g", type=float, required=True, help="species g-value")
    p.add_argument(
        "--thickness-nm",
        type=float,
        default=conc_mod.DEFAULT_LAYER_THICKNESS * 1e9,
        help="spin-hosting layer thickness (default %(default)g nm)",
    )
    p.add_argument(
        "--convention",
        default="paper",
        choices=("paper", "derived"),
        help="loss-area normalization convention",
    )
    p.add_argument("--figure", help="write the regression figure as SVG")
    p.set_defaults(func=_cmd_concentration)

    p = sub.add_parser("synth", help="generate a synthetic sweep campaign")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("out_dir", help="campaign output directory")
    p.add_argument(
        "--seed",
        type=int,
        help=f"override the scenario seed (also: {SEED_ENV_VAR} env var)",
    )
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FitError, np.linalg.LinAlgError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
