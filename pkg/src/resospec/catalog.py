"""Default species catalog and catalog file I/O.

The shipped catalog covers the surface species commonly seen on
superconductor-on-sapphire resonators: OH-type radicals at g = 2, atomic
hydrogen with its hyperfine-split satellite pair, superoxide on the oxide,
a sharp unassigned sapphire line near g = 4.7, a film defect line with a
finite zero-field splitting, and the broad field-activated O2 plateau.
A faint g = 3.3 line is carried as an optional extra entry.

Catalog files are JSON arrays with frequencies in GHz:

    [{"label": "...", "g": 2.0, "delta_0_ghz": 0.0, "gamma_ghz": 0.4,
      "shape": "lorentzian", "hyperfine_a_ghz": null}, ...]
"""

from __future__ import annotations

import json

from .core import TWO_PI, DataFormatError, LineShape, SpinSpecies

# Hyperfine constant of atomic hydrogen, A/2pi in GHz.  Literature values
# near 1.42 GHz are standard; 1.45 GHz also appears and is kept available.
HYDROGEN_HYPERFINE_GHZ = 1.42
HYDROGEN_HYPERFINE_ALT_GHZ = 1.45

DEFAULT_CATALOG: tuple[SpinSpecies, ...] = (
    SpinSpecies(
        label="oh_radical",
        g=2.00,
        delta_0=0.0,
        gamma_line=TWO_PI * 0.4e9,
    ),
    SpinSpecies(
        label="hydrogen",
        g=2.00,
        delta_0=0.0,
        gamma_line=TWO_PI * 0.4e9,
        hyperfine_A=TWO_PI * HYDROGEN_HYPERFINE_GHZ * 1e9,
    ),
    SpinSpecies(
        label="superoxide",
        g=1.77,
        delta_0=TWO_PI * 1.04e9,
        gamma_line=TWO_PI * 0.9e9,
    ),
    SpinSpecies(
        label="sapphire_g4.7",
        g=4.66,
        delta_0=TWO_PI * 1.07e9,
        gamma_line=TWO_PI * 0.1e9,
    ),
    SpinSpecies(
        label="film_defect",
        g=1.85,
        delta_0=TWO_PI * 0.28e9,
        gamma_line=TWO_PI * 0.5e9,
        shape=LineShape.SPLIT_LORENTZIAN,
    ),
    SpinSpecies(
        label="o2_plateau",
        g=4.0,
        delta_0=0.0,
        gamma_line=TWO_PI * 1.0e9,
        shape=LineShape.PLATEAU,
    ),
    SpinSpecies(
        label="faint_g3.3",
        g=3.3,
        delta_0=0.0,
        gamma_line=TWO_PI * 0.5e9,
    ),
)


def species_to_dict(sp: SpinSpecies) -> dict:
    return {
        "label": sp.label,
        "g": sp.g,
        "delta_0_ghz": sp.delta_0 / TWO_PI / 1e9,
        "gamma_ghz": sp.gamma_line / TWO_PI / 1e9,
        "shape": sp.shape.value,
        "hyperfine_a_ghz": (
            None if sp.hyperfine_A is None else sp.hyperfine_A / TWO_PI / 1e9
        ),
    }


def species_from_dict(d: dict) -> SpinSpecies:
    try:
        hyper = d.get("hyperfine_a_ghz")
        return SpinSpecies(
            label=str(d.get("label", "")),
            g=float(d["g"]),
            delta_0=TWO_PI * 1e9 * float(d.get("delta_0_ghz", 0.0)),
            gamma_line=TWO_PI * 1e9 * float(d["gamma_ghz"]),
            shape=LineShape(d.get("shape", "lorentzian")),
            hyperfine_A=None if hyper is None else TWO_PI * 1e9 * float(hyper),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad species entry {d!r}: {exc}") from None


def load_catalog(path: str) -> list[SpinSpecies]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise DataFormatError(f"{path}: catalog must be a JSON array")
    return [species_from_dict(d) for d in doc]


def save_catalog(path: str, species: list[SpinSpecies]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([species_to_dict(sp) for sp in species], fh, indent=2, sort_keys=True)
        fh.write("\n")
