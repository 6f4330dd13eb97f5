"""Report figures rendered with the non-interactive matplotlib backend.

Every function takes an output path and writes a standalone SVG; nothing
here touches an interactive display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import (
    ComplexTrace,
    DiagramPoint,
    FeatureFit,
    LossCurve,
    ResonatorFit,
    TWO_PI,
)
from . import resfit, spinmodel, sweep
from .concentration import RegressionResult


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_trace_fit(
    trace: ComplexTrace,
    fit: ResonatorFit,
    norm: resfit.NormalizationParams,
    path: str,
) -> None:
    """Two panels: magnitude vs frequency and the normalized circle."""
    normalized = resfit.normalize(trace, norm)
    f_ghz = trace.freq / (TWO_PI * 1e9)
    model = spinmodel.resonator_response(
        trace.freq,
        fit.omega_r,
        fit.omega_r / fit.Q_i,
        fit.omega_r / fit.Q_c,
        fit.geometry,
        fit.phi_0,
    )

    fig, (ax_mag, ax_circ) = plt.subplots(
        1, 2, figsize=(9, 4), gridspec_kw={"width_ratios": [1.4, 1]}
    )
    ax_mag.plot(f_ghz, np.abs(normalized.s), ".", ms=3, label="data")
    ax_mag.plot(f_ghz, np.abs(model), "-", lw=1, label="fit")
    ax_mag.axvline(fit.omega_r / (TWO_PI * 1e9), color="0.7", lw=0.8, zorder=0)
    ax_mag.set_xlabel("frequency (GHz)")
    ax_mag.set_ylabel("|S|")
    ax_mag.legend(frameon=False)
    ax_mag.set_title(
        f"$Q_i$ = {fit.Q_i:.3g},  $Q_c$ = {fit.Q_c:.3g}", fontsize=10
    )

    ax_circ.plot(normalized.s.real, normalized.s.imag, ".", ms=3)
    ax_circ.plot(model.real, model.imag, "-", lw=1)
    ax_circ.plot(1, 0, "k+", ms=8)
    ax_circ.set_aspect("equal")
    ax_circ.set_xlabel("Re S")
    ax_circ.set_ylabel("Im S")

    fig.tight_layout()
    _save(fig, path)


def plot_loss_curve(
    curve: LossCurve,
    features: tuple[FeatureFit, ...] | list[FeatureFit],
    path: str,
    title: str = "",
) -> None:
    """Field-dependent loss with fitted components and their sum."""
    fig, ax = plt.subplots(figsize=(7, 4))
    b_mt = 1e3 * curve.b0
    if curve.sigma is not None:
        ax.errorbar(
            b_mt, curve.kappa_s, yerr=curve.sigma, fmt=".", ms=4,
            elinewidth=0.7, capsize=0, label="data", zorder=2,
        )
    else:
        ax.plot(b_mt, curve.kappa_s, ".", ms=4, label="data", zorder=2)
    active = [f for f in features if f.peak_height > 0]
    if active:
        b_fine = np.linspace(curve.b0[0], curve.b0[-1], 2000)
        for feat in active:
            ax.plot(
                1e3 * b_fine,
                sweep.multipeak_model(b_fine, [feat]),
                lw=0.9,
                alpha=0.8,
                label=feat.species_label,
            )
        ax.plot(
            1e3 * b_fine,
            sweep.multipeak_model(b_fine, active),
            "k-",
            lw=1.2,
            label="sum",
            zorder=3,
        )
    ax.set_xlabel("magnetic field (mT)")
    ax.set_ylabel(r"$\kappa_s$ (rad/s)")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_diagram(
    points: list[DiagramPoint],
    g_value: float,
    delta_0: float,
    path: str,
) -> None:
    """Feature frequency vs field with the fitted straight line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    b = np.array([p.b_feature for p in points])
    w = np.array([p.omega_r for p in points])
    sig = np.array([p.sigma_b for p in points])
    ax.errorbar(
        1e3 * b, w / (TWO_PI * 1e9), xerr=1e3 * sig, fmt="o", ms=4,
        elinewidth=0.8, label="features",
    )
    b_fine = np.linspace(0.0, 1.05 * b.max(), 100)
    from .core import CONSTANTS

    slope = g_value * CONSTANTS.mu_B / CONSTANTS.hbar
    ax.plot(
        1e3 * b_fine,
        (delta_0 + slope * b_fine) / (TWO_PI * 1e9),
        "-",
        lw=1,
        label=(
            f"g = {g_value:.3f}, "
            f"$\\Delta_0/2\\pi$ = {delta_0 / (TWO_PI * 1e9):.3f} GHz"
        ),
    )
    ax.set_xlabel("magnetic field (mT)")
    ax.set_ylabel("frequency (GHz)")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_area_regression(
    participations: np.ndarray,
    areas: np.ndarray,
    result: RegressionResult,
    path: str,
    sigma_areas: np.ndarray | None = None,
    xlabel: str = "participation",
) -> None:
    """Integrated line area against participation with the fitted line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    p = np.asarray(participations, dtype=float)
    a = np.asarray(areas, dtype=float)
    if sigma_areas is not None:
        ax.errorbar(p, 1e3 * a, yerr=1e3 * np.asarray(sigma_areas), fmt="o", ms=4)
    else:
        ax.plot(p, 1e3 * a, "o", ms=4)
    p_fine = np.linspace(0.0, 1.05 * p.max(), 50)
    ax.plot(
        p_fine,
        1e3 * (result.intercept + result.slope * p_fine),
        "-",
        lw=1,
        label=f"slope = {result.slope:.3g} T,  $R^2$ = {result.r_squared:.3f}",
    )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("line area (mT)")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)
