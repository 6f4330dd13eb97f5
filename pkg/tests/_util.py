"""Synthetic-resonator helpers shared across the test modules."""

import numpy as np

from resospec.core import TWO_PI, ProbeGeometry
from resospec.synth import SynthResonator, make_freq_grid, synth_trace

CANON_OMEGA = TWO_PI * 8e9
CANON_SINF = 0.9 * np.exp(0.2j)


def make_res(
    q_i=1e5,
    q_c=1e5,
    geometry=None,
    tau=50e-9,
    phi_0=0.0,
    s_inf=CANON_SINF,
    omega_r=CANON_OMEGA,
    rid="r0",
):
    if geometry is None:
        geometry = ProbeGeometry.reflection()
    return SynthResonator(
        resonator_id=rid,
        omega_r=omega_r,
        q_i=q_i,
        q_c=q_c,
        geometry=geometry,
        tau=tau,
        s_inf=s_inf,
        phi_0=phi_0,
    )


def one_trace(res, n=401, span=30.0, noise=0.0, seed=None, baths=(), extra_kappa=0.0):
    grid = make_freq_grid(res, n, span)
    return synth_trace(
        res, grid, noise_sigma=noise, seed=seed, baths=baths, extra_kappa=extra_kappa
    )
