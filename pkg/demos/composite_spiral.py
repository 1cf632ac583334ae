"""
Turning points along a spiralling mass-radius curve
===================================================

A composite equation of state that is stiff (gamma_0 = 5/3) at low density
and soft (gamma_inf = 1.1) at high density produces a mass-radius curve that
spirals.  Each mass extremum adds one unstable radial mode.  This script
compares that count with a direct count of growing pulsation modes and with
the negative index of the radial operator D0 corrected by i_mu.
"""

import numpy as np

from starstab import equilibrium as eq
from starstab import mrcurve
from starstab import spectral as sp
from starstab.eos import make_composite

eos = make_composite(1.0, 5 / 3, 1.1, 1.0)
curve = mrcurve.trace_curve(eos, 1e-3, 1e5, N=80)
print("mass extrema:", [(round(mu, 3), kind) for mu, kind in curve.mass_extrema])
print("M/R critical points:", [round(mu, 3) for mu in curve.mr_criticals])

walk = mrcurve.tpp_walk(curve)
print(f"{'mu':>10} {'i_mu':>5} {'n-(D0)':>7} {'formula':>8} {'turning':>8} {'omega^2<0':>10}")
for mu_target in (0.1, 3.0, 12.0, 60.0, 2e3, 2e4):
    i = int(np.argmin(np.abs(np.log(curve.mus / mu_target))))
    mu = float(curve.mus[i])
    model = eq.integrate_profile(eos, mu)
    n_minus = sp.negative_index(sp.assemble_D0(model))
    n_omega = sp.eddington_spectrum(model, k=3).neg_count
    v = walk[i]
    print(f"{mu:10.4g} {v.i_mu:5d} {n_minus:7d} {n_minus - v.i_mu:8d} {v.n_u_tpp:8d} {n_omega:10d}")
