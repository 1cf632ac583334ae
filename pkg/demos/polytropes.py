"""
Polytropic stars and their scaling laws
=======================================

A polytrope P = K rho^gamma is the simplest equation of state.  Its
equilibria are rescaled copies of one Lane-Emden profile, so mass and
radius follow power laws in the center density mu.
"""

import numpy as np

from starstab import equilibrium as eq
from starstab.eos import Polytrope

# The Lane-Emden surface for a few indices n = 1/(gamma - 1)
for n in (1.0, 1.5, 3.0):
    sol = eq.lane_emden(n)
    print(f"n = {n:3.1f}:  xi_1 = {sol.xi1:.10f}   -xi_1^2 theta'(xi_1) = {sol.minus_xi2_thetaprime:.10f}")

# Equilibria across two decades of center density
mus = np.geomspace(0.1, 10.0, 9)
for gamma in (1.3, 4 / 3, 5 / 3):
    eos = Polytrope(K=1.0, gamma=gamma)
    models = [eq.integrate_profile(eos, mu) for mu in mus]
    slope_M = np.polyfit(np.log(mus), np.log([m.M for m in models]), 1)[0]
    slope_R = np.polyfit(np.log(mus), np.log([m.R for m in models]), 1)[0]
    print(
        f"gamma = {gamma:.4f}:  d log M / d log mu = {slope_M:+.6f} (expect {(3 * gamma - 4) / 2:+.6f}),"
        f"  d log R / d log mu = {slope_R:+.6f} (expect {(gamma - 2) / 2:+.6f})"
    )

# gamma = 4/3 is the marginal case: the mass does not depend on mu at all.
