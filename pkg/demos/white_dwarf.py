"""
White dwarfs approach a limiting mass
=====================================

The degenerate-electron pressure is soft (gamma -> 4/3) at high density.
Masses therefore saturate at the mass of the gamma = 4/3 polytrope with the
same high-density coefficient, yet every white dwarf stays stable.
"""

import numpy as np

from starstab import equilibrium as eq
from starstab import mrcurve
from starstab import spectral as sp
from starstab.eos import WhiteDwarf

wd = WhiteDwarf(A=1.0, B=1.0)
limit = eq.integrate_profile(wd.high_density_polytrope(), 1.0).M
print(f"limiting mass (gamma = 4/3 polytrope): {limit:.6f}")

curve = mrcurve.trace_curve(wd, 1.0, 1e5, N=21)
for mu, M, R in zip(curve.mus[::4], curve.Ms[::4], curve.Rs[::4]):
    print(f"mu = {mu:9.3g}   M = {M:.6f}   M / limit = {M / limit:.4f}   R = {R:.4f}")

# Mass and compactness both increase along the whole branch ...
print("M' > 0 everywhere:", bool(np.all(curve.dM > 0)))
print("(M/R)' > 0 everywhere:", bool(np.all(curve.dMR > 0)))

# ... and the lowest radial pulsation frequency stays real.
for mu in (1.0, 100.0, 1e4):
    omega2 = sp.eddington_spectrum(eq.integrate_profile(wd, mu), k=1).eigenvalues[0]
    print(f"mu = {mu:8.3g}   lowest omega^2 = {omega2:.6g}")
