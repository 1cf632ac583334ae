"""
Finite-dimensional separable Hamiltonian systems
================================================

For d/dt (u, v) = JL (u, v) with JL = [[0, B A], [-B^T L, 0]] the number of
unstable eigenvalues equals the negative index of L on range(B A).  On the
center space the flow may still grow, but at most like t^3.
"""

import numpy as np

from starstab import hamiltonian as H

# A 5x5 example whose center flow grows exactly like t^3
triple = H.nilpotent_example()
J = triple.JL
for p in range(1, 5):
    print(f"(JL)^{p} =\n{np.linalg.matrix_power(J, p).astype(int)}")
fit = H.growth_fit(triple)
print(f"fitted growth degree {fit.degree} (slope {fit.slope:.4f})")

# One negative direction of L on range(BA) gives one unstable pair
t = H.assemble(np.diag([-1.0, 2.0, 3.0]), np.eye(3), np.eye(3))
tri = H.trichotomy(t)
print(f"d_u = {tri.d_u}, n^-(L | range BA) = {tri.d_u_index}, lambda_u = {tri.lambda_u:.6f}")

# The midpoint rule conserves the energy <L u, u> + <A v, v>
traj = H.evolve(t, np.ones(6), 50.0, 0.01)
print(f"relative energy drift over 5000 steps: {traj.drift:.2e}")

# The index formula on a seeded random corpus
ledger = H.run_corpus(seed=12345, n=50)
print("corpus failures:", ledger["failures"])
