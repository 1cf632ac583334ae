"""Finite-dimensional separable linear Hamiltonian systems  d/dt (u, v) = JL (u, v).

With L symmetric on X, A symmetric positive semidefinite on Y and B: Y -> X,

    JL = [[0, B A], [-B^T L, 0]],

and the energy <L u, u> + <A v, v> is conserved.  The number of unstable
eigenvalues equals the negative index of L restricted to range(B A); this module
computes both sides of that identity and the polynomial growth on the center space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from .errors import (
    ConsistencyError,
    IndexFormulaViolation,
    NotSemidefiniteError,
    StepSizeError,
    TrichotomyFailure,
)

RANGE_RTOL = 1e-10
KERNEL_RTOL = 1e-9
MAX_CHAIN = 4


@dataclass(frozen=True)
class SeparableTriple:
    L: np.ndarray
    A: np.ndarray
    B: np.ndarray
    JL: np.ndarray

    @property
    def n_X(self) -> int:
        return self.L.shape[0]

    @property
    def n_Y(self) -> int:
        return self.A.shape[0]

    @property
    def energy_matrix(self) -> np.ndarray:
        """Block-diagonal form diag(L, A) of the conserved quadratic energy."""
        return linalg.block_diag(self.L, self.A)

    def energy(self, w: np.ndarray) -> float:
        return float(w @ self.energy_matrix @ w)


@dataclass(frozen=True)
class Trichotomy:
    """Splitting into unstable, stable and center subspaces.

    ``E_u``, ``E_s``, ``E_c`` hold real orthonormal bases as columns.  The
    center flow is stored as the generalized kernel ``kernel_basis`` together
    with the purely imaginary eigenpairs.
    """

    d_u: int
    d_s: int
    d_c: int
    unstable_eigenvalues: np.ndarray
    unstable_vectors: np.ndarray
    stable_vectors: np.ndarray
    E_u: np.ndarray
    E_s: np.ndarray
    E_c: np.ndarray
    lambda_u: float | None
    d_u_index: int
    kernel_basis: np.ndarray
    center_eigenvalues: np.ndarray
    center_vectors: np.ndarray
    isotropy_defect: float


@dataclass(frozen=True)
class GrowthFit:
    degree: int
    slope: float
    residual: float


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    drift: float


def _sym(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return 0.5 * (M + M.T)


def assemble(L, A, B, tol: float = 1e-10) -> SeparableTriple:
    """Build JL from (L, A, B); L and A are symmetrised on input.

    Raises:
        NotSemidefiniteError: A has an eigenvalue below -tol * max(1, |A|).
    """
    L, A = _sym(L), _sym(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    nX, nY = L.shape[0], A.shape[0]
    if L.shape != (nX, nX) or A.shape != (nY, nY) or B.shape != (nX, nY):
        raise ValueError(f"incompatible shapes L{L.shape}, A{A.shape}, B{B.shape}")
    if nY:
        amin = float(np.linalg.eigvalsh(A)[0])
        if amin < -tol * max(1.0, float(np.abs(A).max())):
            raise NotSemidefiniteError(f"A has eigenvalue {amin:.3e}")
    JL = np.zeros((nX + nY, nX + nY))
    JL[:nX, nX:] = B @ A
    JL[nX:, :nX] = -B.T @ L
    return SeparableTriple(L=L, A=A, B=B, JL=JL)


def nilpotent_example() -> SeparableTriple:
    """The 5x5 example with X = R^2, Y = R^3 whose flow grows like t^3."""
    A = np.diag([0.0, 1.0, 1.0])
    L = np.array([[2.0, -1.0], [-1.0, 0.0]])
    B = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    return assemble(L, A, B)


def _null(M: np.ndarray, rtol: float, ref: float) -> np.ndarray:
    if M.size == 0:
        return np.eye(M.shape[1])
    u, s, vh = linalg.svd(M)
    rank = int(np.sum(s > rtol * ref))
    return vh[rank:].conj().T


def orth_range(M: np.ndarray, rtol: float = RANGE_RTOL) -> np.ndarray:
    """Orthonormal basis of range(M) by column-pivoted QR with rank tolerance rtol*|M|."""
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    Q, R, _ = linalg.qr(M, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    norm = np.linalg.norm(M, 2)
    rank = int(np.sum(diag > rtol * norm)) if norm > 0 else 0
    return Q[:, :rank]


def generalized_kernel(M: np.ndarray, rtol: float = KERNEL_RTOL) -> tuple[np.ndarray, int]:
    """Orthonormal basis of ker(M^k) for the smallest k where the chain stabilises.

    Returns the basis and k.  The chain is built one step at a time,
    ker(M^j) = {x : M x in ker(M^{j-1})}, which avoids forming matrix powers.
    """
    n = M.shape[0]
    ref = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    Q = np.zeros((n, 0))
    k = 0
    while True:
        P = np.eye(n) - Q @ Q.T
        N = _null(P @ M, rtol, ref)
        if N.shape[1] == Q.shape[1]:
            return Q, k
        Q = linalg.orth(N) if N.size else N
        k += 1
        if k > MAX_CHAIN + 1:
            raise ConsistencyError("Jordan chain at zero longer than the theory allows")


def _spectral_split(triple: SeparableTriple):
    """Generalized kernel, an orthonormal basis of the invariant complement and JL on it."""
    JL = triple.JL
    K0, chain = generalized_kernel(JL)
    if chain > MAX_CHAIN:
        raise ConsistencyError(f"zero eigenvalue has a Jordan chain of length {chain}")
    Kt, _ = generalized_kernel(JL.T)
    W = _null(Kt.T, 1e-12, 1.0) if Kt.shape[1] else np.eye(JL.shape[0])
    C = W.T @ JL @ W
    return K0, chain, W, C


def spectrum(triple: SeparableTriple, tol: float = 1e-8) -> np.ndarray:
    """Eigenvalues of JL, with the generalized kernel reported as exact zeros.

    Raises:
        ConsistencyError: the set is not closed under negation and conjugation.
    """
    K0, _, W, C = _spectral_split(triple)
    lam = np.linalg.eigvals(C) if C.size else np.zeros(0, complex)
    eig = np.concatenate((np.zeros(K0.shape[1], complex), lam))
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    for image in (-eig, eig.conj()):
        cost = np.abs(eig[:, None] - image[None, :])
        rows, cols = linear_sum_assignment(cost)
        worst = float(cost[rows, cols].max(initial=0.0))
        if worst > tol * scale:
            raise ConsistencyError(f"Hamiltonian symmetry of the spectrum broken by {worst:.2e}")
    return eig


def restricted_negative_index(L: np.ndarray, basis: np.ndarray, rtol: float = 1e-10) -> int:
    """n^-(L restricted to span(basis)) for an orthonormal ``basis``."""
    if basis.shape[1] == 0:
        return 0
    ev = np.linalg.eigvalsh(_sym(basis.T @ L @ basis))
    ref = max(np.linalg.norm(L, 2), np.finfo(float).tiny)
    return int(np.sum(ev < -rtol * ref))


def _real_basis(V: np.ndarray) -> np.ndarray:
    if V.shape[1] == 0:
        return np.zeros((V.shape[0], 0))
    return orth_range(np.hstack((V.real, V.imag)), 1e-8)


def trichotomy(triple: SeparableTriple, tol: float = 1e-8) -> Trichotomy:
    """Unstable/stable/center splitting with the index formula checked.

    d_u is counted once from the eigenvalues of JL with real part above
    tol * scale and once as n^-(L | range(BA)); a mismatch is fatal.

    Raises:
        IndexFormulaViolation: the two counts differ.
    """
    n = triple.JL.shape[0]
    K0, _, W, C = _spectral_split(triple)
    lam, V = np.linalg.eig(C) if C.size else (np.zeros(0, complex), np.zeros((0, 0)))
    V = W @ V
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    up = lam.real > tol * scale
    down = lam.real < -tol * scale
    mid = ~(up | down)
    d_u = int(up.sum())
    d_index = restricted_negative_index(triple.L, orth_range(triple.B @ triple.A))
    if d_u != d_index:
        raise IndexFormulaViolation(
            f"{d_u} unstable eigenvalues but n^-(L|range BA) = {d_index}"
        )
    order = np.argsort(-lam[up].real)
    Vu = V[:, up][:, order]
    Vs = V[:, down]
    E_u, E_s = _real_basis(Vu), _real_basis(Vs)
    H = triple.energy_matrix
    hyperbolic = np.hstack((E_u, E_s))
    if hyperbolic.shape[1]:
        E_c = _null(hyperbolic.T @ H, 1e-10, max(np.linalg.norm(H, 2), 1.0))
    else:
        E_c = np.eye(n)
    isotropy = 0.0
    for E in (E_u, E_s):
        if E.shape[1]:
            isotropy = max(isotropy, float(np.abs(E.T @ H @ E).max()))
    unstable = lam[up][order].real
    return Trichotomy(
        d_u=d_u,
        d_s=int(down.sum()),
        d_c=int(mid.sum()) + K0.shape[1],
        unstable_eigenvalues=unstable,
        unstable_vectors=Vu,
        stable_vectors=Vs,
        E_u=E_u,
        E_s=E_s,
        E_c=E_c,
        lambda_u=float(unstable.min()) if d_u else None,
        d_u_index=d_index,
        kernel_basis=K0,
        center_eigenvalues=lam[mid],
        center_vectors=V[:, mid],
        isotropy_defect=isotropy,
    )


def _center_propagator(triple: SeparableTriple, tri: Trichotomy):
    """t -> |exp(t JL)| on the center space, via the nilpotent and oscillatory parts."""
    K0 = tri.kernel_basis
    N0 = K0.T @ triple.JL @ K0
    powers = [np.eye(N0.shape[0])]
    for _ in range(MAX_CHAIN):
        powers.append(powers[-1] @ N0)
    E = np.hstack((K0.astype(complex), tri.center_vectors))
    if E.shape[1] == 0:
        return lambda t: 0.0
    Qc = _real_basis(E)
    S = np.linalg.lstsq(E, Qc.astype(complex), rcond=None)[0]
    k = K0.shape[1]
    lam = tri.center_eigenvalues

    def norm(t: float) -> float:
        nil = sum(p * t**j / math.factorial(j) for j, p in enumerate(powers))
        block = np.zeros((E.shape[1], E.shape[1]), complex)
        block[:k, :k] = nil
        block[k:, k:] = np.diag(np.exp(lam * t))
        return float(np.linalg.norm(E @ block @ S, 2))

    return norm


def growth_fit(
    triple: SeparableTriple,
    T: float = 1e4,
    samples: int = 24,
    tri: Trichotomy | None = None,
    per_bin: int = 48,
) -> GrowthFit:
    """Least-squares slope of log sup_{s<=t} |exp(s JL)|_{E^c}| against log t on [T/10, T].

    Oscillating modes make the pointwise norm beat, so every one of the
    ``samples`` log-spaced bins is sampled ``per_bin`` times and the running
    maximum is fitted.

    Raises:
        TrichotomyFailure: growth on the center space is faster than any
            polynomial of degree MAX_CHAIN - 1.
    """
    if tri is None:
        tri = trichotomy(triple)
    norm = _center_propagator(triple, tri)
    edges = np.geomspace(T / 10.0, T, samples + 1)
    ts = edges[1:]
    vals = np.empty(samples)
    for b in range(samples):
        vals[b] = max(norm(t) for t in np.linspace(edges[b], edges[b + 1], per_bin))
    vals = np.maximum.accumulate(vals)
    if np.all(vals == 0):
        return GrowthFit(0, 0.0, 0.0)
    if not np.all(np.isfinite(vals)):
        raise TrichotomyFailure("center-space propagator overflowed")
    lt, lv = np.log(ts), np.log(vals)
    slope, icpt = np.polyfit(lt, lv, 1)
    resid = float(np.sqrt(np.mean((lv - (slope * lt + icpt)) ** 2)))
    if slope > MAX_CHAIN - 0.5:
        raise TrichotomyFailure(f"center-space growth slope {slope:.2f} exceeds t^3")
    return GrowthFit(degree=max(0, int(round(slope))), slope=float(slope), residual=resid)


def growth_degree(triple: SeparableTriple, T: float = 1e4, samples: int = 24) -> int:
    """Polynomial degree of the growth of exp(t JL) on the center space."""
    return growth_fit(triple, T, samples).degree


def max_frequency(triple: SeparableTriple) -> float:
    return float(np.abs(np.linalg.eigvals(triple.JL)).max(initial=0.0))


def evolve(
    triple: SeparableTriple,
    w0,
    t_end: float,
    dt: float,
    record_every: int = 1,
) -> Trajectory:
    """Implicit midpoint integration of dw/dt = JL w.

    The midpoint rule keeps every quadratic invariant of a linear flow, so the
    energy <Lw, w> changes only by rounding.

    Raises:
        StepSizeError: dt * max|eigenvalue| >= 0.5.
    """
    lam_max = max_frequency(triple)
    if dt * lam_max >= 0.5:
        raise StepSizeError(f"dt * |lambda|_max = {dt * lam_max:.3f} >= 0.5")
    JL = triple.JL
    n = JL.shape[0]
    I = np.eye(n)
    lu = linalg.lu_factor(I - 0.5 * dt * JL)
    plus = I + 0.5 * dt * JL
    H = triple.energy_matrix
    steps = int(round(t_end / dt))
    w = np.asarray(w0, dtype=float).copy()
    times, states, energy = [0.0], [w.copy()], [float(w @ H @ w)]
    e0 = energy[0]
    drift = 0.0
    peak = float(w @ w)
    for s in range(1, steps + 1):
        w = linalg.lu_solve(lu, plus @ w)
        e = float(w @ H @ w)
        peak = max(peak, float(w @ w))
        drift = max(drift, abs(e - e0) / peak)
        if s % record_every == 0 or s == steps:
            times.append(s * dt)
            states.append(w.copy())
            energy.append(e)
    hnorm = max(np.linalg.norm(H, 2), np.finfo(float).tiny)
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        energy=np.array(energy),
        drift=drift / hnorm,
    )


def growth_rate(traj: Trajectory, start_fraction: float = 0.5) -> float:
    """Slope of log|w(t)| over the final part of a trajectory."""
    t = traj.times
    keep = t >= start_fraction * t[-1]
    return float(np.polyfit(t[keep], np.log(np.linalg.norm(traj.states[keep], axis=1)), 1)[0])


# ---- structural conditions for sharper growth bounds ----------------------------


def injective_on_range(triple: SeparableTriple) -> bool:
    """A injective on range(B^T L B A): caps center growth at t^2."""
    Q = orth_range(triple.B.T @ triple.L @ triple.B @ triple.A)
    if Q.shape[1] == 0:
        return True
    return orth_range(triple.A @ Q, 1e-8).shape[1] == Q.shape[1]


def range_is_full(triple: SeparableTriple) -> bool:
    """range(BA) = X: caps center growth at t."""
    return orth_range(triple.B @ triple.A).shape[1] == triple.n_X


def _nondegenerate_on(M: np.ndarray, Q: np.ndarray, rtol: float = 1e-8) -> bool:
    if Q.shape[1] == 0:
        return True
    ev = np.linalg.eigvalsh(_sym(Q.T @ M @ Q))
    return float(np.abs(ev).min()) > rtol * max(np.linalg.norm(M, 2), np.finfo(float).tiny)


def nondegenerate_ranges(triple: SeparableTriple) -> bool:
    """L non-degenerate on range(B) and A on range(B^T): center flow bounded."""
    return _nondegenerate_on(triple.L, orth_range(triple.B)) and _nondegenerate_on(
        triple.A, orth_range(triple.B.T)
    )


def is_semisimple_off_zero(triple: SeparableTriple, tri: Trichotomy, rtol: float = 1e-7) -> bool:
    """Every eigenvalue with nonzero imaginary part has a full set of eigenvectors.

    Algebraic multiplicity is the size of the eigenvalue cluster around z.  A
    simple eigenvalue is trivially semi-simple; for a cluster the ranks of
    (JL - z) and (JL - z)^2 are compared.  Testing simple eigenvalues by rank
    would misfire on small |z|, where the squared singular values of JL - z
    drop below any fixed threshold.
    """
    JL = triple.JL
    n = JL.shape[0]
    ref = max(1.0, np.linalg.norm(JL, 2))
    lam_all = np.linalg.eigvals(JL)
    seen: list[complex] = []
    for z in tri.center_eigenvalues:
        if abs(z.imag) <= 1e-8 * ref or any(abs(z - s) < 1e-6 * ref for s in seen):
            continue
        seen.append(z)
        if int(np.sum(np.abs(lam_all - z) < 1e-6 * ref)) < 2:
            continue
        M = JL - z * np.eye(n)
        s1 = linalg.svdvals(M)
        s2 = linalg.svdvals(M @ M)
        r1 = int(np.sum(s1 > rtol * ref))
        r2 = int(np.sum(s2 > rtol * ref * ref))
        if r1 != r2:
            return False
    return True


def random_triple(rng: np.random.Generator, max_dim: int = 12) -> SeparableTriple:
    """Random triple with mixed-signature L, semidefinite A of random rank and random B."""
    nX = int(rng.integers(1, max_dim + 1))
    nY = int(rng.integers(1, max_dim + 1))
    QL = linalg.qr(rng.normal(size=(nX, nX)))[0]
    diagL = rng.uniform(0.2, 2.0, nX) * rng.choice([-1.0, 1.0], nX)
    L = QL @ np.diag(diagL) @ QL.T
    rank = int(rng.integers(0, nY + 1))
    G = rng.normal(size=(nY, rank))
    A = G @ G.T
    if rng.random() < 0.25:
        rB = int(rng.integers(0, min(nX, nY) + 1))
        B = rng.normal(size=(nX, rB)) @ rng.normal(size=(rB, nY))
    else:
        B = rng.normal(size=(nX, nY))
    return assemble(L, A, B)


def radial_triple(model, N: int = 100) -> SeparableTriple:
    """Separable triple of radial pulsations built on the Eddington discretisation.

    Coordinates are mass-weighted: y = W^{1/2} v for nodal displacements v with
    the lumped weight W = int rho v^2 4 pi r^2, so multiplication by rho becomes
    A = I.  B is the identity and L = W^{-1/2} K W^{-1/2} is the radial density
    form evaluated on the perturbations generated by displacements (K is the
    Eddington stiffness).  Then B^T L B A is similar to W^{-1} K, so the
    eigenvalues of JL are +-sqrt(-omega^2) for the pulsation pencil.
    """
    from .spectral import assemble_eddington

    op = assemble_eddington(model, N)
    s = 1.0 / np.sqrt(op.weight)
    L = op.dense() * s[:, None] * s[None, :]
    eye = np.eye(op.size)
    return assemble(L, eye, eye)


def check_triple(triple: SeparableTriple, T: float = 1e4) -> dict:
    """Run every finite-dimensional property check on one triple.

    Returns a record of the measured quantities and one boolean per property;
    violated properties surface as ``False`` entries rather than exceptions.
    """
    rec: dict = {"n_X": triple.n_X, "n_Y": triple.n_Y}
    try:
        spectrum(triple)
        rec["quadruple_symmetry"] = True
    except ConsistencyError:
        rec["quadruple_symmetry"] = False
    try:
        tri = trichotomy(triple)
    except IndexFormulaViolation as exc:
        rec.update(index_formula=False, error=str(exc))
        return rec
    fit = growth_fit(triple, T, tri=tri)
    cond = {
        "injective_on_range": injective_on_range(triple),
        "range_full": range_is_full(triple),
        "nondegenerate": nondegenerate_ranges(triple),
    }
    cap = 3
    if cond["injective_on_range"]:
        cap = 2
    if cond["range_full"]:
        cap = min(cap, 1)
    if cond["nondegenerate"]:
        cap = 0
    rec.update(
        d_u=tri.d_u,
        d_u_index=tri.d_u_index,
        index_formula=tri.d_u == tri.d_u_index,
        semisimple=is_semisimple_off_zero(triple, tri),
        growth_degree=fit.degree,
        growth_slope=fit.slope,
        growth_cap=cap,
        growth_within_cap=fit.degree <= cap,
        isotropy_defect=tri.isotropy_defect,
        isotropic=tri.isotropy_defect <= 1e-8 * max(1.0, np.linalg.norm(triple.energy_matrix, 2)),
        **cond,
    )
    return rec


CHECK_KEYS = ("quadruple_symmetry", "index_formula", "semisimple", "growth_within_cap", "isotropic")


def run_corpus(seed: int = 0, n: int = 200, max_dim: int = 12) -> dict:
    """Property checks on ``n`` random triples drawn from a seeded generator."""
    rng = np.random.default_rng(seed)
    records = [check_triple(random_triple(rng, max_dim)) for _ in range(n)]
    failures = {k: sum(1 for r in records if not r.get(k, False)) for k in CHECK_KEYS}
    return {
        "seed": int(seed),
        "n": int(n),
        "failures": failures,
        "passed": all(v == 0 for v in failures.values()),
        "records": records,
    }
