"""Radial linear operators of a non-rotating star and their low spectrum.

Three discretisations share one container:

* ``D0`` / ``Dl``: the Schroedinger-type operator -Lap + l(l+1)/r^2 - 4 pi F_+'(y)
  acting on radial functions on all of space.  With u = r phi it becomes
  -u'' + (l(l+1)/r^2 - 4 pi F_+'(y)) u on (0, R_out) with u(0) = 0, discretised by
  P1 finite elements with a lumped (nodal) weight.  The potential term is
  integrated exactly against the hat functions.  Outside R_out the potential
  vanishes, so the exterior is eliminated exactly by its Dirichlet-to-Neumann
  map; at zero energy that map is the boundary term l u(R_out)^2 / R_out.
* ``Lr``: the radial density form  int Phi''(rho) sigma^2 - (1/4pi) int |grad V_sigma|^2
  on cell-constant densities in [0, R], assembled densely and exactly.
* ``Eddington``: the radial pulsation pencil in the displacement variable v,
  with stiffness int Phi'' sigma^2 - int m_sigma^2 / r^2 for sigma = -(r^2 rho v)'/r^2
  (here m_sigma = -4 pi r^2 rho v is local) and weight int rho v^2 4 pi r^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, special

from .equilibrium import StellarModel
from .errors import ResolutionError

FOUR_PI = 4.0 * math.pi
MIN_NODES_IN_STAR = 100

_GX, _GW = np.polynomial.legendre.leggauss(8)
_GRADING_LEVELS = 30


class KernelWarning(UserWarning):
    """Inertia changed across a tiny shift: the operator has a (near) kernel."""


@dataclass(frozen=True)
class RadialOperator:
    """Discretised quadratic form plus its weight.

    ``stiffness`` is dense ``(n, n)`` for ``Lr`` and in LAPACK lower banded
    storage ``(2, n)`` otherwise (row 0 the diagonal, row 1 the subdiagonal).
    For ``D0``/``Dl`` the unknowns are u = r phi at ``grid``; for ``Eddington``
    they are v at ``grid``; for ``Lr`` they are cell values of sigma and ``grid``
    holds the cell midpoints.
    """

    kind: str
    l: int | None
    grid: np.ndarray
    h: float
    stiffness: np.ndarray
    weight: np.ndarray
    outer_radius: float
    scale: float
    model: StellarModel = field(repr=False, compare=False)

    @property
    def banded(self) -> bool:
        return self.kind != "Lr"

    @property
    def size(self) -> int:
        return self.weight.size

    def dense(self) -> np.ndarray:
        """Full symmetric stiffness matrix."""
        if not self.banded:
            return self.stiffness
        d, e = self.stiffness[0], self.stiffness[1, :-1]
        return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)

    def kernel_tolerance(self) -> float:
        """Absolute threshold below which an eigenvalue counts as zero."""
        rel = max(10.0 * (self.h / self.model.R) ** 2, 1e-8)
        return rel * self.scale

    def with_exterior(self, kappa: float) -> "RadialOperator":
        """Copy of a D-operator whose boundary term is the exterior map at energy -kappa^2."""
        if self.kind not in ("D0", "Dl"):
            raise ValueError("only D-operators have an exterior closure")
        band = self.stiffness.copy()
        band[0, -1] += _exterior_term(self.l, kappa, self.outer_radius) - _exterior_term(
            self.l, 0.0, self.outer_radius
        )
        return RadialOperator(
            self.kind, self.l, self.grid, self.h, band, self.weight,
            self.outer_radius, self.scale, self.model,
        )


@dataclass(frozen=True)
class SpectrumSlice:
    """Lowest part of a spectrum.  Eigenvectors are columns, weight-normalised."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    neg_count: int
    kernel_dim: int
    grid: np.ndarray


def _exterior_term(l: int, kappa: float, r_out: float) -> float:
    """-u'/u at r_out for the decaying exterior solution of -u'' + l(l+1)u/r^2 = -kappa^2 u."""
    if kappa == 0.0:
        return l / r_out
    x = kappa * r_out
    # k_l' = -k_{l-1} - (l+1) k_l / x, written with exponentially scaled K_{l+1/2}
    ratio = special.kve(l - 0.5, x) / special.kve(l + 0.5, x)
    return l / r_out + kappa * ratio


def _check_resolution(N: int) -> None:
    if N < MIN_NODES_IN_STAR:
        raise ResolutionError(
            f"{N} cells inside the star; at least {MIN_NODES_IN_STAR} are required"
        )


def _hat_moments(model: StellarModel, N: int, func):
    """int func(r) phi_i(r) dr over [0, R] for the hats phi_i at nodes 1..N."""
    h = model.R / N
    a = h * np.arange(N)
    q = a[:, None] + 0.5 * h * (1.0 + _GX[None, :])
    w = 0.5 * h * _GW[None, :]
    t = (q - a[:, None]) / h
    vals = func(q.ravel()).reshape(q.shape)
    left = (vals * (1.0 - t) * w).sum(axis=1)
    right = (vals * t * w).sum(axis=1)
    out = np.zeros(N + 1)
    out[:-1] += left
    out[1:] += right
    return out[1:]


def _assemble_D(model: StellarModel, l: int, R_out_factor: float, N: int) -> RadialOperator:
    _check_resolution(N)
    if R_out_factor < 1.0:
        raise ValueError("R_out_factor must be at least 1")
    eos = model.eos
    h = model.R / N
    n = int(round(R_out_factor * N))
    r = h * np.arange(1, n + 1)
    r_out = r[-1]

    def well(x):
        return FOUR_PI * np.where(x < model.R, eos.inverse_prime(model.y_at(x)), 0.0)

    pot = np.zeros(n)
    pot[:N] = _hat_moments(model, N, well)
    weight = np.full(n, h)
    weight[-1] = 0.5 * h
    diag = 2.0 / h + weight * l * (l + 1) / r**2 - pot
    diag[-1] = 1.0 / h + weight[-1] * l * (l + 1) / r_out**2 - pot[-1]
    diag[-1] += _exterior_term(l, 0.0, r_out)
    band = np.zeros((2, n))
    band[0] = diag
    band[1, :-1] = -1.0 / h
    depth = float(np.max(well(model.grid[:-1])))
    return RadialOperator(
        kind="D0" if l == 0 else "Dl",
        l=l,
        grid=r,
        h=h,
        stiffness=band,
        weight=weight,
        outer_radius=r_out,
        scale=depth,
        model=model,
    )


def assemble_D0(model: StellarModel, R_out_factor: float = 3.0, N: int = 400) -> RadialOperator:
    """Radial part of -Lap - 4 pi F_+'(y_mu) with N cells across the star.

    Args:
        model: equilibrium.
        R_out_factor: the mesh extends to R_out = R_out_factor * R; the exterior
            beyond it is closed exactly, so any value >= 1 is admissible.
        N: cells inside [0, R]; at least 100.
    """
    return _assemble_D(model, 0, R_out_factor, N)


def assemble_Dl(model: StellarModel, l: int, R_out_factor: float = 3.0, N: int = 400) -> RadialOperator:
    """As :func:`assemble_D0` plus the centrifugal term l(l+1)/r^2, for l >= 1."""
    if int(l) != l or l < 1:
        raise ValueError("l must be a positive integer")
    return _assemble_D(model, int(l), R_out_factor, N)


def _cell_gauss(N: int, h: float):
    a = h * np.arange(N)
    q = a[:, None] + 0.5 * h * (1.0 + _GX[None, :])
    w = np.broadcast_to(0.5 * h * _GW[None, :], q.shape)
    return a, q, w


def _kink_radii(model: StellarModel) -> list[float]:
    """Radii where the density crosses an EOS breakpoint (F_+ only C^1 there)."""
    out = []
    for yb in model.eos.enthalpy_breakpoints:
        if 0.0 < yb < model.alpha:
            out.append(optimize.brentq(lambda r: float(model.y_at(r)) - yb, 0.0, model.R, xtol=1e-15))
    return out


def _split_gauss(func, a: float, c: float, b: float) -> float:
    """Gauss rule on [a, c] plus [c, b]."""
    total = 0.0
    for lo, hi in ((a, c), (c, b)):
        half = 0.5 * (hi - lo)
        total += half * float(np.dot(_GW, func(lo + half * (1.0 + _GX))))
    return total


def assemble_Lr(model: StellarModel, N: int = 400) -> RadialOperator:
    """Dense form of L_{mu,r} on densities constant on each of N cells of [0, R].

    The local weight of a cell is int Phi''(rho_mu) 4 pi r^2 dr.  Phi'' blows up at
    the surface, and the integral over the outermost cell diverges once
    gamma_0 <= 3/2, so that cell is left out of the trial space.  Since the
    remaining cells span a subspace of the exact form's domain, the discrete
    negative index never exceeds the exact one.

    The gravity part is exact: a unit density on cell j carries the mass profile
    m_j(r), and  (1/4pi) int |grad V|^2 = int_0^inf m_sigma^2 / r^2 dr.
    """
    _check_resolution(N)
    eos = model.eos
    h = model.R / N
    n = N - 1
    a, q, w = _cell_gauss(n, h)
    b = a + h

    def phi2_shell(r):
        return FOUR_PI * r * r / eos.inverse_prime(model.y_at(r))

    local = (phi2_shell(q.ravel()).reshape(q.shape) * w).sum(axis=1)
    for rb in _kink_radii(model):
        k = int(rb // h)
        if k < n:
            local[k] = _split_gauss(phi2_shell, a[k], rb, b[k])
    vol = FOUR_PI / 3.0 * (b**3 - a**3)
    # inside cell k the mass profile of its unit density is (4 pi/3)(r^3 - a_k^3)
    mk = FOUR_PI / 3.0 * (q**3 - a[:, None] ** 3)
    inner_self = (mk * mk / (q * q) * w).sum(axis=1)
    inner_lin = (mk / (q * q) * w).sum(axis=1)
    # G_jk for j < k: m_j = vol_j on [a_k, inf)
    tail = inner_lin + vol / b
    # the last kept cell runs to b = R - h; the dropped cell and the exterior
    # both see the full mass, which 1/b already accounts for
    G = np.outer(vol, tail)
    G = np.triu(G, 1)
    G = G + G.T + np.diag(inner_self + vol**2 / b)
    stiffness = np.diag(local) - G
    mids = 0.5 * (a + b)
    phi2_center = 1.0 / float(eos.inverse_prime(model.alpha))
    return RadialOperator(
        kind="Lr",
        l=None,
        grid=mids,
        h=h,
        stiffness=stiffness,
        weight=vol,
        outer_radius=model.R,
        scale=phi2_center,
        model=model,
    )


def _density_coefficients(model: StellarModel, q: np.ndarray):
    """Coefficients of the Eddington integrand at radii q, before the 4 pi factor."""
    eos = model.eos
    y = model.y_at(q)
    yp = model.yprime_at(q)
    rho = eos.inverse(y)
    rhop = eos.inverse_prime(y) * yp
    Pp = eos.dpressure(rho)
    caa = 4.0 * rho * Pp + 4.0 * q * Pp * rhop + q * q * rhop * yp
    cab = 2.0 * q * rho * Pp + q * q * Pp * rhop
    cbb = q * q * rho * Pp
    cg = FOUR_PI * rho**2 * q * q
    return caa - cg, cab, cbb, rho * q * q


def _eddington_points(R: float, N: int):
    """Quadrature points per cell: the midpoint inside, a graded Gauss rule in the last cell.

    Sampling the coefficients at midpoints gives the usual second-order scheme.
    The surface cell carries power-law singularities of rho', so it is split
    geometrically towards R and integrated accurately instead.
    """
    h = R / N
    cells = [np.arange(N - 1)]
    pts = [h * (np.arange(N - 1) + 0.5)]
    wts = [np.full(N - 1, h)]
    a = R - h
    edges = np.concatenate(([a], R - h * 0.5 ** np.arange(1, _GRADING_LEVELS), [R]))
    e0, e1 = edges[:-1, None], edges[1:, None]
    q = 0.5 * (e0 + e1) + 0.5 * (e1 - e0) * _GX[None, :]
    w = 0.5 * (e1 - e0) * _GW[None, :]
    pts.append(q.ravel())
    wts.append(w.ravel())
    cells.append(np.full(q.size, N - 1))
    return np.concatenate(cells), np.concatenate(pts), np.concatenate(wts), h


def assemble_eddington(model: StellarModel, N: int = 400) -> RadialOperator:
    """Banded pencil of radial pulsations in v with v(0) = 0 and a free surface."""
    _check_resolution(N)
    cell, q, w, h = _eddington_points(model.R, N)
    c0, cab, cbb, mw = _density_coefficients(model, q)
    t = (q - h * cell) / h
    pL, pR = 1.0 - t, t
    dL, dR = -1.0 / h, 1.0 / h
    KLL = w * (c0 * pL * pL + 2.0 * cab * pL * dL + cbb * dL * dL)
    KRR = w * (c0 * pR * pR + 2.0 * cab * pR * dR + cbb * dR * dR)
    KLR = w * (c0 * pL * pR + cab * (pL * dR + pR * dL) + cbb * dL * dR)
    diag = np.zeros(N + 1)
    off = np.zeros(N)
    weight = np.zeros(N + 1)
    np.add.at(diag, cell, KLL)
    np.add.at(diag, cell + 1, KRR)
    np.add.at(off, cell, KLR)
    np.add.at(weight, cell, w * mw * pL)
    np.add.at(weight, cell + 1, w * mw * pR)
    band = np.zeros((2, N))
    band[0] = FOUR_PI * diag[1:]
    band[1, :-1] = FOUR_PI * off[1:]
    return RadialOperator(
        kind="Eddington",
        l=None,
        grid=h * np.arange(1, N + 1),
        h=h,
        stiffness=band,
        weight=FOUR_PI * weight[1:],
        outer_radius=model.R,
        # dynamical frequency squared 4 pi rho_mean; 4 pi mu would swamp omega^2
        # for centrally condensed stars
        scale=3.0 * model.M / model.R**3,
        model=model,
    )


def _tridiagonal_inertia(d, e, w, shift):
    """(negatives, zero pivots) of tridiag(d, e) - shift * diag(w) by the LDL^T recurrence."""
    scale = np.max(np.abs(d)) + 2.0 * np.max(np.abs(e), initial=0.0)
    tiny = 1e-14 * scale
    neg = 0
    zero = 0
    piv = 1.0
    for i in range(d.size):
        piv = d[i] - shift * w[i] - (e[i - 1] ** 2 / piv if i else 0.0)
        if abs(piv) < tiny:
            zero += 1
            piv = -tiny if piv < 0 else tiny
        if piv < 0:
            neg += 1
    return neg, zero


def _dense_inertia(K, w, shift):
    Ks = K - shift * np.diag(w)
    _, D, _ = linalg.ldl(Ks)
    ev = np.linalg.eigvalsh(D)
    tiny = 1e-14 * np.max(np.abs(ev))
    return int(np.sum(ev < -tiny)), int(np.sum(np.abs(ev) <= tiny))


def inertia_count(op: RadialOperator, shift: float = 0.0) -> tuple[int, int]:
    """Number of eigenvalues below ``shift`` and the count of near-zero pivots."""
    if op.banded:
        return _tridiagonal_inertia(op.stiffness[0], op.stiffness[1], op.weight, shift)
    return _dense_inertia(op.stiffness, op.weight, shift)


def index_bracket(op: RadialOperator, delta: float | None = None) -> tuple[int, int]:
    """Counts of eigenvalues below -delta and below +delta."""
    if delta is None:
        delta = 1e-10 * op.scale
    return inertia_count(op, -delta)[0], inertia_count(op, delta)[0]


def negative_index(op: RadialOperator) -> int:
    """Number of negative eigenvalues, from the inertia of the stiffness (Sylvester's law)."""
    neg, zero = inertia_count(op)
    if zero:
        lo, hi = index_bracket(op)
        if lo != hi:
            warnings.warn(
                f"{op.kind}: inertia bracket [{lo}, {hi}] around 0, kernel present",
                KernelWarning,
                stacklevel=2,
            )
        return lo
    return neg


def _lowest(op: RadialOperator, k: int):
    k = min(k, op.size)
    if op.banded:
        s = 1.0 / np.sqrt(op.weight)
        d = op.stiffness[0] * s * s
        e = op.stiffness[1, :-1] * s[:-1] * s[1:]
        vals, vecs = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
        return vals, vecs * s[:, None]
    vals, vecs = linalg.eigh(
        op.stiffness, np.diag(op.weight), subset_by_index=(0, k - 1)
    )
    return vals, vecs


def _refine_bound_state(op: RadialOperator, index: int, lam: float, maxiter: int = 50):
    """Make the exterior closure consistent with the (negative) energy of one state."""
    vec = None
    for _ in range(maxiter):
        shifted = op.with_exterior(math.sqrt(-lam))
        vals, vecs = _lowest(shifted, index + 1)
        new, vec = vals[index], vecs[:, index]
        if abs(new - lam) <= 1e-14 * abs(lam) or new >= 0:
            lam = new
            break
        lam = new
    return lam, vec


def eigenpairs(op: RadialOperator, k: int = 3) -> SpectrumSlice:
    """Lowest ``k`` eigenpairs of the pencil (stiffness, weight).

    For D-operators each negative eigenvalue is recomputed with the exterior
    closure at its own energy, which removes the dependence on R_out.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    vals, vecs = _lowest(op, k)
    vals = vals.copy()
    vecs = vecs.copy()
    tol = op.kernel_tolerance()
    if op.kind in ("D0", "Dl"):
        for i in np.flatnonzero(vals < -tol):
            vals[i], vecs[:, i] = _refine_bound_state(op, int(i), float(vals[i]))
    return SpectrumSlice(
        eigenvalues=vals,
        eigenvectors=vecs,
        neg_count=inertia_count(op, -tol)[0],
        kernel_dim=int(np.sum(np.abs(vals) < tol)),
        grid=op.grid,
    )


def kernel_test(op: RadialOperator, tol: float | None = None, k: int = 4):
    """Eigenvalues in (-tol, tol) among the lowest ``k`` and their eigenvectors.

    For D-operators the vectors are u = r phi on ``op.grid``.
    """
    if tol is None:
        tol = op.kernel_tolerance()
    vals, vecs = _lowest(op, k)
    mask = np.abs(vals) < tol
    return int(mask.sum()), vecs[:, mask]


def eddington_spectrum(model: StellarModel, N: int = 400, k: int = 3) -> SpectrumSlice:
    """Lowest ``k`` squared frequencies of radial pulsation; omega^2 < 0 means growth."""
    return eigenpairs(assemble_eddington(model, N), k)


def constrained_negative_index(op: RadialOperator) -> int:
    """Negative index of an ``Lr`` form restricted to zero total mass perturbations."""
    if op.kind != "Lr":
        raise ValueError("the mass constraint applies to Lr only")
    Z = linalg.null_space(op.weight[None, :])
    K = Z.T @ op.stiffness @ Z
    ev = np.linalg.eigvalsh(0.5 * (K + K.T))
    return int(np.sum(ev < -1e-12 * np.max(np.abs(ev))))


def lr_form(op: RadialOperator, sigma: np.ndarray) -> float:
    """<L sigma, sigma> for cell values ``sigma`` of an ``Lr`` operator."""
    return float(sigma @ op.stiffness @ sigma)


def cell_average(op: RadialOperator, func) -> np.ndarray:
    """Volume averages of a radial function over the cells of an ``Lr`` operator."""
    n = op.size
    a, q, w = _cell_gauss(n, op.h)
    vals = func(q.ravel()).reshape(q.shape)
    return (FOUR_PI * q * q * vals * w).sum(axis=1) / op.weight


def gravity_energy(sigma, R: float, n_cells: int = 400) -> float:
    """(1/4 pi) int |grad V|^2 for a radial density ``sigma(r)`` supported in [0, R].

    Uses int_0^inf m^2/r^2 dr with m(r) = 4 pi int_0^r sigma s^2 ds, which is the
    Green's solve of (r^2 V')' = 4 pi r^2 sigma matched to -M/r outside.  Both
    integrals use nested Gauss rules on a mesh graded towards R; ``sigma`` must
    accept arrays.
    """
    h = R / n_cells
    edges = np.concatenate(
        (h * np.arange(n_cells), R - h * 0.5 ** np.arange(1, _GRADING_LEVELS), [R])
    )
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    q = a[:, None] + half[:, None] * (1.0 + _GX[None, :])
    w = half[:, None] * _GW[None, :]
    # m at every outer node from a nested rule on [a, q]
    sub_half = 0.5 * (q - a[:, None])
    s = a[:, None, None] + sub_half[:, :, None] * (1.0 + _GX[None, None, :])
    f = FOUR_PI * s * s * sigma(s.ravel()).reshape(s.shape)
    partial = (f * sub_half[:, :, None] * _GW[None, None, :]).sum(axis=2)
    cell_mass = (FOUR_PI * q * q * sigma(q.ravel()).reshape(q.shape) * w).sum(axis=1)
    start = np.concatenate(([0.0], np.cumsum(cell_mass)[:-1]))
    m = start[:, None] + partial
    inner = float((m * m / (q * q) * w).sum())
    M = float(cell_mass.sum())
    return inner + M * M / R
