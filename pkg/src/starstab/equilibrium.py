"""Non-rotating equilibria: integrate the enthalpy ODE out to its first zero.

The radial steady state is carried as the first-order system

    y' = -m / r^2,    m' = 4 pi r^2 F_+(y),

with y(0) = Phi'(mu) and m(0) = 0, where y = V(R) - V is the enthalpy and m is
the enclosed mass.  The support radius R is the first zero of y and M = m(R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .eos import EquationOfState
from .errors import ConsistencyError, NoCompactSupport

FOUR_PI = 4.0 * math.pi
_START_FRACTION = 1e-4
# Local error control runs this much tighter than the requested tolerance so the
# accumulated (global) error in R and M stays below it.
_GLOBAL_SAFETY = 1e-2
_RTOL_FLOOR = 1e-13


@dataclass(frozen=True)
class _Shot:
    R: float
    mass: float
    r0: float
    coeffs: tuple  # (alpha, a2, a4): y ~ alpha - a2 r^2 + a4 r^4 near the center
    source0: float
    sol: Callable


class _PiecewiseSolution:
    """Dense output of an integration restarted at enthalpy breakpoints."""

    def __init__(self, starts, solutions):
        self.starts = np.asarray(starts)
        self.solutions = solutions

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        seg = np.clip(np.searchsorted(self.starts, r, side="right") - 1, 0, len(self.solutions) - 1)
        out = np.empty((2,) + r.shape)
        for k, sol in enumerate(self.solutions):
            mask = seg == k
            if np.any(mask):
                out[:, mask] = sol(r[mask])
        return out


def _shoot(source, dsource_center, alpha, length, tol, r_max_factor, on_fail, breaks=()):
    """Integrate y'' + 2y'/r = -source(y) from y(0)=alpha until y = 0.

    ``breaks`` are enthalpy values where the source is not smooth; the
    integration restarts at each so the step control never straddles a kink.
    """
    s0 = float(source(alpha))
    a2 = s0 / 6.0
    a4 = dsource_center * a2 / 20.0
    r0 = _START_FRACTION * length
    y0 = alpha - a2 * r0**2 + a4 * r0**4
    # m here is the flux r^2 y' with the sign flipped: m = int_0^r s^2 source ds
    m0 = s0 * r0**3 / 3.0 - 4.0 * a4 * r0**5

    def rhs(r, state):
        y, m = state
        return (-m / (r * r), r * r * float(source(y)))

    def crossing(level):
        def event(r, state):
            return state[0] - level

        event.terminal = True
        event.direction = -1
        return event

    r_max = r_max_factor * length
    rtol = max(tol * _GLOBAL_SAFETY, _RTOL_FLOOR)
    atol = (rtol * alpha * 1e-3, rtol * s0 * length**3 * 1e-3)
    levels = sorted((b for b in breaks if 0.0 < b < y0), reverse=True) + [0.0]
    start, state = r0, (y0, m0)
    starts, solutions = [], []
    for level in levels:
        res = integrate.solve_ivp(
            rhs,
            (start, r_max),
            state,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=crossing(level),
            dense_output=True,
        )
        starts.append(start)
        solutions.append(res.sol)
        if res.status != 1 or not len(res.t_events[0]):
            on_fail(res.t[-1], res.y[0, -1])
        start = float(res.t_events[0][0])
        state = (level, float(res.y_events[0][0][1]))
    return _Shot(
        R=start,
        mass=state[1],
        r0=r0,
        coeffs=(alpha, a2, a4),
        source0=s0,
        sol=_PiecewiseSolution(starts, solutions),
    )


def _eval_shot(shot: _Shot, r):
    """(y, m) with m the source integral, continued harmonically outside R."""
    r = np.asarray(r, dtype=float)
    alpha, a2, a4 = shot.coeffs
    inner = r < shot.r0
    outer = r > shot.R
    mid = ~(inner | outer)
    y = np.empty(r.shape)
    m = np.empty(r.shape)
    if np.any(mid):
        ym = shot.sol(r[mid])
        y[mid], m[mid] = ym[0], ym[1]
    ri = r[inner]
    y[inner] = alpha - a2 * ri**2 + a4 * ri**4
    m[inner] = shot.source0 * ri**3 / 3.0 - 4.0 * a4 * ri**5
    ro = r[outer]
    y[outer] = shot.mass / ro - shot.mass / shot.R
    m[outer] = shot.mass
    return y, m


@dataclass(frozen=True)
class StellarModel:
    """One equilibrium at center density ``mu``.

    ``grid`` is uniform on [0, R]; ``y``, ``rho`` and ``yprime`` are sampled on it.
    The underlying dense ODE solution stays available through ``y_at`` and friends,
    which the spectral discretisations use at quadrature points.
    """

    eos: EquationOfState
    mu: float
    alpha: float
    R: float
    M: float
    grid: np.ndarray
    y: np.ndarray
    rho: np.ndarray
    yprime: np.ndarray
    tol: float
    _shot: _Shot = field(repr=False, compare=False)

    def y_at(self, r):
        y, _ = _eval_shot(self._shot, r)
        return y

    def mass_at(self, r):
        """Enclosed mass m(r) = 4 pi int_0^r rho s^2 ds."""
        _, m = _eval_shot(self._shot, r)
        return m

    def yprime_at(self, r):
        r = np.asarray(r, dtype=float)
        y, m = _eval_shot(self._shot, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, -m / np.where(r > 0, r, 1.0) ** 2, 0.0)
        return out

    def rho_at(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R, self.eos.inverse(self.y_at(r)), 0.0)

    def potential_at(self, r):
        """V_mu(r) = V_mu(R) - y_mu(r), continued as -M/r outside the star."""
        return surface_potential(self) - self.y_at(r)

    @property
    def length_scale(self) -> float:
        return self.eos.natural_length(self.alpha)


def integrate_profile(
    eos: EquationOfState,
    mu: float,
    tol: float = 1e-10,
    N: int = 2000,
    r_max_factor: float = 1e4,
) -> StellarModel:
    """Build the equilibrium with center density ``mu``.

    Args:
        eos: pressure law.
        mu: center density.
        tol: relative tolerance of the adaptive integrator; also the target
            accuracy of the surface root.
        N: number of uniform cells of the output grid on [0, R].
        r_max_factor: give up (NoCompactSupport) beyond this many natural lengths.
    """
    if not mu > 0:
        raise ValueError("center density must be positive")
    alpha = float(eos.enthalpy_prime(mu))
    length = eos.natural_length(alpha)

    def source(y):
        return FOUR_PI * eos.inverse(y)

    def fail(r_last, y_last):
        raise NoCompactSupport(mu, r_last, y_last)

    dsource = FOUR_PI * float(eos.inverse_prime(alpha))
    shot = _shoot(
        source, dsource, alpha, length, tol, r_max_factor, fail, eos.enthalpy_breakpoints
    )
    grid = np.linspace(0.0, shot.R, N + 1)
    y, m = _eval_shot(shot, grid)
    y[-1] = 0.0
    rho = np.asarray(eos.inverse(y), dtype=float)
    rho[-1] = 0.0
    yprime = np.zeros_like(grid)
    yprime[1:] = -m[1:] / grid[1:] ** 2
    return StellarModel(
        eos=eos,
        mu=float(mu),
        alpha=alpha,
        R=shot.R,
        M=shot.mass,
        grid=grid,
        y=y,
        rho=rho,
        yprime=yprime,
        tol=tol,
        _shot=shot,
    )


def total_mass(model: StellarModel) -> float:
    """M by quadrature of 4 pi rho r^2, checked against -R^2 y'(R)."""
    quad, _ = integrate.quad(
        lambda r: FOUR_PI * r * r * float(model.rho_at(r)),
        0.0,
        model.R,
        epsabs=0.0,
        epsrel=1e-11,
        limit=400,
    )
    flux = -model.R**2 * float(model.yprime_at(model.R))
    if abs(quad - flux) > max(10.0 * model.tol, 1e-9) * abs(flux):
        raise ConsistencyError(f"mass by quadrature {quad!r} vs surface flux {flux!r}")
    return quad


def surface_potential(model: StellarModel) -> float:
    """V_mu(R_mu) = -M / R."""
    return -model.M / model.R


@dataclass(frozen=True)
class LaneEmdenSolution:
    n: float
    xi1: float
    minus_xi2_thetaprime: float
    grid: np.ndarray
    theta: np.ndarray


def lane_emden(n: float, tol: float = 1e-12, N: int = 2000) -> LaneEmdenSolution:
    """Solve theta'' + (2/s) theta' = -theta_+^n with theta(0)=1, theta'(0)=0."""
    if not 0 < n < 5:
        raise ValueError("Lane-Emden index must lie in (0, 5)")

    def source(t):
        return np.maximum(t, 0.0) ** n

    def fail(r_last, y_last):
        raise NoCompactSupport(float("nan"), r_last, y_last)

    shot = _shoot(source, float(n), 1.0, 1.0, tol, 1e3, fail)
    grid = np.linspace(0.0, shot.R, N + 1)
    theta, _ = _eval_shot(shot, grid)
    theta[-1] = 0.0
    return LaneEmdenSolution(
        n=float(n), xi1=shot.R, minus_xi2_thetaprime=shot.mass, grid=grid, theta=theta
    )
