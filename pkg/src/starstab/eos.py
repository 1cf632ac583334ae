"""Barotropic equations of state and their enthalpy machinery.

Every family exposes the same vectorised interface:

* ``pressure(rho)`` and ``dpressure(rho)`` for P and P',
* ``enthalpy_prime(rho)`` for Phi'(rho) = int_0^rho P'(s)/s ds,
* ``enthalpy_second(rho)`` for Phi''(rho) = P'(rho)/rho,
* ``inverse(y)`` / ``inverse_prime(y)`` for F_+ (the inverse of Phi', extended
  by zero for y <= 0) and its derivative.

The steady-state ODE and every linearised operator only ever see the EOS
through F_+ and F_+', so these are the functions that must be accurate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import ConstructionError, EOSDomainError, EOSRangeError

GAMMA_LO = 6.0 / 5.0
GAMMA_HI = 2.0


def _as_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(~np.isfinite(rho)):
        raise EOSDomainError("density must be finite and nonnegative")
    return rho


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


class EquationOfState:
    """Base class. Subclasses fill in the pressure law and Phi'/F_+ pair."""

    family: str = "abstract"

    @property
    def gamma0(self) -> float:
        """Small-density adiabatic exponent (lim s^(1-gamma0) P'(s) > 0)."""
        raise NotImplementedError

    @property
    def s_max(self) -> float:
        """Supremum of Phi' over (0, infinity); ``inf`` when Phi' is unbounded."""
        raise NotImplementedError

    @property
    def enthalpy_breakpoints(self) -> tuple:
        """Enthalpy values where F_+ is only C^1; integrators restart there."""
        return ()

    @property
    def in_theory_range(self) -> bool:
        return GAMMA_LO < self.gamma0 < GAMMA_HI

    def pressure(self, rho):
        raise NotImplementedError

    def dpressure(self, rho):
        raise NotImplementedError

    def enthalpy_prime(self, rho):
        raise NotImplementedError

    def enthalpy_second(self, rho):
        rho = _as_density(rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.dpressure(rho) / rho
        return _scalar_or_array(out)

    def inverse(self, y):
        raise NotImplementedError

    def inverse_prime(self, y):
        raise NotImplementedError

    def _check_enthalpy(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y >= self.s_max):
            raise EOSRangeError(f"enthalpy {np.max(y):g} beyond s_max={self.s_max:g}")
        return y

    def natural_length(self, alpha: float) -> float:
        """Radius scale on which y drops by O(alpha) from a center value alpha."""
        return math.sqrt(alpha / (4.0 * math.pi * float(self.inverse(alpha))))


@dataclass(frozen=True)
class Polytrope(EquationOfState):
    """P = K rho^gamma."""

    K: float
    gamma: float
    family: str = field(default="polytrope", init=False)

    def __post_init__(self):
        if not (self.K > 0 and self.gamma > 1):
            raise EOSDomainError("polytrope needs K > 0 and gamma > 1")
        if not GAMMA_LO < self.gamma < GAMMA_HI:
            warnings.warn(
                f"gamma={self.gamma} lies outside (6/5, 2); results are outside "
                "the hypotheses of the stability theory",
                stacklevel=3,
            )

    @property
    def n(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    @property
    def gamma0(self) -> float:
        return self.gamma

    @property
    def s_max(self) -> float:
        return math.inf

    def pressure(self, rho):
        return _scalar_or_array(self.K * _as_density(rho) ** self.gamma)

    def dpressure(self, rho):
        rho = _as_density(rho)
        return _scalar_or_array(self.K * self.gamma * rho ** (self.gamma - 1.0))

    def enthalpy_prime(self, rho):
        rho = _as_density(rho)
        g = self.gamma
        return _scalar_or_array(self.K * g / (g - 1.0) * rho ** (g - 1.0))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        c = (self.gamma - 1.0) / (self.K * self.gamma)
        out = np.where(y > 0, (c * np.maximum(y, 0.0)) ** self.n, 0.0)
        return _scalar_or_array(out)

    def inverse_prime(self, y):
        y = np.asarray(y, dtype=float)
        c = (self.gamma - 1.0) / (self.K * self.gamma)
        n = self.n
        out = np.where(y > 0, n * c * (c * np.maximum(y, 0.0)) ** (n - 1.0), 0.0)
        return _scalar_or_array(out)


# Binomial coefficients of (1+u^2)^(-1/2); 14 terms keep the series exact to
# round-off for x <= 0.1.
_WD_SERIES = np.array(
    [math.comb(2 * k, k) * (-0.25) ** k * 8.0 / (2 * k + 5) for k in range(14)]
)
_WD_SERIES_CUTOFF = 0.1


def white_dwarf_f(x):
    """f(x) = x sqrt(x^2+1) (2x^2-3) + 3 asinh(x) = 8 int_0^x u^4/sqrt(1+u^2) du.

    The closed form cancels to O(x^5) from O(x) terms, so below x = 0.1 the
    power series is used instead.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise EOSDomainError("white_dwarf_f needs x >= 0")
    small = x <= _WD_SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    series = xs**5 * np.polynomial.polynomial.polyval(xs**2, _WD_SERIES)
    xl = np.where(small, 1.0, x)
    closed = xl * np.sqrt(xl * xl + 1.0) * (2.0 * xl * xl - 3.0) + 3.0 * np.arcsinh(xl)
    return _scalar_or_array(np.where(small, series, closed))


@dataclass(frozen=True)
class WhiteDwarf(EquationOfState):
    """Chandrasekhar's degenerate-electron law P = A f(x), rho = B x^3."""

    A: float
    B: float
    family: str = field(default="white_dwarf", init=False)

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise EOSDomainError("white dwarf needs A > 0 and B > 0")

    @property
    def gamma0(self) -> float:
        return 5.0 / 3.0

    @property
    def s_max(self) -> float:
        return math.inf

    def _x(self, rho):
        return np.cbrt(_as_density(rho) / self.B)

    def pressure(self, rho):
        return _scalar_or_array(self.A * white_dwarf_f(self._x(rho)))

    def dpressure(self, rho):
        x = self._x(rho)
        return _scalar_or_array(8.0 * self.A * x * x / (3.0 * self.B * np.sqrt(1.0 + x * x)))

    def enthalpy_second(self, rho):
        x = self._x(rho)
        with np.errstate(divide="ignore"):
            out = 8.0 * self.A / (3.0 * self.B**2 * x * np.sqrt(1.0 + x * x))
        return _scalar_or_array(out)

    def enthalpy_prime(self, rho):
        # (8A/B)(sqrt(1+x^2) - 1), written without cancellation
        x = self._x(rho)
        return _scalar_or_array(8.0 * self.A / self.B * x * x / (np.sqrt(1.0 + x * x) + 1.0))

    def _x_of_y(self, y):
        z = np.maximum(y, 0.0) * self.B / (8.0 * self.A)
        return np.sqrt(z * (2.0 + z))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = self._x_of_y(y)
        return _scalar_or_array(np.where(y > 0, self.B * x**3, 0.0))

    def inverse_prime(self, y):
        y = np.asarray(y, dtype=float)
        x = self._x_of_y(y)
        out = 3.0 * self.B**2 * x * np.sqrt(1.0 + x * x) / (8.0 * self.A)
        return _scalar_or_array(np.where(y > 0, out, 0.0))

    def high_density_polytrope(self) -> Polytrope:
        """The gamma = 4/3 law 2 A B^(-4/3) rho^(4/3) approached as rho -> infinity."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Polytrope(K=2.0 * self.A * self.B ** (-4.0 / 3.0), gamma=4.0 / 3.0)


def _power_enthalpy(c, g, rho):
    """int_0^rho of c g s^(g-2) ds, or the log form when g == 1."""
    if g == 1.0:
        return c * np.log(rho)
    return c * g / (g - 1.0) * rho ** (g - 1.0)


@dataclass(frozen=True)
class Composite(EquationOfState):
    """Two-zone C^1 law: c_- rho^gamma0 below rho_blend, c_+ rho^gamma_inf + d above."""

    c_minus: float
    gamma_0: float
    gamma_inf: float
    rho_blend: float
    family: str = field(default="composite", init=False)

    def __post_init__(self):
        if not (self.c_minus > 0 and self.rho_blend > 0 and self.gamma_inf > 0):
            raise ConstructionError("composite EOS needs c_minus, rho_blend, gamma_inf > 0")
        if not 1.0 < self.gamma_0 < GAMMA_HI:
            raise ConstructionError("composite EOS needs gamma0 in (1, 2)")

    @property
    def gamma0(self) -> float:
        return self.gamma_0

    @property
    def c_plus(self) -> float:
        return self.c_minus * self.gamma_0 / self.gamma_inf * self.rho_blend ** (self.gamma_0 - self.gamma_inf)

    @property
    def d(self) -> float:
        rb = self.rho_blend
        return self.c_minus * rb**self.gamma_0 - self.c_plus * rb**self.gamma_inf

    @property
    def y_blend(self) -> float:
        return float(_power_enthalpy(self.c_minus, self.gamma_0, self.rho_blend))

    @property
    def enthalpy_breakpoints(self) -> tuple:
        return (self.y_blend,)

    def _outer_offset(self):
        return self.y_blend - _power_enthalpy(self.c_plus, self.gamma_inf, self.rho_blend)

    @property
    def s_max(self) -> float:
        if self.gamma_inf >= 1.0:
            return math.inf
        return float(self._outer_offset())

    def pressure(self, rho):
        rho = _as_density(rho)
        inner = self.c_minus * rho**self.gamma_0
        outer = self.c_plus * rho**self.gamma_inf + self.d
        return _scalar_or_array(np.where(rho <= self.rho_blend, inner, outer))

    def dpressure(self, rho):
        rho = _as_density(rho)
        inner = self.c_minus * self.gamma_0 * rho ** (self.gamma_0 - 1.0)
        outer = self.c_plus * self.gamma_inf * rho ** (self.gamma_inf - 1.0)
        return _scalar_or_array(np.where(rho <= self.rho_blend, inner, outer))

    def enthalpy_prime(self, rho):
        rho = _as_density(rho)
        inner = _power_enthalpy(self.c_minus, self.gamma_0, rho)
        with np.errstate(divide="ignore"):
            outer = self._outer_offset() + _power_enthalpy(
                self.c_plus, self.gamma_inf, np.maximum(rho, self.rho_blend)
            )
        return _scalar_or_array(np.where(rho <= self.rho_blend, inner, outer))

    def inverse(self, y):
        y = self._check_enthalpy(y)
        yp = np.maximum(y, 0.0)
        g0, gi = self.gamma_0, self.gamma_inf
        inner = ((g0 - 1.0) * yp / (self.c_minus * g0)) ** (1.0 / (g0 - 1.0))
        t = np.maximum(y, self.y_blend) - self._outer_offset()
        if gi == 1.0:
            outer = np.exp(t / self.c_plus)
        else:
            outer = np.abs((gi - 1.0) * t / (self.c_plus * gi)) ** (1.0 / (gi - 1.0))
        out = np.where(y <= 0, 0.0, np.where(y <= self.y_blend, inner, outer))
        return _scalar_or_array(out)

    def inverse_prime(self, y):
        rho = np.asarray(self.inverse(y), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = rho / self.dpressure(rho)
        return _scalar_or_array(np.where(np.asarray(y) > 0, out, 0.0))


def make_composite(c_minus, gamma0, gamma_inf, rho_blend) -> Composite:
    """C^1 two-zone EOS with small-density exponent gamma0 and large-density gamma_inf.

    Choose ``gamma_inf < 6/5`` to obtain a mass-radius spiral at high density.
    """
    if not 4.0 / 3.0 < gamma0 < GAMMA_HI:
        raise ConstructionError("gamma0 must lie in (4/3, 2)")
    return Composite(c_minus=c_minus, gamma_0=gamma0, gamma_inf=gamma_inf, rho_blend=rho_blend)


class Tabulated(EquationOfState):
    """Monotone table of (rho, P), interpolated as log P versus log rho.

    Below the first table density the pressure continues as a pure power law with
    the table's initial log-slope; above the last density queries are errors.
    """

    family = "tabulated"

    def __init__(self, rho, P):
        rho = np.asarray(rho, dtype=float)
        P = np.asarray(P, dtype=float)
        if rho.ndim != 1 or rho.shape != P.shape or rho.size < 3:
            raise ConstructionError("table needs matching 1-D columns of length >= 3")
        if np.any(rho <= 0) or np.any(P <= 0):
            raise ConstructionError("table entries must be positive")
        if np.any(np.diff(rho) <= 0) or np.any(np.diff(P) <= 0):
            raise ConstructionError("table must be strictly increasing in rho and P")
        self.rho_table = rho
        self.P_table = P
        self._logp = PchipInterpolator(np.log(rho), np.log(P))
        self._slope = self._logp.derivative()
        self._gamma0 = float(self._slope(np.log(rho[0])))
        if self._gamma0 <= 1.0:
            raise ConstructionError("table's low-density exponent must exceed 1")
        # Phi' at every table node: analytic tail plus segment-wise quadrature.
        nodes = [self._tail_enthalpy(rho[0])]
        for a, b in zip(rho[:-1], rho[1:]):
            seg, _ = integrate.quad(self._phi2_scalar, a, b, epsabs=0, epsrel=1e-13)
            nodes.append(nodes[-1] + seg)
        self._phi_nodes = np.array(nodes)

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1])

    @property
    def gamma0(self) -> float:
        return self._gamma0

    @property
    def s_max(self) -> float:
        return float(self._phi_nodes[-1])

    def _check_table(self, rho):
        rho = _as_density(rho)
        if np.any(rho > self.rho_table[-1] * (1 + 1e-14)):
            raise EOSRangeError(f"density above table maximum {self.rho_table[-1]:g}")
        return rho

    def _tail_enthalpy(self, rho):
        r0, p0, g = self.rho_table[0], self.P_table[0], self._gamma0
        return g / (g - 1.0) * p0 / r0 * (rho / r0) ** (g - 1.0)

    def pressure(self, rho):
        rho = self._check_table(rho)
        r0, p0 = self.rho_table[0], self.P_table[0]
        with np.errstate(divide="ignore"):
            lr = np.log(np.maximum(rho, r0))
        table = np.exp(self._logp(lr))
        tail = p0 * (rho / r0) ** self._gamma0
        return _scalar_or_array(np.where(rho < r0, tail, table))

    def dpressure(self, rho):
        rho = self._check_table(rho)
        r0 = self.rho_table[0]
        lr = np.log(np.maximum(rho, r0))
        slope = np.where(rho < r0, self._gamma0, self._slope(lr))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(rho > 0, np.asarray(self.pressure(rho)) * slope / rho, 0.0)
        return _scalar_or_array(out)

    def _phi2_scalar(self, s):
        return float(self.dpressure(s)) / s

    def enthalpy_prime(self, rho):
        rho = self._check_table(rho)
        out = np.empty(rho.shape)
        for idx, r in np.ndenumerate(rho):
            if r <= self.rho_table[0]:
                out[idx] = self._tail_enthalpy(r)
                continue
            k = int(np.searchsorted(self.rho_table, r)) - 1
            seg, _ = integrate.quad(
                self._phi2_scalar, self.rho_table[k], r, epsabs=0, epsrel=1e-13
            )
            out[idx] = self._phi_nodes[k] + seg
        return _scalar_or_array(out)

    def inverse(self, y):
        y = self._check_enthalpy(y)
        out = np.zeros(y.shape)
        r0 = self.rho_table[0]
        g = self._gamma0
        for idx, v in np.ndenumerate(y):
            if v <= 0:
                continue
            if v <= self._phi_nodes[0]:
                out[idx] = r0 * (v / self._phi_nodes[0]) ** (1.0 / (g - 1.0))
                continue
            k = int(np.searchsorted(self._phi_nodes, v)) - 1
            lo, hi = self.rho_table[k], self.rho_table[k + 1]
            out[idx] = optimize.brentq(
                lambda r: float(self.enthalpy_prime(r)) - v, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps
            )
        return _scalar_or_array(out)

    def inverse_prime(self, y):
        rho = np.asarray(self.inverse(y), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = rho / np.asarray(self.dpressure(rho))
        return _scalar_or_array(np.where(np.asarray(y) > 0, out, 0.0))


def pressure(eos: EquationOfState, rho):
    """P(rho) for any family."""
    return eos.pressure(rho)


@dataclass(frozen=True)
class EnthalpyInverse:
    """F_+ (inverse of Phi' extended by zero) with its derivative and range bound."""

    F: Callable
    dF: Callable
    s_max: float

    def __call__(self, y):
        return self.F(y)


def enthalpy_inverse(eos: EquationOfState) -> EnthalpyInverse:
    return EnthalpyInverse(F=eos.inverse, dF=eos.inverse_prime, s_max=eos.s_max)


def from_config(block: dict) -> EquationOfState:
    """Build an EOS from a parsed config section (see the CLI config format)."""
    block = dict(block)
    family = block.pop("family", None)
    allowed = {
        "polytrope": {"K", "gamma"},
        "white_dwarf": {"A", "B"},
        "composite": {"c_minus", "gamma0", "gamma_inf", "rho_blend"},
        "tabulated": {"table_path"},
    }
    if family not in allowed:
        raise ConstructionError(f"unknown EOS family {family!r}")
    extra = set(block) - allowed[family]
    missing = allowed[family] - set(block)
    if extra or missing:
        raise ConstructionError(
            f"EOS block for {family}: unknown keys {sorted(extra)}, missing {sorted(missing)}"
        )
    if family == "tabulated":
        return Tabulated.from_csv(block["table_path"])
    params = {k: float(v) for k, v in block.items()}
    if family == "polytrope":
        return Polytrope(**params)
    if family == "white_dwarf":
        return WhiteDwarf(**params)
    return make_composite(
        params["c_minus"], params["gamma0"], params["gamma_inf"], params["rho_blend"]
    )
