"""Mass-radius curves in the center density and the turning-point count of unstable modes.

Derivatives in mu are centered differences on a geometric mu grid.  A derivative
counts as zero when it is smaller than ``THRESHOLD_FACTOR`` times its error
estimate, which comes from integrating every equilibrium at two tolerances.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .eos import EquationOfState
from .equilibrium import integrate_profile
from .errors import DegeneracyError, NoCompactSupport, TPPViolation, CrossCheckError

THRESHOLD_FACTOR = 1e3
SLOPE_TOLERANCE = 0.10
CRITICAL_GAMMA = 4.0 / 3.0


@dataclass(frozen=True)
class MassRadiusCurve:
    """Sampled family of equilibria.

    ``dM`` and ``dMR`` are M'(mu) and (M/R)'(mu); ``dR`` is R'(mu).  The
    ``*_threshold`` arrays are the magnitudes below which each derivative is
    treated as zero.  ``mass_extrema`` holds (mu*, kind) with kind one of
    ``"max"``, ``"min"`` and ``"non-extremal-critical"``.
    """

    eos: EquationOfState
    mus: np.ndarray
    Ms: np.ndarray
    Rs: np.ndarray
    dM: np.ndarray
    dR: np.ndarray
    dMR: np.ndarray
    dM_threshold: np.ndarray
    dMR_threshold: np.ndarray
    mass_extrema: list = field(default_factory=list)
    mr_criticals: list = field(default_factory=list)
    truncated_at: float | None = None

    def index_of(self, mu: float) -> int:
        """Index of the sample nearest to ``mu`` in log mu."""
        return int(np.argmin(np.abs(np.log(self.mus) - math.log(mu))))

    def mass_sign(self, i: int) -> int:
        return _thresholded_sign(self.dM[i], self.dM_threshold[i])

    def mr_sign(self, i: int) -> int:
        return _thresholded_sign(self.dMR[i], self.dMR_threshold[i])


@dataclass(frozen=True)
class StabilityVerdict:
    mu: float
    i_mu: int
    n_u_tpp: int
    classification: str
    n_minus_D0: int | None = None
    n_u_formula: int | None = None
    critical_index: bool = False


def _thresholded_sign(value: float, threshold: float) -> int:
    if abs(value) <= threshold:
        return 0
    return 1 if value > 0 else -1


def _log_derivative(values: np.ndarray, x: np.ndarray, mus: np.ndarray) -> np.ndarray:
    return np.gradient(values, x, edge_order=2) / mus


def _sign_runs(signs: np.ndarray):
    """Pairs (i, j) of consecutive samples with nonzero sign, only zeros between them."""
    nz = np.flatnonzero(signs)
    return list(zip(nz[:-1], nz[1:]))


def _vertex(x: np.ndarray, f: np.ndarray, i: int, j: int, d: np.ndarray) -> float:
    """Stationary point of the quadratic through three samples around the bracket [i, j]."""
    n = x.size
    if j - i >= 2:
        idx = np.array([i, (i + j) // 2, j])
    elif abs(d[i]) > abs(d[j]) and j + 1 < n:
        idx = np.array([i, j, j + 1])
    elif i - 1 >= 0:
        idx = np.array([i - 1, i, j])
    else:
        idx = np.array([i, j, min(j + 1, n - 1)])
    c2, c1, _ = np.polyfit(x[idx], f[idx], 2)
    xs = -c1 / (2.0 * c2) if c2 != 0 else 0.5 * (x[i] + x[j])
    return float(math.exp(min(max(xs, x[i]), x[j])))


def _critical_points(x, f, d, signs, label_change):
    found = []
    for i, j in _sign_runs(signs):
        if signs[i] != signs[j]:
            found.append((_vertex(x, f, i, j, d), label_change(signs[i], signs[j]), i, j))
        elif j - i > 1:
            found.append((float(math.exp(0.5 * (x[i] + x[j]))), "non-extremal-critical", i, j))
    return found


def trace_curve(
    eos: EquationOfState,
    mu_lo: float,
    mu_hi: float,
    N: int = 64,
    tol: float = 1e-10,
) -> MassRadiusCurve:
    """Integrate equilibria on a geometric mu grid and locate turning points.

    Args:
        eos: pressure law.
        mu_lo, mu_hi: center-density range, 0 < mu_lo < mu_hi.
        N: number of samples, at least 8.
        tol: integration tolerance; each model is also integrated at ``10*tol``
            to estimate the error that sets the zero thresholds.

    A center density without compact support ends the curve; the failing mu is
    stored in ``truncated_at``.
    """
    if not 0 < mu_lo < mu_hi:
        raise ValueError("need 0 < mu_lo < mu_hi")
    if N < 8:
        raise ValueError("need at least 8 samples")
    mus = np.geomspace(mu_lo, mu_hi, N)
    Ms, Rs, errM, errMR = [], [], [], []
    truncated = None
    for mu in mus:
        try:
            fine = integrate_profile(eos, mu, tol=tol, N=8)
            coarse = integrate_profile(eos, mu, tol=10.0 * tol, N=8)
        except NoCompactSupport:
            truncated = float(mu)
            break
        Ms.append(fine.M)
        Rs.append(fine.R)
        eps = np.finfo(float).eps
        errM.append(abs(fine.M - coarse.M) + eps * fine.M)
        errMR.append(abs(fine.M / fine.R - coarse.M / coarse.R) + eps * fine.M / fine.R)
    n = len(Ms)
    if n < 3:
        raise NoCompactSupport(truncated, float("nan"), float("nan"))
    mus = mus[:n]
    Ms, Rs = np.array(Ms), np.array(Rs)
    x = np.log(mus)
    dM = _log_derivative(Ms, x, mus)
    dR = _log_derivative(Rs, x, mus)
    MR = Ms / Rs
    dMR = _log_derivative(MR, x, mus)
    step = x[1] - x[0]
    thrM = THRESHOLD_FACTOR * np.array(errM) / (step * mus)
    thrMR = THRESHOLD_FACTOR * np.array(errMR) / (step * mus)
    sM = np.array([_thresholded_sign(a, b) for a, b in zip(dM, thrM)])
    sMR = np.array([_thresholded_sign(a, b) for a, b in zip(dMR, thrMR)])
    extrema = _critical_points(x, Ms, dM, sM, lambda a, b: "max" if a > 0 else "min")
    mr = _critical_points(x, MR, dMR, sMR, lambda a, b: "critical")
    return MassRadiusCurve(
        eos=eos,
        mus=mus,
        Ms=Ms,
        Rs=Rs,
        dM=dM,
        dR=dR,
        dMR=dMR,
        dM_threshold=thrM,
        dMR_threshold=thrMR,
        mass_extrema=[(mu, kind) for mu, kind, _, _ in extrema],
        mr_criticals=[mu for mu, kind, _, _ in mr if kind == "critical"],
        truncated_at=truncated,
    )


def _index_at(curve: MassRadiusCurve, i: int) -> int:
    sm, smr = curve.mass_sign(i), curve.mr_sign(i)
    if sm == 0 and smr == 0:
        raise DegeneracyError(
            f"M' and (M/R)' both vanish at mu={curve.mus[i]:.6g}; the sampling cannot be trusted"
        )
    if sm == 0:
        return 1
    if smr == 0:
        return 0
    return 1 if sm * smr > 0 else 0


def index_imu(curve: MassRadiusCurve, mu: float) -> int:
    """The 0/1 index from the signs of M'(mu) and (M/R)'(mu) at the sample nearest ``mu``."""
    return _index_at(curve, curve.index_of(mu))


def initial_unstable_count(gamma0: float) -> tuple[int, bool]:
    """Unstable-mode count in the dilute limit and whether gamma0 is the critical 4/3."""
    if math.isclose(gamma0, CRITICAL_GAMMA, rel_tol=0.0, abs_tol=1e-12):
        return 0, True
    if 6.0 / 5.0 < gamma0 < CRITICAL_GAMMA:
        return 1, False
    if CRITICAL_GAMMA < gamma0 < 2.0:
        return 0, False
    raise ValueError(f"gamma0 = {gamma0} lies outside (6/5, 2)")


def check_dilute_regime(curve: MassRadiusCurve, gamma0: float, samples: int = 3) -> float:
    """Fit the log-log slope of M at the low end and warn if it is off the dilute law."""
    k = min(samples, curve.mus.size)
    slope = float(np.polyfit(np.log(curve.mus[:k]), np.log(curve.Ms[:k]), 1)[0])
    expected = (3.0 * gamma0 - 4.0) / 2.0
    off = abs(slope - expected) > SLOPE_TOLERANCE * max(abs(expected), 0.1)
    if off:
        warnings.warn(
            f"mass slope {slope:.4f} at mu_lo differs from {expected:.4f}; the walk may start "
            "outside the dilute regime",
            RuntimeWarning,
            stacklevel=2,
        )
    return slope


def _mass_bends(curve: MassRadiusCurve):
    """(i, j, change) for every mass extremum bracketed by samples i < j."""
    signs = np.array([curve.mass_sign(i) for i in range(curve.mus.size)])
    out = []
    for i, j in _sign_runs(signs):
        if signs[i] == signs[j]:
            continue
        before = np.sign(curve.dM[i] * curve.dR[i])
        after = np.sign(curve.dM[j] * curve.dR[j])
        if before < 0 < after:
            change = 1
        elif after < 0 < before:
            change = -1
        else:
            change = 0
        out.append((i, j, change))
    return out


def tpp_walk(curve: MassRadiusCurve, gamma0: float | None = None) -> list[StabilityVerdict]:
    """Unstable-mode count at every sample from the turning points of M(mu).

    Starts from the dilute-limit count and adds +1 at every counterclockwise bend
    of the (M, R) curve at a mass extremum and -1 at every clockwise one.
    """
    if gamma0 is None:
        gamma0 = curve.eos.gamma0
    n_u, critical = initial_unstable_count(gamma0)
    if not critical:
        check_dilute_regime(curve, gamma0)
    bends = {j: change for _, j, change in _mass_bends(curve)}
    verdicts = []
    for i, mu in enumerate(curve.mus):
        n_u += bends.get(i, 0)
        if n_u < 0:
            raise TPPViolation(f"unstable-mode count turned negative at mu={mu:.6g}")
        at_extremum = curve.mass_sign(i) == 0
        if critical or at_extremum:
            cls = "neutral"
        elif n_u == 0:
            cls = "stable"
        else:
            cls = "unstable"
        verdicts.append(
            StabilityVerdict(
                mu=float(mu),
                i_mu=_index_at(curve, i),
                n_u_tpp=n_u,
                classification=cls,
                critical_index=critical,
            )
        )
    return verdicts


def verdict(curve: MassRadiusCurve, mu: float, n_minus_D0: int) -> StabilityVerdict:
    """Combine the spectral count n^-(D0) with i_mu and cross-check against the walk."""
    i = curve.index_of(mu)
    walk = tpp_walk(curve)[i]
    n_formula = int(n_minus_D0) - walk.i_mu
    if n_formula != walk.n_u_tpp:
        raise CrossCheckError(
            f"mu={curve.mus[i]:.6g}: turning-point count {walk.n_u_tpp} but "
            f"n^-(D0) - i_mu = {n_minus_D0} - {walk.i_mu} = {n_formula}"
        )
    return StabilityVerdict(
        mu=walk.mu,
        i_mu=walk.i_mu,
        n_u_tpp=walk.n_u_tpp,
        classification=walk.classification,
        n_minus_D0=int(n_minus_D0),
        n_u_formula=n_formula,
        critical_index=walk.critical_index,
    )
