"""Acceptance criteria 1-10, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""

import math
import time

import numpy as np
import pytest

from starstab import equilibrium as eq
from starstab import hamiltonian as H
from starstab import mrcurve
from starstab import spectral as sp

from conftest import composite, model, polytrope, white_dwarf

# Radau oracle values, frozen in test_equilibrium
LANE_EMDEN = {1.5: (3.6537537362193953, 2.7140551201087), 3.0: (6.896848619376073, 2.018235950966566)}


def _cosine(a, b):
    return abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


def _local_index(eos, mu):
    """i_mu from a short curve whose middle sample is mu."""
    c = mrcurve.trace_curve(eos, mu / 4, mu * 4, N=9)
    return mrcurve.index_imu(c, mu)


def test_criterion_1():
    t0 = time.perf_counter()
    sol = eq.lane_emden(1.0)
    assert abs(sol.xi1 - math.pi) < 1e-10
    assert time.perf_counter() - t0 < 1.0
    for n, (xi1, w) in LANE_EMDEN.items():
        t0 = time.perf_counter()
        sol = eq.lane_emden(n)
        assert time.perf_counter() - t0 < 1.0
        assert abs(sol.xi1 / xi1 - 1) < 1e-6
        assert abs(sol.minus_xi2_thetaprime / w - 1) < 1e-6


def test_criterion_2():
    t0 = time.perf_counter()
    mus = np.geomspace(0.1, 10.0, 9)
    lm = np.log(mus)
    for gamma in (1.25, 4 / 3 - 0.01, 4 / 3 + 0.01, 5 / 3, 1.9):
        p = polytrope(gamma)
        ms = [eq.integrate_profile(p, mu, N=8) for mu in mus]
        slope_M = np.polyfit(lm, np.log([m.M for m in ms]), 1)[0]
        slope_R = np.polyfit(lm, np.log([m.R for m in ms]), 1)[0]
        assert abs(slope_M - (3 * gamma - 4) / 2) < 1e-3, gamma
        assert abs(slope_R - (gamma - 2) / 2) < 1e-3, gamma
    assert time.perf_counter() - t0 < 30.0


def test_criterion_3():
    t0 = time.perf_counter()
    for gamma in (1.3, 5 / 3, 1.9):
        for mu in (0.01, 0.1, 1.0, 10.0, 100.0):
            m = model(polytrope(gamma), mu)
            n_d0 = sp.negative_index(sp.assemble_D0(m))
            n_lr = sp.negative_index(sp.assemble_Lr(m))
            assert n_d0 == 1 and n_lr == n_d0, (gamma, mu)
    assert time.perf_counter() - t0 < 60.0


def test_criterion_4(fixture_models):
    for name, m in fixture_models.items():
        d1 = sp.assemble_Dl(m, 1)
        low = sp.eigenpairs(d1, 1)
        assert abs(low.eigenvalues[0]) <= d1.kernel_tolerance(), name
        target = d1.grid * m.yprime_at(d1.grid)
        assert _cosine(target, low.eigenvectors[:, 0]) >= 0.99, name
        assert sp.eigenpairs(sp.assemble_Dl(m, 2), 1).eigenvalues[0] > 0, name


def test_criterion_5():
    for mu in (0.1, 1.0, 10.0):
        soft = sp.eddington_spectrum(model(polytrope(1.3), mu), k=3)
        assert soft.neg_count == 1 and np.sum(soft.eigenvalues < 0) == 1, mu
        stiff = sp.eddington_spectrum(model(polytrope(5 / 3), mu), k=3)
        assert stiff.neg_count == 0 and np.all(stiff.eigenvalues > 0), mu
    m = model(polytrope(4 / 3), 1.0)
    small = [abs(sp.eddington_spectrum(m, N=N, k=1).eigenvalues[0]) for N in (200, 400, 800)]
    assert small[0] / small[1] >= 2 and small[1] / small[2] >= 2


def _composite_points(curve):
    idx = [int(np.argmin(np.abs(np.log(curve.mus / mu)))) for mu in (1.0, 12.0, 60.0, 2e4)]
    return [(composite(), float(curve.mus[i]), curve, i) for i in idx]


def test_criterion_6(composite_curve):
    cases = []
    for gamma, mus in ((1.3, (0.1, 10.0)), (5 / 3, (0.1, 10.0)), (1.9, (1.0,))):
        cases += [(polytrope(gamma), mu, None, None) for mu in mus]
    cases += [(white_dwarf(), mu, None, None) for mu in (1.0, 100.0, 1e4)]
    cases += _composite_points(composite_curve)
    assert len(cases) == 12
    mismatches = []
    for eos, mu, curve, i in cases:
        m = model(eos, mu)
        i_mu = mrcurve.index_imu(curve, mu) if curve is not None else _local_index(eos, mu)
        n_d0 = sp.negative_index(sp.assemble_D0(m))
        n_omega = sp.eddington_spectrum(m, k=3).neg_count
        if n_omega != n_d0 - i_mu:
            mismatches.append((repr(eos), mu, n_omega, n_d0, i_mu))
    assert mismatches == []


def test_criterion_7():
    wd = white_dwarf()
    c = mrcurve.trace_curve(wd, 1.0, 1e4, N=17)
    assert c.truncated_at is None
    assert np.all(c.dM > 0) and np.all(c.dMR > 0)
    for mu in (1.0, 10.0, 100.0, 1e4):
        omega2 = sp.eddington_spectrum(model(wd, mu), k=3).eigenvalues
        assert np.all(omega2 > 0), mu
    chandrasekhar = eq.integrate_profile(wd.high_density_polytrope(), 1.0).M
    assert abs(c.Ms[-1] / chandrasekhar - 1) < 0.05


def test_criterion_8(composite_curve):
    t0 = time.perf_counter()
    c = composite_curve
    walk = mrcurve.tpp_walk(c)
    assert [k for _, k in c.mass_extrema][:1] == ["max"]
    mu_max = c.mass_extrema[0][0]
    mu_next = c.mass_extrema[1][0] if len(c.mass_extrema) > 1 else math.inf
    for v in walk:
        if v.mu < mu_max:
            assert v.n_u_tpp == 0, v.mu
        elif v.mu < mu_next:
            assert v.n_u_tpp == 1, v.mu
    for mu, expected in ((1.0, 0), (3.0, 0), (12.0, 1), (60.0, 1)):
        i = c.index_of(float(c.mus[np.argmin(np.abs(np.log(c.mus / mu)))]))
        assert (mu < mu_max) == (c.mus[i] < mu_max)
        assert sp.eddington_spectrum(model(composite(), float(c.mus[i])), k=3).neg_count == expected, mu
        assert walk[i].n_u_tpp == expected
    assert c.mr_criticals
    for mc in c.mr_criticals:
        k = int(np.searchsorted(c.mus, mc))
        lo, hi = k - 2, k + 1
        assert c.mus[lo] < mc < c.mus[hi]
        n = [sp.negative_index(sp.assemble_D0(model(composite(), float(c.mus[j])))) for j in (lo, hi)]
        i_mu = [mrcurve.index_imu(c, float(c.mus[j])) for j in (lo, hi)]
        assert n[1] - n[0] == i_mu[1] - i_mu[0] != 0, mc
    assert time.perf_counter() - t0 < 300.0


def test_criterion_9():
    t0 = time.perf_counter()
    t = H.nilpotent_example()
    J = t.JL
    assert np.array_equal(J, [[0, 0, 0, 1, 0], [0, 0, 0, 1, 0], [-2, 1, 0, 0, 0], [-1, 1, 0, 0, 0], [0] * 5])
    J2 = J @ J
    assert np.array_equal(J2, [[-1, 1, 0, 0, 0], [-1, 1, 0, 0, 0], [0, 0, 0, -1, 0], [0] * 5, [0] * 5])
    J3 = J2 @ J
    assert np.array_equal(J3, [[0] * 5, [0] * 5, [1, -1, 0, 0, 0], [0] * 5, [0] * 5])
    assert not np.any(J3 @ J)
    assert H.growth_degree(t) == 3
    ledger = H.run_corpus(seed=12345, n=200)
    assert ledger["failures"] == {k: 0 for k in H.CHECK_KEYS}
    for rec in ledger["records"]:
        assert rec["growth_degree"] <= 3
        if rec["injective_on_range"]:
            assert rec["growth_degree"] <= 2
        if rec["range_full"]:
            assert rec["growth_degree"] <= 1
        if rec["nondegenerate"]:
            assert rec["growth_degree"] == 0
    assert time.perf_counter() - t0 < 120.0


@pytest.fixture(scope="module")
def radial_triples():
    return {g: H.radial_triple(model(polytrope(g), 1.0), N=100) for g in (1.3, 5 / 3)}


def test_criterion_10(radial_triples):
    rng = np.random.default_rng(10)
    steps = 100_000
    soft, stiff = radial_triples[1.3], radial_triples[5 / 3]

    tri = H.trichotomy(soft)
    w0 = tri.E_u[:, 0] + 1e-6 * rng.normal(size=soft.JL.shape[0])
    dt = 0.4 / H.max_frequency(soft)
    traj = H.evolve(soft, w0, steps * dt, dt, record_every=100)
    assert traj.drift <= 1e-10
    assert abs(H.growth_rate(traj) / tri.lambda_u - 1) < 0.01

    tri = H.trichotomy(stiff)
    assert tri.d_u == 0
    w0 = tri.E_c @ rng.normal(size=tri.E_c.shape[1])
    dt = 0.4 / H.max_frequency(stiff)
    traj = H.evolve(stiff, w0, steps * dt, dt, record_every=100)
    assert traj.drift <= 1e-10
    E = stiff.energy_matrix
    norms = np.sqrt(np.einsum("ij,jk,ik->i", traj.states, E, traj.states))
    assert norms.max() <= 3 * norms[0]

    example = H.nilpotent_example()
    traj = H.evolve(example, rng.normal(size=5), steps * 1e-3, 1e-3, record_every=1000)
    assert traj.drift <= 1e-10
