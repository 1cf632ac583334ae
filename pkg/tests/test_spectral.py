import math

import numpy as np
import pytest
from scipy import integrate

from starstab import equilibrium as eq
from starstab import spectral as sp
from starstab.errors import ResolutionError

from conftest import composite, model, polytrope

GAMMAS = (1.3, 4 / 3, 5 / 3, 1.9)
MU_MR_CRITICAL = 25.70626  # first M/R critical point of the composite fixture


def _toy(stiffness, weight=None):
    d = np.asarray(stiffness, dtype=float)
    n = d.size
    band = np.zeros((2, n))
    band[0] = d
    m = model(polytrope(5 / 3), 1.0)
    w = np.ones(n) if weight is None else np.asarray(weight, dtype=float)
    return sp.RadialOperator("Eddington", None, np.arange(1.0, n + 1), 1.0, band, w, 1.0, 1.0, m)


def _cosine(a, b):
    return abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


def _dense_eigs(op):
    s = 1.0 / np.sqrt(op.weight)
    return np.linalg.eigvalsh(op.dense() * s[:, None] * s[None, :])


# ---- inertia -------------------------------------------------------------------------


def test_identity_has_no_negative_index():
    assert sp.negative_index(_toy(np.ones(5))) == 0


def test_diagonal_count():
    assert sp.negative_index(_toy([-1.0, 2.0, -3.0])) == 2


def test_near_zero_pivot_reports_bracket():
    op = _toy([-1.0, 0.0, 2.0])
    with pytest.warns(sp.KernelWarning):
        assert sp.negative_index(op) == 1
    assert sp.index_bracket(op, 1e-6) == (1, 2)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_d0_inertia_matches_bisection_and_dense_solve(gamma):
    op = sp.assemble_D0(model(polytrope(gamma), 1.0))
    dense = _dense_eigs(op)
    assert sp.negative_index(op) == int(np.sum(dense < 0)) == 1
    lo, hi = dense[0] - 1.0, 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if sp.inertia_count(op, mid)[0] >= 1 else (mid, hi)
    assert 0.5 * (lo + hi) == pytest.approx(dense[0], rel=1e-10)


def test_too_coarse_grid_is_rejected():
    m = model(polytrope(5 / 3), 1.0)
    for build in (sp.assemble_D0, sp.assemble_Lr, sp.assemble_eddington):
        with pytest.raises(ResolutionError):
            build(m, N=50)


# ---- D0 and Dl ---------------------------------------------------------------------


def test_operators_are_symmetric_with_positive_weight(fixture_models):
    m = fixture_models["composite mu=60"]
    for op in (sp.assemble_D0(m), sp.assemble_Dl(m, 2), sp.assemble_Lr(m), sp.assemble_eddington(m)):
        K = op.dense()
        assert np.array_equal(K, K.T)
        assert np.all(op.weight > 0)


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("mu", [0.1, 10.0])
def test_polytrope_d0_has_one_negative_mode_and_no_kernel(gamma, mu):
    op = sp.assemble_D0(model(polytrope(gamma), mu))
    assert sp.negative_index(op) == 1
    assert sp.kernel_test(op)[0] == 0


@pytest.mark.parametrize("gamma", [1.3, 5 / 3])
def test_bound_state_is_insensitive_to_outer_radius(gamma):
    m = model(polytrope(gamma), 1.0)
    a = sp.eigenpairs(sp.assemble_D0(m, 3.0), 1).eigenvalues[0]
    b = sp.eigenpairs(sp.assemble_D0(m, 6.0), 1).eigenvalues[0]
    assert a < 0
    assert abs(a - b) < 1e-8 * abs(a)


def test_any_model_has_a_negative_d0_mode(fixture_models):
    for m in fixture_models.values():
        assert sp.negative_index(sp.assemble_D0(m)) >= 1


def test_dl_requires_positive_l():
    with pytest.raises(ValueError):
        sp.assemble_Dl(model(polytrope(5 / 3), 1.0), 0)


def test_d1_kernel_is_the_translation_mode(fixture_models):
    for name, m in fixture_models.items():
        op = sp.assemble_Dl(m, 1)
        dim, vecs = sp.kernel_test(op)
        assert dim == 1, name
        u = op.grid * m.yprime_at(op.grid)
        assert _cosine(u, vecs[:, 0]) >= 0.99, name


def test_d2_is_positive(fixture_models):
    for name, m in fixture_models.items():
        assert sp.eigenpairs(sp.assemble_Dl(m, 2), 1).eigenvalues[0] > 0, name


def test_l_shift_matches_rayleigh_quotient():
    m = model(polytrope(5 / 3), 1.0)
    d1, d2 = sp.assemble_Dl(m, 1), sp.assemble_Dl(m, 2)
    _, vecs = sp.kernel_test(d1)
    u = vecs[:, 0]
    norm = u @ (d1.weight * u)

    def rq(op):
        return (u @ op.dense() @ u) / norm

    # centrifugal difference (6 - 2)/r^2, plus the exterior closure l/R_out at the last node
    shift = (np.sum(d1.weight * 4.0 * u * u / d1.grid**2) + u[-1] ** 2 / d1.outer_radius) / norm
    assert rq(d2) - rq(d1) == pytest.approx(shift, rel=1e-10)
    assert sp.eigenpairs(d2, 1).eigenvalues[0] <= rq(d2)


def test_kernel_at_mr_critical_point():
    c = composite()
    mu = MU_MR_CRITICAL
    op = sp.assemble_D0(eq.integrate_profile(c, mu))
    dim, vecs = sp.kernel_test(op)
    assert dim == 1
    e = 1e-4
    hi, lo = eq.integrate_profile(c, mu * (1 + e)), eq.integrate_profile(c, mu * (1 - e))
    dV = (hi.potential_at(op.grid) - lo.potential_at(op.grid)) / (2 * e * mu)
    assert _cosine(op.grid * dV, vecs[:, 0]) >= 0.99


# ---- L_r ---------------------------------------------------------------------------


@pytest.mark.parametrize("gamma", GAMMAS)
def test_lr_index_equals_d0_index(gamma):
    m = model(polytrope(gamma), 1.0)
    assert sp.negative_index(sp.assemble_Lr(m)) == sp.negative_index(sp.assemble_D0(m)) == 1


@pytest.mark.parametrize("key", ["composite mu=3", "composite mu=60", "white dwarf mu=100"])
def test_lr_index_equals_d0_index_beyond_polytropes(fixture_models, key):
    m = fixture_models[key]
    assert sp.negative_index(sp.assemble_Lr(m)) == sp.negative_index(sp.assemble_D0(m))


def _cell_function(op, c):
    def sigma(r):
        idx = np.floor(np.asarray(r) / op.h).astype(int)
        out = np.zeros(np.shape(r))
        inside = idx < op.size
        out[inside] = c[idx[inside]]
        return out

    return sigma


def _local_oracle(op):
    """int over each cell of Phi''(rho_mu) 4 pi r^2, by adaptive quadrature."""
    m = op.model

    def f(r):
        return 4 * math.pi * r * r * float(m.eos.enthalpy_second(float(m.rho_at(r))))

    return np.array(
        [integrate.quad(f, k * op.h, (k + 1) * op.h, epsabs=0, epsrel=1e-12)[0] for k in range(op.size)]
    )


@pytest.mark.parametrize("key", ["polytrope gamma=1.3", "polytrope gamma=1.667", "composite mu=60"])
def test_lr_form_splits_into_local_and_gravity(fixture_models, key, rng):
    op = sp.assemble_Lr(fixture_models[key], N=200)
    local = _local_oracle(op)
    assert np.all(local > 0)
    for _ in range(5):
        c = rng.normal(size=op.size)
        gravity = sp.gravity_energy(_cell_function(op, c), op.model.R, n_cells=op.size + 1)
        assert sp.lr_form(op, c) + gravity == pytest.approx(float(np.sum(local * c * c)), rel=1e-8)


@pytest.mark.parametrize("gamma", [1.3, 5 / 3, 1.9])
def test_lr_form_on_center_density_derivative(gamma):
    p = polytrope(gamma)
    mu, e = 1.0, 1e-4
    hi, lo = eq.integrate_profile(p, mu * (1 + e)), eq.integrate_profile(p, mu * (1 - e))
    dM = (hi.M - lo.M) / (2 * e * mu)
    dMR = (hi.M / hi.R - lo.M / lo.R) / (2 * e * mu)
    op = sp.assemble_Lr(model(p, mu))
    drho = sp.cell_average(op, lambda r: (hi.rho_at(r) - lo.rho_at(r)) / (2 * e * mu))
    assert sp.lr_form(op, drho) == pytest.approx(-dMR * dM, rel=0.02)


def test_constrained_index_needs_lr():
    with pytest.raises(ValueError):
        sp.constrained_negative_index(sp.assemble_D0(model(polytrope(5 / 3), 1.0)))


# ---- Eddington ---------------------------------------------------------------------


def _local_gravity(m, v):
    f = lambda r: 16 * math.pi**2 * r * r * float(m.rho_at(r)) ** 2 * np.asarray(v(r)).item() ** 2
    return integrate.quad(f, 0, m.R, epsabs=0, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("gamma", [1.3, 5 / 3, 1.9])
def test_gravity_reduction_matches_nonlocal_evaluation(gamma, rng):
    p = polytrope(gamma)
    m = model(p, 1.0)
    k = np.arange(1, 5)[:, None] * math.pi / (2 * m.R)
    for _ in range(5):
        co = rng.normal(size=(4, 1))
        v = lambda r: (co * np.sin(k * np.atleast_1d(r))).sum(0)
        dv = lambda r: (co * k * np.cos(k * np.atleast_1d(r))).sum(0)

        def sigma(r):
            # -(1/r^2)(r^2 rho v)'
            rho = m.rho_at(r)
            drho = p.inverse_prime(m.y_at(r)) * m.yprime_at(r)
            return -(2 * rho * v(r) / r + drho * v(r) + rho * dv(r))

        assert sp.gravity_energy(sigma, m.R) == pytest.approx(_local_gravity(m, v), rel=1e-8)


@pytest.mark.parametrize("mu", [0.1, 1.0, 10.0])
def test_eddington_soft_polytrope_has_one_growing_mode(mu):
    s = sp.eddington_spectrum(model(polytrope(1.3), mu), k=3)
    assert s.neg_count == 1
    assert np.sum(s.eigenvalues < 0) == 1


@pytest.mark.parametrize("mu", [0.1, 1.0, 10.0])
def test_eddington_stiff_polytrope_is_stable(mu):
    s = sp.eddington_spectrum(model(polytrope(5 / 3), mu), k=3)
    assert s.neg_count == 0
    assert np.all(s.eigenvalues > 0)


def test_eddington_critical_index_converges_to_zero():
    m = model(polytrope(4 / 3), 1.0)
    mins = [abs(sp.eddington_spectrum(m, N, 1).eigenvalues[0]) for N in (200, 400, 800)]
    assert mins[0] > mins[1] > mins[2]
    assert mins[0] / mins[1] >= 2 and mins[1] / mins[2] >= 2


def test_eddington_second_order_convergence():
    m = model(polytrope(1.3), 1.0)
    w = [sp.eddington_spectrum(m, N, 1).eigenvalues[0] for N in (200, 400, 800)]
    assert 3.6 <= (w[0] - w[1]) / (w[1] - w[2]) <= 4.4


def test_eddington_eigenvectors_are_weight_orthogonal(fixture_models):
    for m in fixture_models.values():
        s = sp.eddington_spectrum(m, k=4)
        op = sp.assemble_eddington(m)
        gram = s.eigenvectors.T @ (op.weight[:, None] * s.eigenvectors)
        assert np.allclose(gram, np.eye(4), atol=1e-8)


def test_neg_count_agrees_with_returned_eigenvalues(fixture_models):
    for m in fixture_models.values():
        for op in (sp.assemble_D0(m), sp.assemble_eddington(m)):
            s = sp.eigenpairs(op, 4)
            assert s.neg_count == int(np.sum(s.eigenvalues < -op.kernel_tolerance()))


@pytest.mark.parametrize("key", ["polytrope gamma=1.3", "polytrope gamma=1.667", "polytrope gamma=1.9",
                                 "composite mu=3", "composite mu=60", "white dwarf mu=100"])
def test_constrained_lr_index_equals_growing_modes(fixture_models, key):
    m = fixture_models[key]
    assert sp.constrained_negative_index(sp.assemble_Lr(m)) == sp.eddington_spectrum(m).neg_count


def test_eigenpairs_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        sp.eigenpairs(sp.assemble_D0(model(polytrope(5 / 3), 1.0)), 0)


def test_eddington_counts_both_modes_of_a_condensed_star():
    # past the first mass minimum two modes grow; the weaker one is O(10) while
    # 4 pi mu is O(1e5), so the kernel tolerance must follow the mean density
    sl = sp.eddington_spectrum(model(composite(), 2e4), k=3)
    assert sl.neg_count == 2
    assert np.sum(sl.eigenvalues < 0) == 2
