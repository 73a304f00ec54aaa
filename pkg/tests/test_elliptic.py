import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydropseudo import elliptic as ell
from hydropseudo.assembly import evolutionary_form, kernel_angle
from hydropseudo.exceptions import DegeneracyError, SingularPointError, ThetaTruncationError
from hydropseudo.suites import random_kernel_vector, theta_law_residual

CTX = ell.ThetaCtx(1j)
ETA = 0.17 + 0.11j
seeds = st.integers(0, 2**32 - 1)


def _config(seed, n, ctx=CTX):
    rng = np.random.default_rng(seed)
    return rng, ell.random_elliptic_point(rng, n, ctx, ETA), ell.EllipticTriple.random(rng, n)


# theta -------------------------------------------------------------------

def theta_oracle(z, tau):
    """Same function through the classical theta_1 of mpmath."""
    nome = mp.exp(1j * mp.pi * tau)
    return complex(-1j * mp.exp(-1j * mp.pi * tau / 4) * mp.exp(1j * mp.pi * z) * mp.jtheta(1, mp.pi * z, nome))


@pytest.mark.parametrize("tau", [1j, 0.3 + 1.1j, -0.4 + 0.6j])
def test_theta_against_classical_series(tau):
    ctx = ell.ThetaCtx(tau)
    rng = np.random.default_rng(0)
    for z in rng.normal(size=5) + 1j * rng.normal(size=5):
        want = theta_oracle(z, tau)
        assert abs(ell.theta(z, ctx) - want) < 1e-12 * max(1.0, abs(want))


def test_theta_laws_in_reduced_strip():
    rng = np.random.default_rng(1)
    z = rng.random(50) + (rng.random(50) - 0.5) * CTX.tau
    assert theta_law_residual(z, CTX) < 1e-10
    assert abs(ell.theta(0.0, CTX)) < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.5, 0.5), st.floats(0.5, 2.0))
def test_theta_laws_property(x, y, re_tau, im_tau):
    ctx = ell.ThetaCtx(complex(re_tau, im_tau))
    z = complex(x, y)
    t = ell.theta(z, ctx)
    e = np.exp(-2j * np.pi * z)
    scale = max(1.0, abs(t))
    assert abs(ell.theta(z + 1, ctx) - t) < 1e-10 * scale
    assert abs(ell.theta(z + ctx.tau, ctx) + e * t) < 1e-10 * max(scale, abs(e * t))
    assert abs(ell.theta(-z, ctx) + e * t) < 1e-10 * max(scale, abs(e * t))


def test_theta_derivative_matches_fd():
    z = 0.23 + 0.17j
    _, d = ell.theta(z, CTX, derivative=True)
    h = 1e-4
    fd = (ell.theta(z - 2 * h, CTX) - 8 * ell.theta(z - h, CTX) + 8 * ell.theta(z + h, CTX)
          - ell.theta(z + 2 * h, CTX)) / (12 * h)
    assert abs(d - fd) < 1e-9 * abs(d)


def test_truncation_choice():
    assert CTX.M == 4
    assert ell.ThetaCtx(0.3j).M <= 40
    with pytest.raises(ThetaTruncationError):
        ell.ThetaCtx(1j, truncation=2)
    with pytest.raises(ThetaTruncationError):
        ell.ThetaCtx(0.3j, tol=1e-300, max_truncation=5)
    with pytest.raises(ValueError):
        ell.ThetaCtx(-1j)


def test_far_arguments_stay_accurate():
    z = 0.3 + 0.2j
    base = ell.theta(z, CTX)
    k = 6
    far = ell.theta(z + k * CTX.tau, CTX)
    mult = (-1) ** k * np.exp(-2j * np.pi * (k * z + k * (k - 1) * CTX.tau / 2))
    assert abs(far - mult * base) < 1e-12 * abs(far)


# theta spaces ------------------------------------------------------------

def test_theta_in_degree_one_space():
    assert ell.theta_space_member(lambda z: ell.theta(z, CTX), 1, 0.0, CTX) < 1e-10


def test_wrong_characteristic_is_rejected():
    assert ell.theta_space_member(lambda z: ell.theta(z, CTX), 1, 0.3, CTX) > 1e-2


@given(st.integers(1, 5), seeds)
def test_products_of_shifted_thetas(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.random(n) + 0.3j * rng.normal(size=n)
    f = lambda z: np.prod([ell.theta(z - x, CTX) for x in a], axis=0)
    assert ell.theta_space_member(f, n, a.sum(), CTX) < 1e-9


@pytest.mark.parametrize("n", [3, 4, 5])
def test_psi_basis_membership(n):
    _, pt, _ = _config(n, n)
    c = pt.u.sum() - pt.eta
    for k in range(n):
        assert ell.theta_space_member(lambda z: ell.psi_basis(z, pt, CTX)[k], n, c, CTX) < 1e-9


def test_psi_single_point():
    pt = ell.EllipticPoint([0.3 + 0.1j], ETA)
    z = np.array([0.1, 0.7 - 0.2j])
    np.testing.assert_allclose(ell.psi_basis(z, pt, CTX)[0], ell.theta(z - pt.u[0] + ETA, CTX), rtol=1e-15)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_collocation_nonsingular(n):
    rng, pt, _ = _config(20 + n, n)
    m = ell.collocation_matrix(ell.random_zetas(rng, pt, CTX, n), pt, CTX)
    assert abs(np.linalg.det(m)) > 1e-10


def test_psi_derivative(rng):
    pt = ell.random_elliptic_point(rng, 3, CTX, ETA)
    z = 0.41 + 0.05j
    _, d = ell.psi_basis(z, pt, CTX, derivative=True)
    h = 1e-4
    fd = (ell.psi_basis(z - 2 * h, pt, CTX) - 8 * ell.psi_basis(z - h, pt, CTX)
          + 8 * ell.psi_basis(z + h, pt, CTX) - ell.psi_basis(z + 2 * h, pt, CTX)) / (12 * h)
    assert np.max(np.abs(d - fd)) < 1e-8 * np.max(np.abs(d))


# linear system -----------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5])
def test_basis_solves_linear_system(n):
    _, pt, _ = _config(30 + n, n)
    e = np.eye(n)
    assert max(ell.linell_residual(pt, e[k], i, CTX) for k in range(n) for i in range(n)) < 1e-6


def test_general_constant_combination_solves(rng):
    pt = ell.random_elliptic_point(rng, 4, CTX, ETA)
    coeff = rng.normal(size=4) + 1j * rng.normal(size=4)
    assert max(ell.linell_residual(pt, coeff, i, CTX) for i in range(4)) < 1e-6


def test_wrong_eta_is_rejected(rng):
    pt = ell.random_elliptic_point(rng, 4, CTX, ETA)
    e = np.eye(4)
    assert min(ell.linell_residual(pt, e[k], k, CTX, eta=ETA + 0.2) for k in range(4)) > 1e-3


def test_zero_coefficients_give_zero(rng):
    pt = ell.random_elliptic_point(rng, 3, CTX, ETA)
    assert ell.linell_residual(pt, np.zeros(3), 1, CTX) == 0.0


def test_point_guards():
    with pytest.raises(SingularPointError):
        ell.EllipticPoint([0.1, 0.1 + 1e-4], ETA).check(CTX)
    with pytest.raises(SingularPointError):
        ell.EllipticPoint([0.1, 0.5], 1.0 + 1j).check(CTX)


# bilinears and the assembled system --------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5])
def test_bilinear_membership(n):
    _, pt, tr = _config(40 + n, n)
    c = pt.u.sum() - 2 * pt.eta
    for which in range(3):
        for k in range(n):
            f = lambda z: ell.elliptic_bilinears_grid(z, pt, tr, CTX)[which, k]
            assert ell.theta_space_member(f, n, c, CTX) < 1e-9


def test_grid_and_scalar_bilinears_agree(rng):
    pt, tr = ell.random_elliptic_point(rng, 4, CTX, ETA), ell.EllipticTriple.random(rng, 4)
    z = ell.random_zetas(rng, pt, CTX, 6)
    grid = ell.elliptic_bilinears_grid(z, pt, tr, CTX)
    scalar = np.array([ell.elliptic_bilinears(x, pt, tr, CTX) for x in z]).transpose(1, 2, 0)
    assert np.max(np.abs(grid - scalar)) < 1e-13 * np.max(np.abs(scalar))


def test_equal_phi_kills_mu(rng):
    pt, tr = ell.random_elliptic_point(rng, 4, CTX, ETA), ell.EllipticTriple.random(rng, 4)
    same = ell.EllipticTriple(tr.alpha, tr.alpha, tr.gamma)
    mu = ell.elliptic_bilinears_grid(ell.random_zetas(rng, pt, CTX, 8), pt, same, CTX)[2]
    assert np.max(np.abs(mu)) == 0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_limit_values_match_coefficient_formula(n):
    _, pt, tr = _config(50 + n, n)
    c = ell.exell_coefficients(pt, CTX)
    al, be, ga = tr.alpha, tr.beta, tr.gamma
    for j in range(n):
        psi_jj = ell.psi_basis(pt.u[j], pt, CTX)[j]
        th, nu, mu = ell.elliptic_bilinears(pt.u[j], pt, tr, CTX, limit=True)
        for i in range(n):
            if i == j:
                continue
            scale = abs(c[i, j] * psi_jj)
            assert abs(nu[i] - c[i, j] * psi_jj * (al[i] * ga[j] - ga[i] * al[j])) < 1e-12 * scale
            assert abs(mu[i] - c[i, j] * psi_jj * (be[i] * al[j] - al[i] * be[j])) < 1e-12 * scale
            assert abs(th[i] - c[i, j] * psi_jj * (ga[i] * be[j] - be[i] * ga[j])) < 1e-12 * scale
        # the bilinears sum to zero identically, which fixes the diagonal entry
        for v in (th, nu, mu):
            assert abs(v.sum()) < 1e-12 * np.max(np.abs(v))
        near = ell.elliptic_bilinears(pt.u[j] + 1e-7, pt, tr, CTX)
        top = max(np.max(np.abs(v)) for v in (th, nu, mu))
        assert max(np.max(np.abs(a - b)) for a, b in zip(near, (th, nu, mu))) < 1e-4 * top


def test_pole_without_limit_raises(rng):
    pt, tr = ell.random_elliptic_point(rng, 3, CTX, ETA), ell.EllipticTriple.random(rng, 3)
    with pytest.raises(SingularPointError):
        ell.elliptic_bilinears(pt.u[0] + 1.0, pt, tr, CTX)
    with pytest.raises(SingularPointError):
        ell.elliptic_bilinears_grid([pt.u[1]], pt, tr, CTX)


@pytest.mark.parametrize("seed", range(10))
def test_standard_triple_n3_is_trivial(seed):
    rng = np.random.default_rng(seed)
    pt = ell.random_elliptic_point(rng, 3, CTX, ETA)
    sys3 = ell.assemble_exell(pt, ell.EllipticTriple.standard(3), CTX)
    assert kernel_angle(sys3.kernel(), ell.trivial_system_n3().kernel()) < 1e-8


def test_trivial_reduction_determinant_ignores_u(rng):
    dets = [ell.trivial_reduction_determinant(ell.random_elliptic_point(rng, 3, CTX, ETA), CTX) for _ in range(5)]
    assert abs(dets[0]) > 0.1
    assert max(abs(d - dets[0]) for d in dets) < 1e-10


def test_general_triple_n3_relates_by_gl3(rng):
    pt, tr = ell.random_elliptic_point(rng, 3, CTX, ETA), ell.EllipticTriple.random(rng, 3)
    n = 3
    k = ell.assemble_exell(pt, ell.EllipticTriple.standard(3), CTX).kernel()
    g = tr.stack[:, :3]
    d = np.einsum("ab,bnk->ank", g, np.stack([k[2 * n:], k[:n], k[n:2 * n]]))
    moved = np.linalg.qr(np.vstack([d[1], d[2], d[0]]))[0]
    assert kernel_angle(moved, ell.assemble_exell(pt, tr, CTX).kernel()) < 1e-8


@given(st.integers(3, 5), seeds)
def test_translation_invariance(n, seed):
    rng, pt, tr = _config(seed, n)
    v = complex(rng.normal(), rng.normal())
    t0 = ell.assemble_exell(pt, tr, CTX).T
    t1 = ell.assemble_exell(pt.translated(v), tr, CTX).T
    assert np.max(np.abs(t0 - t1)) < 1e-10 * np.max(np.abs(t0))


def test_time_block_is_degenerate(rng):
    pt, tr = ell.random_elliptic_point(rng, 4, CTX, ETA), ell.EllipticTriple.random(rng, 4)
    sys4 = ell.assemble_exell(pt, tr, CTX)
    assert sys4.rank() == 4
    with pytest.raises(DegeneracyError) as info:
        evolutionary_form(sys4)
    assert info.value.condition > 1e12


@pytest.mark.parametrize("seed", range(20))
def test_compatibility_on_kernel(seed):
    rng, pt, tr = _config(seed, 4)
    v = random_kernel_vector(rng, ell.assemble_exell(pt, tr, CTX))
    zs = ell.random_zetas(rng, pt, CTX, 20)
    assert ell.elliptic_compat_residual(pt, tr, v[4:8], v[8:], v[:4], zs, CTX) < 1e-8


def test_compatibility_off_kernel(rng):
    pt, tr = ell.random_elliptic_point(rng, 4, CTX, ETA), ell.EllipticTriple.random(rng, 4)
    v = rng.normal(size=12) + 1j * rng.normal(size=12)
    zs = ell.random_zetas(rng, pt, CTX, 20)
    assert ell.elliptic_compat_residual(pt, tr, v[4:8], v[8:], v[:4], zs, CTX) > 1e-3
    assert ell.elliptic_compat_residual(pt, tr, np.zeros(4), np.zeros(4), np.zeros(4), zs, CTX) == 0.0


# pseudopotential ---------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_identity_on_random_data(seed):
    rng, pt, tr = _config(seed, 4)
    for q in ell.sample_flow_points(rng, pt, tr.alpha, CTX, 3):
        assert ell.elliptic_pseudo_fields(q, pt, tr, CTX).ps1_residual < 1e-9


def test_equal_phi_fields(rng):
    pt, tr = ell.random_elliptic_point(rng, 4, CTX, ETA), ell.EllipticTriple.random(rng, 4)
    q = ell.sample_flow_points(rng, pt, tr.alpha, CTX, 1)[0]
    fields = ell.elliptic_pseudo_fields(q, pt, ell.EllipticTriple(tr.alpha, tr.alpha, tr.gamma), CTX)
    assert abs(fields.f_xi - 1) < 1e-14
    assert np.all(fields.f_u == 0)


@pytest.mark.parametrize("n", [4, 5])
def test_flow_involution(n):
    rng, pt, tr = _config(70 + n, n)
    q = ell.sample_flow_points(rng, pt, tr.alpha, CTX, 1)[0]
    assert max(ell.parell_involution_residual(q, pt, tr.alpha, i, CTX) for i in range(n)) < 1e-6
    assert ell.parell_involution_residual(q, pt, tr.alpha, 0, CTX, along="flow") < 1e-6
