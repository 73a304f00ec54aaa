import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from hydropseudo.assembly import SolutionTriple, assemble_system, evolutionary_form
from hydropseudo.exceptions import BranchCutError, ChamberError, DegeneracyError, SingularPointError
from hydropseudo.polyode import poly_from_roots
from hydropseudo.pseudo import (
    PseudoJet,
    QState,
    cross_check_AB,
    extract_AB,
    fg_derivatives,
    fg_involution_residual,
    pseudo_compat_residual,
    q_flow_field,
    q_flow_involution_residual,
    reconstruct_fg,
    sample_q,
)
from hydropseudo.rational import random_chamber_point, random_exponents
from hydropseudo.suites import q_circle, q_nodes

seeds = st.integers(0, 2**32 - 1)
Z = sp.Symbol("z")


def _config(rng, n):
    return random_chamber_point(rng, n), random_exponents(rng, n), SolutionTriple.random(rng, n)


def test_qstate_guards():
    with pytest.raises(ChamberError):
        QState(2.5, [2.0, 3.0], np.ones(4))
    with pytest.raises(ChamberError):
        QState(4.0 + 1j, [2.0, 3.0], np.ones(4))
    with pytest.raises(SingularPointError):
        QState(3.0, [2.0, 3.0], np.ones(4), mode="complex")
    with pytest.raises(BranchCutError):
        QState(-2.0 + 1e-5j, [2.0, 3.0], np.full(4, 0.5), mode="complex").power(np.full(4, 0.5))


def test_product_data_freezes_q():
    rng = np.random.default_rng(0)
    n = 3
    u = random_chamber_point(rng, n)
    s = np.concatenate([rng.uniform(-2, 2, 2), np.ones(n)])
    q = u[-1] + 1.7
    q_xi, q_u = q_flow_field(QState(q, u, s), poly_from_roots(u).coeffs)
    assert np.max(np.abs(q_u)) < 1e-12
    assert abs(q_xi - q ** s[0] * (q - 1) ** s[1]) < 1e-13 * abs(q_xi)


def test_single_component_substitution():
    u1, q = 2.5, 4.0
    q_xi, q_u = q_flow_field(QState(q, [u1], [1.0, 1.0, 1.0]), [1.0])
    assert abs(q_xi - q * (q - 1) * (q - u1)) < 1e-12
    assert abs(q_u[0] - q * (q - 1) / (u1 * (u1 - 1))) < 1e-14


def test_zero_of_phi_is_refused():
    u = np.array([2.0, 3.0])
    with pytest.raises(SingularPointError):
        q_flow_field(QState(5.0, u, np.ones(4)), poly_from_roots([5.0, 7.0]).coeffs)


@pytest.mark.parametrize("n", [2, 3])
def test_q_flow_involution(n):
    rng = np.random.default_rng(40 + n)
    u, s, tr = _config(rng, n)
    q = sample_q(rng, u, tr.alpha)[0]
    for i in range(n):
        assert q_flow_involution_residual(QState(q, u, s), tr.alpha, i) < 1e-6


def test_fg_equal_phi():
    rng = np.random.default_rng(1)
    u, s, tr = _config(rng, 3)
    jet = fg_derivatives(QState(u[-1] + 2.0, u, s), SolutionTriple(tr.alpha, tr.alpha, tr.gamma))
    assert abs(jet.f_xi - 1) < 1e-15
    assert np.all(jet.f_u == 0)


@given(st.integers(2, 4), seeds)
def test_identity_residual(n, seed):
    rng = np.random.default_rng(seed)
    u, s, tr = _config(rng, n)
    for q in sample_q(rng, u, tr.alpha, 3, margin=0.05):
        assert fg_derivatives(QState(q, u, s), tr).ps1_residual < 1e-10


def test_identity_residual_complex_mode():
    rng = np.random.default_rng(5)
    u, s, tr = _config(rng, 3)
    for q in q_circle(u):
        assert fg_derivatives(QState(q, u, s, mode="complex"), tr).ps1_residual < 1e-10


def exact_fields(u, s, al, be, ga, q):
    """f, g derivative fields by exact rational arithmetic (integer exponents)."""
    phi, phi1, phi2 = (sum(c * Z**k for k, c in enumerate(v)) for v in (al, be, ga))
    n = len(u)
    bases = [q, q - 1] + [q - x for x in u]
    P = sp.prod([b ** (1 - e) for b, e in zip(bases, s)])
    phq = phi.subs(Z, q)
    out = {"f_xi": phi1.subs(Z, q) / phq, "g_xi": phi2.subs(Z, q) / phq, "f_u": [], "g_u": []}
    for i in range(n):
        d = u[i] * (u[i] - 1) * sp.prod([u[i] - u[j] for j in range(n) if j != i])

        def wedge(a, b):
            return sp.cancel((a.subs(Z, u[i]) * b - b.subs(Z, u[i]) * a) / ((Z - u[i]) * d)).subs(Z, q)

        out["f_u"].append(wedge(phi, phi1) * P / phq)
        out["g_u"].append(-wedge(phi2, phi) * P / phq)
    return out


def test_fields_match_exact_arithmetic():
    u = [sp.Rational(5, 2), sp.Rational(7, 2)]
    s = [1, 0, 2, -1]
    al, be, ga = [1, -2, 1], [3, 0, -1], [2, 1, 1]
    q = sp.Rational(11, 2)
    want = exact_fields(u, s, *(list(map(sp.Integer, v)) for v in (al, be, ga)), q)
    jet = fg_derivatives(QState(float(q), np.array(u, dtype=float), np.array(s, dtype=float)),
                         SolutionTriple(al, be, ga))
    assert abs(jet.f_xi - float(want["f_xi"])) < 1e-14
    assert abs(jet.g_xi - float(want["g_xi"])) < 1e-14
    np.testing.assert_allclose(jet.f_u, np.array(want["f_u"], dtype=float), rtol=1e-13)
    np.testing.assert_allclose(jet.g_u, np.array(want["g_u"], dtype=float), rtol=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_fg_involution_in_xi_and_u(n):
    rng = np.random.default_rng(60 + n)
    u, s, tr = _config(rng, n)
    state = QState(sample_q(rng, u, tr.alpha)[0], u, s)
    assert fg_involution_residual(state, tr, 0) < 1e-6
    assert fg_involution_residual(state, tr, 0, 1) < 1e-6


def test_printed_sign_choice_breaks_mixed_partials():
    rng = np.random.default_rng(62)
    u, s, tr = _config(rng, 2)
    state = QState(sample_q(rng, u, tr.alpha)[0], u, s)
    assert fg_involution_residual(state, tr, 0, negate=True) > 1.0


def test_sign_flip_keeps_extraction():
    rng = np.random.default_rng(63)
    u, s, tr = _config(rng, 2)
    qs = q_nodes(u)
    jets = [fg_derivatives(QState(q, u, s), tr, negate=True) for q in qs]
    A1, B1, _ = extract_AB(u, tr, s, qs)
    A2, B2, _ = extract_AB(u, tr, s, qs, jets=jets)
    np.testing.assert_allclose(A1, A2, atol=1e-12)
    np.testing.assert_allclose(B1, B2, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_extraction_real_nodes(n):
    rng = np.random.default_rng(70 + n)
    for _ in range(10):
        u, s, tr = _config(rng, n)
        A, B, spread = extract_AB(u, tr, s, q_nodes(u))
        A2, B2 = evolutionary_form(assemble_system(u, tr))
        scale = max(1.0, np.max(np.abs(A2)), np.max(np.abs(B2)))
        assert spread < 1e-8
        assert max(np.max(np.abs(A - A2)), np.max(np.abs(B - B2))) < 1e-8 * scale


@given(st.integers(2, 3), seeds)
def test_extraction_circle_samples(n, seed):
    rng = np.random.default_rng(seed)
    u, s, tr = _config(rng, n)
    A, B, spread = extract_AB(u, tr, s, q_circle(u), mode="complex")
    A2, B2 = evolutionary_form(assemble_system(u, tr))
    scale = max(1.0, np.max(np.abs(A2)), np.max(np.abs(B2)))
    assert spread < 1e-8
    assert cross_check_AB(u, tr, s, q_circle(u), mode="complex") < 1e-8 * scale


def test_extraction_noise_is_detected():
    rng = np.random.default_rng(80)
    for n in (2, 3):
        u, s, tr = _config(rng, n)
        qs = q_nodes(u)
        jets = [fg_derivatives(QState(q, u, s), tr) for q in qs]
        noisy = [PseudoJet(j.f_xi, j.g_xi, j.f_u + 1e-4 * np.abs(j.f_u) * rng.normal(size=n), j.g_u)
                 for j in jets]
        assert extract_AB(u, tr, s, qs, jets=noisy)[2] > 1e-5


def test_extraction_needs_enough_samples_and_rank():
    rng = np.random.default_rng(81)
    u, s, tr = _config(rng, 3)
    with pytest.raises(ValueError):
        extract_AB(u, tr, s, q_nodes(u, 3))
    a = rng.normal(size=4)
    with pytest.raises((DegeneracyError, SingularPointError)):
        extract_AB(u, SolutionTriple(a, tr.beta, a), s, q_nodes(u))


def test_pseudo_compat_zero_derivatives():
    rng = np.random.default_rng(90)
    u, s, tr = _config(rng, 3)
    assert pseudo_compat_residual(u, tr, s, np.zeros(3), np.zeros(3), q_nodes(u)) == 0.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_pseudo_compat_random(n):
    rng = np.random.default_rng(91 + n)
    for _ in range(17):
        u, s, tr = _config(rng, n)
        ux, uy = rng.normal(size=(2, n))
        assert pseudo_compat_residual(u, tr, s, ux, uy, sample_q(rng, u, tr.alpha, 3, margin=0.05)) < 1e-9


def test_pseudo_compat_transposed_control():
    rng = np.random.default_rng(95)
    for n in (2, 3):
        u, s, tr = _config(rng, n)
        A, B = evolutionary_form(assemble_system(u, tr))
        ux, uy = rng.normal(size=(2, n))
        assert pseudo_compat_residual(u, tr, s, ux, uy, q_nodes(u), ut=A.T @ ux + B @ uy) > 1e-4


def test_reconstruct_fg_equal_phi_is_linear():
    rng = np.random.default_rng(96)
    u, s, tr = _config(rng, 2)
    state = QState(sample_q(rng, u, tr.alpha)[0], u, s)
    xi, q, f, _ = reconstruct_fg(state, SolutionTriple(tr.alpha, tr.alpha, tr.gamma), 1e-2)
    np.testing.assert_allclose(f, xi, atol=1e-14)


def test_reconstruct_fg_converges():
    rng = np.random.default_rng(97)
    u, s, tr = _config(rng, 2)
    state = QState(sample_q(rng, u, tr.alpha)[0], u, s)
    coarse = reconstruct_fg(state, tr, 1e-2, num=51)
    fine = reconstruct_fg(state, tr, 1e-2, num=801)
    assert abs(coarse[2][-1] - fine[2][-1]) < 1e-6 * max(1.0, abs(fine[2][-1]))
    assert abs(coarse[1][0] - state.q) == 0
