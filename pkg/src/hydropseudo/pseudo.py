"""Non-parametric pseudopotential ``Psi_t = f(xi, u)``, ``Psi_x = g(xi, u)``.

Here ``xi = Psi_y`` and ``q(xi, u)`` is the spectral parameter carried by
the flow

    q_xi  = q^{s_1} (q-1)^{s_2} prod (q-u_j)^{s_{j+2}} / phi(q),
    q_u_i = phi(u_i)/phi(q) * q (q-1) prod_{j != i} (q-u_j) / D_i.

The derivative fields of ``f`` and ``g`` are rational in ``q`` up to one
shared power product ``P(q) = q^{1-s_1} (q-1)^{1-s_2} prod (q-u_j)^{1-s_{j+2}}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .assembly import BilinearPolys, SolutionTriple, assemble_system, bilinear_polys, evolutionary_form
from .exceptions import BranchCutError, ChamberError, DegeneracyError, SingularPointError, TransportError
from .polyode import PathInU, Poly, fd_derivative, ode_transport, poly_eval
from .rational import connection_matrix, validate_chamber, validate_exponents, vandermonde_denominator

CUT_MARGIN = 1e-3


@dataclass(frozen=True)
class QState:
    """Spectral parameter ``q`` at chamber point ``u`` with exponents ``s``.

    ``mode="real"`` requires real ``q > u_n`` so every power base is
    positive; ``mode="complex"`` uses principal branches and refuses to
    evaluate within ``CUT_MARGIN`` of a cut.
    """

    q: complex
    u: np.ndarray
    s: np.ndarray
    mode: str = "real"

    def __post_init__(self):
        u = validate_chamber(self.u)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", validate_exponents(self.s, len(u)))
        if self.mode not in ("real", "complex"):
            raise ValueError(f"unknown mode {self.mode!r}")
        q = complex(self.q)
        if self.mode == "real":
            if q.imag != 0 or not q.real > u[-1]:
                raise ChamberError(f"real mode needs real q > u_n = {u[-1]}, got {self.q}")
        if np.min(np.abs(self.bases())) < 1e-12 * max(1.0, abs(q)):
            raise SingularPointError(f"q = {self.q} hits the singular set {{0, 1, u}}")
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return len(self.u)

    def bases(self) -> np.ndarray:
        q = complex(self.q)
        return np.concatenate([[q, q - 1.0], q - self.u])

    def power(self, exps) -> complex:
        """``prod base_k ** exps_k`` over ``(q, q-1, q-u_1, ...)``."""
        b = self.bases()
        exps = np.asarray(exps, dtype=float)
        if self.mode == "real":
            return complex(np.prod(b.real ** exps))
        frac = exps != np.round(exps)
        dist = np.where(b.real < 0, np.abs(b.imag), np.abs(b))
        if np.any(frac & (dist < CUT_MARGIN)):
            raise BranchCutError(f"q = {self.q} is within {CUT_MARGIN} of a branch cut")
        return complex(np.exp(np.sum(exps * np.log(b))))

    def moved(self, q=None, u=None) -> "QState":
        return QState(self.q if q is None else q, self.u if u is None else u, self.s, self.mode)


@dataclass(frozen=True)
class PseudoJet:
    f_xi: complex
    g_xi: complex
    f_u: np.ndarray
    g_u: np.ndarray
    ps1_residual: float = 0.0


def _phi_at(phi: Poly, q) -> complex:
    val = complex(poly_eval(phi, q))
    scale = float(np.sum(np.abs(phi.coeffs) * np.abs(q) ** np.arange(len(phi.coeffs))))
    if scale == 0 or abs(val) <= 1e-13 * scale:
        raise SingularPointError(f"phi vanishes at q = {q}: movable singularity of the flow")
    return val


def q_flow_field(state: QState, alpha) -> tuple[complex, np.ndarray]:
    """Right-hand sides ``(q_xi, q_u)`` of the spectral-parameter flow."""
    u, q = state.u, state.q
    n = state.n
    phi = Poly(alpha)
    phq = _phi_at(phi, q)
    q_xi = state.power(state.s) / phq
    q_u = np.empty(n, dtype=complex)
    for i in range(n):
        others = np.delete(u, i)
        num = q * (q - 1.0) * np.prod(q - others)
        q_u[i] = poly_eval(phi, u[i]) / phq * num / vandermonde_denominator(u, i)
    return q_xi, q_u


def fg_derivatives(state: QState, triple: SolutionTriple, bilinears: BilinearPolys | None = None,
                   negate: bool = False) -> PseudoJet:
    """``f_xi, g_xi, f_u, g_u`` at ``state``, with the identity residual attached.

    ``f_xi = phi1(q)/phi(q)``, ``g_xi = phi2(q)/phi(q)``,
    ``f_u_i = mu_i(q) P(q)/phi(q)`` and ``g_u_i = -nu_i(q) P(q)/phi(q)``.
    These are the signs that make the system involutive together with the
    q-flow; ``negate=True`` flips both (the assembled system and ``A, B``
    are unchanged by the flip, mixed partials are not).

    The residual compares ``f_xi g_u_i - g_xi f_u_i`` with
    ``theta_i(q) P(q) / phi(q)`` (opposite sign when ``negate``),
    normalised by the largest of the three terms.
    """
    bp = bilinear_polys(state.u, triple) if bilinears is None else bilinears
    phi, phi1, phi2 = triple.polys()
    q = state.q
    phq = _phi_at(phi, q)
    common = state.power(1.0 - state.s) / phq
    if negate:
        common = -common
    th, nu, mu = bp.evaluate(q)
    f_xi = complex(poly_eval(phi1, q)) / phq
    g_xi = complex(poly_eval(phi2, q)) / phq
    f_u = mu * common
    g_u = -nu * common
    lhs1, lhs2, rhs = f_xi * g_u, g_xi * f_u, th * common
    scale = np.maximum.reduce([np.abs(lhs1), np.abs(lhs2), np.abs(rhs)])
    mism = np.abs(lhs1 - lhs2 - rhs)
    rel = np.where(scale > 0, mism / np.where(scale > 0, scale, 1.0), 0.0)
    return PseudoJet(f_xi, g_xi, f_u, g_u, float(np.max(rel, initial=0.0)))


def sample_q(rng: np.random.Generator, u, alpha, count: int = 1, lo: float = 0.5, hi: float = 5.0,
             margin: float = 1.0, max_tries: int = 1000) -> np.ndarray:
    """Real ``q`` in ``(u_n + lo, u_n + hi)`` at least ``margin`` from every zero of ``phi``."""
    u = np.asarray(u, dtype=float)
    roots = np.roots(np.asarray(alpha, dtype=complex)[::-1]) if len(alpha) > 1 else np.array([])
    out = []
    for _ in range(max_tries):
        q = rng.uniform(u[-1] + lo, u[-1] + hi)
        if roots.size == 0 or np.min(np.abs(roots - q)) >= margin:
            out.append(q)
            if len(out) == count:
                return np.array(out)
    raise SingularPointError("no admissible q found away from the zeros of phi")


def _jets(u, triple, s, q_samples, mode):
    bp = bilinear_polys(u, triple)
    return [fg_derivatives(QState(q, u, s, mode), triple, bp) for q in q_samples]


def extract_AB(u, triple: SolutionTriple, s, q_samples, jets=None, mode: str = "real"):
    """Recover ``A, B`` from the pseudopotential alone.

    At every sample ``f_u_i = sum_j a_ji g_u_j`` and
    ``f_xi g_u_i - g_xi f_u_i = sum_j b_ji g_u_j``. The coefficients are
    solved by least squares over all samples; ``spread`` is the largest
    deviation from that solution of the square solves on each window of
    ``n`` consecutive samples, relative to ``max(1, |coefficient|)``.
    ``jets`` replaces the computed derivative fields (used to inject noise).
    """
    u = validate_chamber(u)
    n = len(u)
    q_samples = list(q_samples)
    if len(q_samples) < n + 1:
        raise ValueError(f"need at least {n + 1} q-samples, got {len(q_samples)}")
    if jets is None:
        jets = _jets(u, triple, s, q_samples, mode)
    G = np.array([j.g_u for j in jets])
    F = np.array([j.f_u for j in jets])
    W = np.array([j.f_xi * j.g_u - j.g_xi * j.f_u for j in jets])
    # the shared factor P(q)/phi(q) scales whole rows; divide it back out
    row = np.max(np.abs(G), axis=1, keepdims=True)
    if np.any(row == 0):
        raise SingularPointError("g_u vanishes identically at a sample")
    G, F, W = G / row, F / row, W / row
    rank = np.linalg.matrix_rank(G, tol=1e-12 * len(jets))
    if rank < n:
        raise DegeneracyError(f"g_u spans only {rank} of {n} directions", float("inf"))
    A = np.linalg.lstsq(G, F, rcond=None)[0]
    B = np.linalg.lstsq(G, W, rcond=None)[0]
    scale = max(1.0, float(np.max(np.abs(A))), float(np.max(np.abs(B))))
    spread = 0.0
    for k in range(len(jets) - n + 1):
        rows = slice(k, k + n)
        Gw = G[rows]
        spread = max(spread, float(np.max(np.abs(np.linalg.solve(Gw, F[rows]) - A))) / scale)
        spread = max(spread, float(np.max(np.abs(np.linalg.solve(Gw, W[rows]) - B))) / scale)
    return A, B, spread


def pseudo_compat_residual(u, triple: SolutionTriple, s, ux, uy, q_samples, ut=None, mode: str = "real") -> float:
    """Normalised mismatch of ``Psi_tx = Psi_xt`` at the q-samples.

    ``u_t`` defaults to the evolutionary form of the assembled system.
    """
    u = validate_chamber(u)
    ux = np.asarray(ux, dtype=complex)
    uy = np.asarray(uy, dtype=complex)
    if ut is None:
        A, B = evolutionary_form(assemble_system(u, triple))
        ut = A @ ux + B @ uy
    ut = np.asarray(ut, dtype=complex)
    worst, scale = 0.0, 0.0
    for jet in _jets(u, triple, s, q_samples, mode):
        terms = np.concatenate([
            jet.f_xi * uy * jet.g_u,
            ux * jet.f_u,
            -jet.g_xi * uy * jet.f_u,
            -ut * jet.g_u,
        ])
        worst = max(worst, abs(np.sum(terms)))
        scale = max(scale, float(np.max(np.abs(terms))))
    return 0.0 if scale == 0 else worst / scale


def reconstruct_fg(state: QState, triple: SolutionTriple, xi_end: float, num: int = 201, tol: float = 1e-11):
    """``(xi, q, f, g)`` along the xi-flow from ``state`` at fixed ``u``.

    ``q`` is integrated from the flow; ``f`` and ``g`` by the trapezoid rule
    with ``f = g = 0`` at ``xi = 0``.
    """
    phi, phi1, phi2 = triple.polys()
    xi = np.linspace(0.0, xi_end, num)

    def rhs(_, y):
        return [q_flow_field(state.moved(q=_as_q(y[0], state.mode)), triple.alpha)[0]]

    sol = solve_ivp(rhs, (0.0, xi_end), [complex(state.q)], t_eval=xi, rtol=tol, atol=tol)
    if sol.status != 0:
        raise TransportError(f"q-flow failed: {sol.message}", arclength=float(sol.t[-1]) if sol.t.size else 0.0)
    q = sol.y[0]
    f = cumulative_trapezoid(poly_eval(phi1, q) / poly_eval(phi, q), xi, initial=0.0)
    g = cumulative_trapezoid(poly_eval(phi2, q) / poly_eval(phi, q), xi, initial=0.0)
    return xi, q, f, g


def _as_q(q, mode):
    return complex(q).real if mode == "real" else complex(q)


def flow_in_u(state: QState, coeffs: np.ndarray, i: int, t: float, tol: float = 1e-13):
    """Move ``u_i`` by ``t`` at fixed ``xi``.

    ``coeffs`` (shape ``(n+1, k)``, first column ``phi``) follows the linear
    system and ``q`` follows ``q_u_i``. Returns ``(state', coeffs')``.
    """
    n = state.n
    coeffs = np.asarray(coeffs, dtype=complex)
    k = coeffs.shape[1]
    end = state.u.copy()
    end[i] += t
    validate_chamber(end)
    if t == 0:
        return state, coeffs

    def field(p, y):
        c = y[:-1].reshape(n + 1, k)
        st = state.moved(q=_as_q(y[-1], state.mode), u=p)
        out = np.zeros((n, y.size), dtype=complex)
        m = connection_matrix(p, state.s, i)
        out[i, :-1] = (m @ c).reshape(-1)
        out[i, -1] = q_flow_field(st, c[:, 0])[1][i]
        return out

    y0 = np.concatenate([coeffs.reshape(-1), [state.q]])
    y = ode_transport(field, PathInU.straight(state.u, end), y0, tol=tol)
    return state.moved(q=_as_q(y[-1], state.mode), u=end), y[:-1].reshape(n + 1, k)


def flow_in_xi(state: QState, alpha, t: float, tol: float = 1e-13) -> QState:
    """Move ``xi`` by ``t`` at fixed ``u``."""
    if t == 0:
        return state

    def field(p, y):
        return np.array([[q_flow_field(state.moved(q=_as_q(y[0], state.mode)), alpha)[0]]])

    y = ode_transport(field, PathInU.straight([0.0], [t]), np.array([state.q]), tol=tol)
    return state.moved(q=_as_q(y[0], state.mode))


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return 0.0 if scale == 0 else float(np.max(np.abs(a - b))) / scale


def _default_step(state: QState) -> float:
    walls = np.concatenate([[0.0, 1.0], state.u])
    gaps = np.diff(walls)
    if state.mode == "real":
        gaps = np.append(gaps, state.q.real - state.u[-1])
    return 3e-4 * min(1.0, float(np.min(gaps)))


def _tangent_in_u(state: QState, coeffs: np.ndarray, i: int):
    """Velocity of ``(q, coeffs)`` when ``u_i`` moves at fixed ``xi``."""
    m = connection_matrix(state.u, state.s, i)
    return q_flow_field(state, coeffs[:, 0])[1][i], m @ coeffs


def _move_u(state: QState, coeffs, i: int, t: float, along: str):
    """Point at parameter ``t`` on the flow in ``u_i`` or on its tangent line."""
    if along == "flow":
        return flow_in_u(state, coeffs, i, t)
    dq, dc = _tangent_in_u(state, coeffs, i)
    u = state.u.copy()
    u[i] += t
    return state.moved(q=_as_q(state.q + t * dq, state.mode), u=u), coeffs + t * dc


def _move_xi(state: QState, alpha, t: float, along: str) -> QState:
    if along == "flow":
        return flow_in_xi(state, alpha, t)
    return state.moved(q=_as_q(state.q + t * q_flow_field(state, alpha)[0], state.mode))


def _xi_step(state: QState, alpha, h: float) -> float:
    """Step in ``xi`` that moves ``q`` by about ``h`` (``q_xi`` can be tiny or huge)."""
    speed = abs(q_flow_field(state, alpha)[0])
    return h / speed if speed > 0 else h


def _u_step(state: QState, alpha, i: int, h: float) -> float:
    """Step in ``u_i`` capped so that ``q`` also moves by at most about ``h``."""
    return h / max(1.0, abs(q_flow_field(state, alpha)[1][i]))


def q_flow_involution_residual(state: QState, alpha, i: int, h: float | None = None,
                               along: str = "tangent") -> float:
    """Relative mismatch of ``d_u_i (q_xi)`` and ``d_xi (q_u_i)`` by finite differences.

    A derivative along a curve only depends on its velocity at the base
    point, so by default the stencil sits on the tangent line of each flow.
    ``along="flow"`` integrates the flows instead; its differences then also
    carry the integrator's step-to-step noise. The ``xi`` step is rescaled
    and the ``u`` steps capped so that ``q`` moves by about ``h``.
    """
    h = _default_step(state) if h is None else h
    alpha = np.asarray(alpha, dtype=complex).reshape(-1, 1)

    def q_xi_after_u(t):
        st, c = _move_u(state, alpha, i, t, along)
        return q_flow_field(st, c[:, 0])[0]

    def q_ui_after_xi(t):
        return q_flow_field(_move_xi(state, alpha[:, 0], t, along), alpha[:, 0])[1][i]

    hu = _u_step(state, alpha[:, 0], i, h)
    hx = _xi_step(state, alpha[:, 0], h)
    return _rel(fd_derivative(q_xi_after_u, 0.0, hu), fd_derivative(q_ui_after_xi, 0.0, hx))


def fg_involution_residual(state: QState, triple: SolutionTriple, i: int, j: int | None = None,
                          h: float | None = None, negate: bool = False, along: str = "tangent") -> float:
    """Mixed-partial mismatch of the ``f, g`` derivative fields.

    With ``j=None`` compares ``d_u_i (f_xi, g_xi)`` against
    ``d_xi (f_u_i, g_u_i)``; otherwise ``d_u_j`` of the ``u_i`` fields
    against ``d_u_i`` of the ``u_j`` fields. ``along`` is as in
    :func:`q_flow_involution_residual`.
    """
    h = _default_step(state) if h is None else h
    stack = triple.stack.T

    def fields(st, c):
        return fg_derivatives(st, SolutionTriple(*c.T), negate=negate)

    def after_u(k, t):
        return fields(*_move_u(state, stack, k, t, along))

    if j is None:
        hu = _u_step(state, triple.alpha, i, h)
        d1 = fd_derivative(lambda t: np.array([(jt := after_u(i, t)).f_xi, jt.g_xi]), 0.0, hu)

        def after_xi(t):
            jt = fields(_move_xi(state, triple.alpha, t, along), stack)
            return np.array([jt.f_u[i], jt.g_u[i]])

        d2 = fd_derivative(after_xi, 0.0, _xi_step(state, triple.alpha, h))
    else:
        d1 = fd_derivative(lambda t: np.array([(jt := after_u(j, t)).f_u[i], jt.g_u[i]]), 0.0,
                           _u_step(state, triple.alpha, j, h))
        d2 = fd_derivative(lambda t: np.array([(jt := after_u(i, t)).f_u[j], jt.g_u[j]]), 0.0,
                           _u_step(state, triple.alpha, i, h))
    return _rel(d1, d2)


def cross_check_AB(u, triple: SolutionTriple, s, q_samples, mode: str = "real") -> float:
    """Largest entrywise gap between extracted and assembled ``A, B``."""
    A1, B1, _ = extract_AB(u, triple, s, q_samples, mode=mode)
    A2, B2 = evolutionary_form(assemble_system(u, triple))
    return float(max(np.max(np.abs(A1 - A2)), np.max(np.abs(B1 - B2))))


__all__ = [
    "QState",
    "sample_q",
    "PseudoJet",
    "q_flow_field",
    "fg_derivatives",
    "extract_AB",
    "pseudo_compat_residual",
    "reconstruct_fg",
    "flow_in_u",
    "flow_in_xi",
    "q_flow_involution_residual",
    "fg_involution_residual",
    "cross_check_AB",
]
