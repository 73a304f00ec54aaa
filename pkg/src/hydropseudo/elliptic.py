"""Elliptic family: theta-function sections and the systems they generate.

``theta`` is the odd-type theta function with ``theta(z + 1) = theta(z)``,
``theta(z + tau) = -exp(-2 pi i z) theta(z)`` and its only lattice zero at
``z = 0``. Solutions of the linear system are sections of
``Theta_{n, c}`` with ``c = sum(u) - eta`` and are spanned by the explicit
products ``psi_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import HydroSystemN, numerical_rank
from .exceptions import SingularPointError, ThetaTruncationError
from .polyode import PathInU, fd_derivative, ode_transport

TWO_PI_I = 2j * np.pi


@dataclass(frozen=True)
class ThetaCtx:
    """Lattice parameter ``tau`` and series truncation.

    With ``truncation=None`` the smallest ``M`` is chosen for which the first
    omitted term of the reduced-strip series is below ``tol`` relative to
    the largest kept one; ``M`` above ``max_truncation`` is an error.
    """

    tau: complex = 1j
    truncation: int | None = None
    tol: float = 1e-17
    max_truncation: int = 40
    min_im_tau: float = 0.3
    M: int = field(init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau.imag > 0:
            raise ValueError("tau must lie in the upper half plane")
        if tau.imag < self.min_im_tau:
            raise ValueError(f"Im(tau) = {tau.imag} is below the supported minimum {self.min_im_tau}")
        needed = self.required_truncation()
        if needed > self.max_truncation:
            raise ThetaTruncationError(f"tolerance {self.tol} needs M = {needed} > {self.max_truncation}")
        if self.truncation is not None and self.truncation < needed:
            raise ThetaTruncationError(f"truncation {self.truncation} misses tolerance {self.tol} (needs {needed})")
        object.__setattr__(self, "M", needed if self.truncation is None else int(self.truncation))

    def required_truncation(self) -> int:
        # in the strip |Im z| <= Im(tau)/2 the m-th term is bounded by
        # exp(-pi Im(tau) (m^2 - 2|m|)) while the m = 1 term reaches exp(pi Im(tau))
        t = self.tau.imag
        largest = np.pi * t
        for m in range(1, 10_000):
            k = m + 1
            if -np.pi * t * (k * k - 2 * k) - largest < np.log(self.tol):
                return m
        return 10_000


def _reduce(z, tau):
    """``z = z0 + k tau + r`` with ``|Im z0| <= Im(tau)/2`` and ``|Re z0| <= 1/2``-ish."""
    k = np.round(z.imag / tau.imag)
    z1 = z - k * tau
    z0 = z1 - np.round(z1.real)
    return z0, k


def theta(z, ctx: ThetaCtx, derivative: bool = False):
    """``theta(z)`` (and ``theta'(z)`` when ``derivative``), vectorised over ``z``.

    The argument is first reduced to the fundamental strip; the
    quasi-periodicity multiplier ``(-1)^k exp(-2 pi i (k z0 + k(k-1) tau / 2))``
    is then re-applied exactly.
    """
    z = np.asarray(z, dtype=complex)
    tau = ctx.tau
    z0, k = _reduce(z, tau)
    m = np.arange(-ctx.M, ctx.M + 1)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    expo = TWO_PI_I * (np.multiply.outer(z0, m) + m * (m - 1) * tau / 2)
    terms = sign * np.exp(expo)
    th0 = terms.sum(axis=-1)
    mult = np.where(k % 2 == 0, 1.0, -1.0) * np.exp(-TWO_PI_I * (k * z0 + k * (k - 1) * tau / 2))
    val = mult * th0
    if not derivative:
        return val[()] if val.ndim == 0 else val
    d0 = (terms * (TWO_PI_I * m)).sum(axis=-1)
    der = mult * (d0 - TWO_PI_I * k * th0)
    if val.ndim == 0:
        return val[()], der[()]
    return val, der


def lattice_distance(z, tau) -> float:
    """Distance from ``z`` to the lattice ``Z + tau Z``."""
    tau = complex(tau)
    z0, _ = _reduce(np.asarray(z, dtype=complex), tau)
    best = np.inf
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            best = np.minimum(best, np.abs(z0 - a - b * tau))
    return float(np.max(best)) if np.ndim(best) == 0 else best


def theta_space_member(f, n: int, c, ctx: ThetaCtx, grid=None) -> float:
    """How far ``f`` is from ``Theta_{n, c}``.

    Returns ``max |f(z+1) - f(z)|`` and ``max |f(z+tau) - (-1)^n e^{-2 pi i (n z - c)} f(z)|``
    over the grid, divided by the largest magnitude involved.
    """
    if grid is None:
        grid = default_grid(ctx)
    z = np.asarray(grid, dtype=complex)
    fz = np.asarray(f(z), dtype=complex)
    f1 = np.asarray(f(z + 1.0), dtype=complex)
    ft = np.asarray(f(z + ctx.tau), dtype=complex)
    mult = (-1) ** n * np.exp(-TWO_PI_I * (n * z - c))
    scale = max(np.max(np.abs(fz)), np.max(np.abs(f1)), np.max(np.abs(ft)), np.max(np.abs(mult * fz)))
    if scale == 0:
        return 0.0
    return float(max(np.max(np.abs(f1 - fz)), np.max(np.abs(ft - mult * fz))) / scale)


def default_grid(ctx: ThetaCtx, size: int = 7) -> np.ndarray:
    """Points spread over the fundamental cell, offset from its corners."""
    a = (np.arange(size) + 0.37) / size
    b = (np.arange(size) + 0.61) / size - 0.5
    return (a[:, None] + b[None, :] * ctx.tau).reshape(-1)


@dataclass(frozen=True)
class EllipticPoint:
    u: np.ndarray
    eta: complex = 0.17 + 0.11j

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=complex).reshape(-1))
        object.__setattr__(self, "eta", complex(self.eta))

    @property
    def n(self) -> int:
        return len(self.u)

    def check(self, ctx: ThetaCtx, min_dist: float = 1e-2) -> "EllipticPoint":
        if lattice_distance(self.eta, ctx.tau) < min_dist:
            raise SingularPointError(f"eta = {self.eta} is too close to the lattice")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if lattice_distance(self.u[i] - self.u[j], ctx.tau) < min_dist:
                    raise SingularPointError(f"u[{i}] - u[{j}] is too close to the lattice")
        return self

    def shifted(self, i: int, t) -> "EllipticPoint":
        u = self.u.copy()
        u[i] += t
        return EllipticPoint(u, self.eta)

    def translated(self, v) -> "EllipticPoint":
        return EllipticPoint(self.u + v, self.eta)


def random_elliptic_point(rng: np.random.Generator, n: int, ctx: ThetaCtx, eta=0.17 + 0.11j,
                          min_dist: float = 0.05, max_tries: int = 1000) -> EllipticPoint:
    """Uniform ``u_i`` in the fundamental cell, rejecting near-lattice differences."""
    for _ in range(max_tries):
        u = rng.random(n) + (rng.random(n) - 0.5) * ctx.tau
        pt = EllipticPoint(u, eta)
        try:
            return pt.check(ctx, min_dist)
        except SingularPointError:
            continue
    raise SingularPointError("could not sample an admissible elliptic point")


@dataclass(frozen=True)
class EllipticTriple:
    """Constant coefficients of ``phi, phi1, phi2`` in the basis ``psi_1..psi_n``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex).reshape(-1))
        if not len(self.alpha) == len(self.beta) == len(self.gamma):
            raise ValueError("triple members must have equal length")

    @property
    def stack(self) -> np.ndarray:
        return np.vstack([self.alpha, self.beta, self.gamma])

    def rank(self) -> int:
        return numerical_rank(self.stack)[0]

    @classmethod
    def standard(cls, n: int) -> "EllipticTriple":
        e = np.eye(n)
        return cls(e[0], e[1], e[2])

    @classmethod
    def random(cls, rng: np.random.Generator, n: int) -> "EllipticTriple":
        return cls(*rng.normal(size=(3, n)))


def psi_basis(zeta, pt: EllipticPoint, ctx: ThetaCtx, eta=None, derivative: bool = False):
    """``psi_i(zeta) = prod_{j != i} theta(zeta - u_j) * theta(zeta - u_i + eta)``.

    Output has shape ``(n,) + shape(zeta)``; with ``derivative`` a pair
    ``(values, zeta-derivatives)`` is returned.
    """
    eta = pt.eta if eta is None else complex(eta)
    z = np.asarray(zeta, dtype=complex)
    diff = z[None, ...] - pt.u.reshape((-1,) + (1,) * z.ndim)
    th, dth = theta(diff, ctx, derivative=True)
    sh, dsh = theta(diff + eta, ctx, derivative=True)
    n = pt.n
    vals = []
    ders = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        prod = np.prod(th[others], axis=0) if others else np.ones_like(z)
        vals.append(prod * sh[i])
        if derivative:
            d = dsh[i] * prod
            for j in others:
                rest = [k for k in others if k != j]
                d = d + dth[j] * (np.prod(th[rest], axis=0) if rest else 1.0) * sh[i]
            ders.append(d)
    vals = np.array(vals)
    return (vals, np.array(ders)) if derivative else vals


def phi_values(zeta, coeff, pt: EllipticPoint, ctx: ThetaCtx, eta=None, derivative: bool = False):
    """``sum_k coeff_k psi_k(zeta)`` (and its zeta-derivative)."""
    coeff = np.asarray(coeff, dtype=complex)
    if derivative:
        v, d = psi_basis(zeta, pt, ctx, eta, derivative=True)
        return np.tensordot(coeff, v, axes=1), np.tensordot(coeff, d, axes=1)
    return np.tensordot(coeff, psi_basis(zeta, pt, ctx, eta), axes=1)


def _prod_others(pt: EllipticPoint, i: int, ctx: ThetaCtx) -> complex:
    others = np.delete(pt.u, i)
    return complex(np.prod(theta(pt.u[i] - others, ctx))) if others.size else 1.0 + 0j


def linell_rhs(zeta, pt: EllipticPoint, coeff, i: int, ctx: ThetaCtx, eta=None):
    """Right-hand side of ``d phi / d u_i`` for ``phi = sum coeff_k psi_k``.

    ``eta`` only changes the basis used to build ``phi``; the equation
    itself always uses ``pt.eta``.
    """
    z = np.asarray(zeta, dtype=complex)
    e = pt.eta
    phi_z = phi_values(z, coeff, pt, ctx, eta)
    phi_ui = phi_values(pt.u[i], coeff, pt, ctx, eta)
    others = np.delete(pt.u, i)
    prod_z = np.prod(theta(z[None, ...] - others.reshape((-1,) + (1,) * z.ndim), ctx), axis=0) if others.size else 1.0
    a, da = theta(z - pt.u[i], ctx, derivative=True)
    b, db = theta(z - pt.u[i] + e, ctx, derivative=True)
    log_a = da / a
    front = phi_ui * prod_z / _prod_others(pt, i, ctx) * b / theta(e, ctx)
    return front * (log_a - db / b) - log_a * phi_z


def linell_residual(pt: EllipticPoint, coeff, i: int, ctx: ThetaCtx, h: float = 1e-4, zetas=None, eta=None) -> float:
    """FD ``u_i``-derivative of ``phi`` (constant coefficients) against the linear system.

    ``zetas`` default to an off-lattice grid; the result is the max mismatch
    divided by the largest magnitude of either side.
    """
    coeff = np.asarray(coeff, dtype=complex)
    if not np.any(coeff):
        return 0.0
    pt.check(ctx)
    z = default_grid(ctx, 5) + 0.013 if zetas is None else np.asarray(zetas, dtype=complex)
    for t in (-2 * h, 2 * h):
        pt.shifted(i, t).check(ctx)
    fd = fd_derivative(lambda t: phi_values(z, coeff, pt.shifted(i, t), ctx, eta), 0.0, h)
    rhs = linell_rhs(z, pt, coeff, i, ctx, eta)
    scale = max(float(np.max(np.abs(fd))), float(np.max(np.abs(rhs))))
    return 0.0 if scale == 0 else float(np.max(np.abs(fd - rhs)) / scale)


def collocation_matrix(zetas, pt: EllipticPoint, ctx: ThetaCtx) -> np.ndarray:
    """Rows ``psi_i(zeta_k)``, each row scaled to unit max-norm."""
    m = psi_basis(np.asarray(zetas, dtype=complex), pt, ctx).T
    return m / np.max(np.abs(m), axis=1, keepdims=True)


# bilinears ---------------------------------------------------------------

def _pair_values(zeta, pt, triple, ctx, derivative=False):
    out = [phi_values(zeta, c, pt, ctx, derivative=derivative) for c in (triple.alpha, triple.beta, triple.gamma)]
    return out


def elliptic_bilinears(zeta, pt: EllipticPoint, triple: EllipticTriple, ctx: ThetaCtx,
                       limit: bool = False, pole_tol: float = 1e-9):
    """Values ``(theta_i, nu_i, mu_i)`` at ``zeta``, each a length-``n`` array.

    The ``i``-th entries carry the factor
    ``K_i = theta(zeta - u_i + eta) / (theta(eta) theta(zeta - u_i) prod_{j != i} theta(u_i - u_j))``
    times ``phi2(u_i) phi1 - phi1(u_i) phi2``, ``phi(u_i) phi2 - phi2(u_i) phi`` and
    ``phi1(u_i) phi - phi(u_i) phi1`` respectively. At ``zeta`` within
    ``pole_tol`` of a lattice translate of ``u_i`` the removable limit is
    taken when ``limit`` is set; otherwise :class:`SingularPointError`.
    """
    zeta = complex(zeta)
    n = pt.n
    te = theta(pt.eta, ctx)
    ph, ph1, ph2 = (complex(v) for v in _pair_values(zeta, pt, triple, ctx))
    at_u = [phi_values(pt.u, c, pt, ctx) for c in (triple.alpha, triple.beta, triple.gamma)]
    th_out = np.empty(n, dtype=complex)
    nu_out = np.empty(n, dtype=complex)
    mu_out = np.empty(n, dtype=complex)
    for i in range(n):
        a, a1, a2 = at_u[0][i], at_u[1][i], at_u[2][i]
        pi = _prod_others(pt, i, ctx)
        if lattice_distance(zeta - pt.u[i], ctx.tau) < pole_tol:
            if not limit:
                raise SingularPointError(f"zeta = {zeta} sits on the pole at u[{i}]")
            # numerator vanishes at u_i; K_i ~ 1 / (theta'(0) pi (zeta - u_i))
            _, dth0 = theta(0.0, ctx, derivative=True)
            (d, d1, d2) = (complex(v[1]) for v in _pair_values(pt.u[i], pt, triple, ctx, derivative=True))
            w = 1.0 / (dth0 * pi)
            th_out[i] = w * (a2 * d1 - a1 * d2)
            nu_out[i] = w * (a * d2 - a2 * d)
            mu_out[i] = w * (a1 * d - a * d1)
            continue
        k = theta(zeta - pt.u[i] + pt.eta, ctx) / (te * theta(zeta - pt.u[i], ctx) * pi)
        th_out[i] = k * (a2 * ph1 - a1 * ph2)
        nu_out[i] = k * (a * ph2 - a2 * ph)
        mu_out[i] = k * (a1 * ph - a * ph1)
    return th_out, nu_out, mu_out


def elliptic_bilinears_grid(zetas, pt: EllipticPoint, triple: EllipticTriple, ctx: ThetaCtx,
                            pole_tol: float = 1e-9) -> np.ndarray:
    """Vectorized :func:`elliptic_bilinears` away from the poles.

    Returns shape ``(3, n) + shape(zetas)``; raises :class:`SingularPointError`
    if any ``zeta`` is within ``pole_tol`` of a translate of some ``u_i``.
    """
    z = np.asarray(zetas, dtype=complex)
    n = pt.n
    col = (-1,) + (1,) * z.ndim
    diff = z[None, ...] - pt.u.reshape(col)
    if np.any(lattice_distance(diff, ctx.tau) < pole_tol):
        raise SingularPointError("a zeta sits on a pole")
    ph, ph1, ph2 = (v[None, ...] for v in _pair_values(z, pt, triple, ctx))
    a, a1, a2 = (phi_values(pt.u, c, pt, ctx).reshape(col) for c in (triple.alpha, triple.beta, triple.gamma))
    pi = np.array([_prod_others(pt, i, ctx) for i in range(n)]).reshape(col)
    k = theta(diff + pt.eta, ctx) / (theta(pt.eta, ctx) * theta(diff, ctx) * pi)
    return np.stack([k * (a2 * ph1 - a1 * ph2), k * (a * ph2 - a2 * ph), k * (a1 * ph - a * ph1)])


def exell_coefficients(pt: EllipticPoint, ctx: ThetaCtx) -> np.ndarray:
    """``c[i, j] = theta(u_j - u_i + eta) / theta(u_j - u_i)`` (zero diagonal)."""
    n = pt.n
    c = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j:
                d = pt.u[j] - pt.u[i]
                den = theta(d, ctx)
                if abs(den) < 1e-14:
                    raise SingularPointError(f"u[{j}] - u[{i}] is on the lattice")
                c[i, j] = theta(d + pt.eta, ctx) / den
    return c


def assemble_exell(pt: EllipticPoint, triple: EllipticTriple, ctx: ThetaCtx) -> HydroSystemN:
    """Equation ``j``: ``sum_{i != j} c_ij (w_ij^t (u_it - u_jt) + w_ij^x (...) + w_ij^y (...)) = 0``.

    The bilinear constants are ``w^t = gamma_i alpha_j - gamma_j alpha_i``,
    ``w^x = alpha_i beta_j - alpha_j beta_i`` and ``w^y = beta_i gamma_j - beta_j gamma_i``.
    Expanding the differences puts minus the row sum on the diagonal.
    """
    n = pt.n
    if n < 3:
        raise ValueError("the elliptic system needs n >= 3")
    pt.check(ctx)
    c = exell_coefficients(pt, ctx)
    al, be, ga = triple.alpha, triple.beta, triple.gamma
    T = np.zeros((n, n, 3), dtype=complex)
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            w = (ga[i] * al[j] - ga[j] * al[i], al[i] * be[j] - al[j] * be[i], be[i] * ga[j] - be[j] * ga[i])
            for d in range(3):
                T[j, i, d] += c[i, j] * w[d]
                T[j, j, d] -= c[i, j] * w[d]
    return HydroSystemN(T)


def trivial_system_n3() -> HydroSystemN:
    """``u_1t = u_3t``, ``u_2x = u_1x``, ``u_2y = u_3y``."""
    T = np.zeros((3, 3, 3))
    T[0, 0, 0], T[0, 2, 0] = 1, -1
    T[1, 1, 1], T[1, 0, 1] = 1, -1
    T[2, 1, 2], T[2, 2, 2] = 1, -1
    return HydroSystemN(T)


def trivial_reduction_determinant(pt: EllipticPoint, ctx: ThetaCtx) -> complex:
    """Determinant deciding whether the standard-basis ``n = 3`` system is the trivial one.

    In the variables ``u_1t - u_3t``, ``u_2x - u_1x``, ``u_3y - u_2y`` the three
    equations have matrix ``[[c31, c21, 0], [0, c12, c32], [c13, 0, c23]]``.
    """
    c = exell_coefficients(pt, ctx)
    m = np.array([[c[2, 0], c[1, 0], 0], [0, c[0, 1], c[2, 1]], [c[0, 2], 0, c[1, 2]]])
    return complex(np.linalg.det(m))


def exell_kernel(pt: EllipticPoint, triple: EllipticTriple, ctx: ThetaCtx) -> np.ndarray:
    """Orthonormal kernel basis (columns, stacked ``(u_t, u_x, u_y)``)."""
    return assemble_exell(pt, triple, ctx).kernel()


def elliptic_compat_residual(pt: EllipticPoint, triple: EllipticTriple, ux, uy, ut, zetas, ctx: ThetaCtx) -> float:
    """``max |sum nu_i u_it + mu_i u_ix + theta_i u_iy|`` over samples, normalised.

    No projection is applied: derivative vectors outside the kernel give
    a large residual.
    """
    ux, uy, ut = (np.asarray(v, dtype=complex)[:, None] for v in (ux, uy, ut))
    th, nu, mu = elliptic_bilinears_grid(np.atleast_1d(zetas), pt, triple, ctx)
    terms = np.concatenate([nu * ut, mu * ux, th * uy])
    scale = float(np.max(np.abs(terms)))
    return 0.0 if scale == 0 else float(np.max(np.abs(terms.sum(axis=0)))) / scale


def random_zetas(rng: np.random.Generator, pt: EllipticPoint, ctx: ThetaCtx, count: int,
                 min_dist: float = 0.05) -> np.ndarray:
    out = []
    while len(out) < count:
        z = rng.random() + (rng.random() - 0.5) * ctx.tau
        if min(lattice_distance(z - ui, ctx.tau) for ui in pt.u) >= min_dist:
            out.append(z)
    return np.array(out)


# pseudopotential ---------------------------------------------------------

def sample_flow_points(rng: np.random.Generator, pt: EllipticPoint, alpha, ctx: ThetaCtx, count: int,
                       rel_margin: float = 0.1, max_tries: int = 10_000) -> np.ndarray:
    """Random ``q`` off the poles where ``|phi(q)|`` is at least ``rel_margin`` of its grid median."""
    ref = float(np.median(np.abs(phi_values(default_grid(ctx), alpha, pt, ctx))))
    out = []
    for _ in range(max_tries):
        q = random_zetas(rng, pt, ctx, 1)[0]
        if abs(phi_values(q, alpha, pt, ctx)) >= rel_margin * ref:
            out.append(q)
            if len(out) == count:
                return np.array(out)
    raise SingularPointError("no admissible flow point found")


@dataclass(frozen=True)
class EllipticPseudoFields:
    q_xi: complex
    q_u: np.ndarray
    f_xi: complex
    g_xi: complex
    f_u: np.ndarray
    g_u: np.ndarray
    ps1_residual: float


def _phi_nonzero(val, q):
    if abs(val) < 1e-12:
        raise SingularPointError(f"phi vanishes at q = {q}")
    return val


def elliptic_q_flow(q, pt: EllipticPoint, alpha, ctx: ThetaCtx):
    """``(q_xi, q_u)`` of the elliptic spectral-parameter flow."""
    q = complex(q)
    n = pt.n
    if min(lattice_distance(q - ui, ctx.tau) for ui in pt.u) < 1e-9:
        raise SingularPointError(f"q = {q} hits a lattice translate of some u_i")
    ph = _phi_nonzero(complex(phi_values(q, alpha, pt, ctx)), q)
    thq = theta(q - pt.u, ctx)
    q_xi = complex(np.prod(thq)) / ph
    phi_u = phi_values(pt.u, alpha, pt, ctx)
    te = theta(pt.eta, ctx)
    q_u = np.empty(n, dtype=complex)
    for i in range(n):
        rest = np.prod(np.delete(thq, i))
        q_u[i] = phi_u[i] / ph * rest / _prod_others(pt, i, ctx) * theta(q - pt.u[i] + pt.eta, ctx) / te
    return q_xi, q_u


def elliptic_pseudo_fields(q, pt: EllipticPoint, triple: EllipticTriple, ctx: ThetaCtx) -> EllipticPseudoFields:
    """q-flow and ``f, g`` derivative fields at ``q``.

    ``f_u = -mu(q)/phi(q)``, ``g_u = nu(q)/phi(q)``; the attached residual
    compares ``f_xi g_u - g_xi f_u`` with ``-theta_i(q)/phi(q)``.
    """
    q = complex(q)
    q_xi, q_u = elliptic_q_flow(q, pt, triple.alpha, ctx)
    ph, ph1, ph2 = (complex(v) for v in _pair_values(q, pt, triple, ctx))
    th, nu, mu = elliptic_bilinears(q, pt, triple, ctx)
    f_xi, g_xi = ph1 / ph, ph2 / ph
    f_u, g_u = -mu / ph, nu / ph
    lhs1, lhs2, rhs = f_xi * g_u, g_xi * f_u, -th / ph
    scale = np.maximum.reduce([np.abs(lhs1), np.abs(lhs2), np.abs(rhs)])
    mism = np.abs(lhs1 - lhs2 - rhs)
    rel = np.where(scale > 0, mism / np.where(scale > 0, scale, 1.0), 0.0)
    return EllipticPseudoFields(q_xi, q_u, f_xi, g_xi, f_u, g_u, float(np.max(rel)))


def _flow(field_fn, q0, t, tol):
    if t == 0:
        return complex(q0)
    y = ode_transport(lambda p, y: np.array([[field_fn(p[0], y[0])]]), PathInU.straight([0.0], [t]),
                      np.array([q0], dtype=complex), tol=tol)
    return complex(y[0])


def parell_involution_residual(q, pt: EllipticPoint, alpha, i: int, ctx: ThetaCtx,
                               h: float = 1e-4, tol: float = 1e-13, along: str = "tangent") -> float:
    """Relative mismatch of ``d_u_i (q_xi)`` and ``d_xi (q_u_i)``.

    Along ``u_i`` the coefficients of ``phi`` stay fixed (the basis
    ``psi`` is an explicit solution) and ``q`` follows ``q_u_i``. The
    stencils sit on the tangent lines of the two flows unless
    ``along="flow"``; steps are rescaled so that ``q`` moves by about ``h``.
    """
    alpha = np.asarray(alpha, dtype=complex)
    q = complex(q)
    q_xi0, q_u0 = elliptic_q_flow(q, pt, alpha, ctx)
    hu = h / max(1.0, abs(q_u0[i]))
    hx = h / abs(q_xi0) if q_xi0 != 0 else h

    def q_xi_after_u(t):
        if along == "flow":
            qt = _flow(lambda s, y: elliptic_q_flow(y, pt.shifted(i, s), alpha, ctx)[1][i], q, t, tol)
        else:
            qt = q + t * q_u0[i]
        return elliptic_q_flow(qt, pt.shifted(i, t), alpha, ctx)[0]

    def q_ui_after_xi(t):
        if along == "flow":
            qt = _flow(lambda s, y: elliptic_q_flow(y, pt, alpha, ctx)[0], q, t, tol)
        else:
            qt = q + t * q_xi0
        return elliptic_q_flow(qt, pt, alpha, ctx)[1][i]

    d1 = fd_derivative(q_xi_after_u, 0.0, hu)
    d2 = fd_derivative(q_ui_after_xi, 0.0, hx)
    scale = max(abs(d1), abs(d2))
    return 0.0 if scale == 0 else float(abs(d1 - d2) / scale)
