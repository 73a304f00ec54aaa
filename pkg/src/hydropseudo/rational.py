"""The linear system for the coefficients of a degree-n polynomial phi.

For a chamber point ``u`` (``1 < u_1 < ... < u_n``) and exponents
``s = (s_1, ..., s_{n+2})`` the system reads ``d phi / d u_i = M_i(u) phi``
in the monomial coefficient basis. Indices are zero-based: ``s[0]`` is the
exponent at ``zeta = 0``, ``s[1]`` at ``zeta = 1`` and ``s[2 + i]`` at
``zeta = u[i]``.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ChamberError
from .polyode import (
    PathInU,
    Poly,
    chebyshev_nodes,
    fd_derivative,
    ode_transport,
    synthetic_division,
    poly_eval,
    poly_interp,
)

DEFAULT_GAP = 0.2


def validate_chamber(u, min_gap: float = 0.0) -> np.ndarray:
    """Return ``u`` as a float array after checking ``1 < u_1 < ... < u_n``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size < 1:
        raise ChamberError("empty parameter point")
    if not np.all(np.isfinite(u)):
        raise ChamberError(f"non-finite parameter point {u}")
    walls = np.concatenate([[0.0, 1.0], u])
    gaps = np.diff(walls)
    if np.any(gaps <= min_gap):
        raise ChamberError(f"{u.tolist()} is outside the chamber 0 < 1 < u_1 < ... < u_n")
    return u


def validate_exponents(s, n: int) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.size != n + 2:
        raise ValueError(f"expected {n + 2} exponents, got {s.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError("exponents must be finite")
    return s


def random_chamber_point(rng: np.random.Generator, n: int, gap: float = DEFAULT_GAP, spread: float = 1.5):
    """Sample ``1 < u_1 < ... < u_n`` with consecutive gaps in ``[gap, gap + spread]``."""
    steps = gap + spread * rng.random(n)
    return 1.0 + np.cumsum(steps)


def random_exponents(rng: np.random.Generator, n: int, lo: float = -2.0, hi: float = 2.0):
    return rng.uniform(lo, hi, size=n + 2)


def vandermonde_denominator(u: np.ndarray, i: int) -> float:
    """``u_i (u_i - 1) prod_{j != i} (u_i - u_j)``."""
    others = np.delete(u, i)
    return float(u[i] * (u[i] - 1.0) * np.prod(u[i] - others))


def _roots_and_exponents(u, s, i):
    roots = np.concatenate([[0.0, 1.0], np.delete(u, i)])
    exps = np.concatenate([s[:2], np.delete(s[2:], i)])
    return roots, exps


def _lin_rhs_real(u, s, i: int, c: np.ndarray) -> np.ndarray:
    """Exact-division right-hand side for a real coefficient vector ``c``.

    Carried out in ``longdouble``; the finite-difference curvature check
    amplifies rounding noise in ``M_i`` by ``~1/h``.
    """
    ld = np.longdouble
    n = len(u)
    size = n + 1
    uu = np.asarray(u, dtype=ld)
    ss = np.asarray(s, dtype=ld)
    ui = uu[i]
    roots = np.concatenate([np.array([0, 1], dtype=ld), np.delete(uu, i)])
    exps = np.concatenate([ss[:2], np.delete(ss[2:], i)])
    denom = ui * (ui - 1) * np.prod(ui - np.delete(uu, i))
    nprod = np.array([1], dtype=ld)
    for r in roots:
        nprod = np.convolve(nprod, np.array([-r, 1], dtype=ld))
    c = np.asarray(c, dtype=ld)
    phi_ui = ld(0)
    for ck in c[::-1]:
        phi_ui = phi_ui * ui + ck
    a = phi_ui / denom

    out = np.zeros(size, dtype=ld)
    if phi_ui != 0:
        for root, e in zip(roots, exps):
            if e == 1:
                continue
            quot, _ = synthetic_division(nprod, root)
            out += (e - 1) * quot
        out *= a
    # (a N_i - phi) / (z - u_i): the remainders of a N_i and phi are both
    # phi(u_i), so dividing separately and dropping them is exact
    q_n, _ = synthetic_division(nprod, ui)
    q_phi, _ = synthetic_division(np.pad(c, (0, size - len(c))), ui)
    out += ss[2 + i] * (a * q_n - np.pad(q_phi, (0, size - len(q_phi))))
    return out


def _connection_matrix_ld(u, s, i: int) -> np.ndarray:
    """``M_i`` in ``longdouble``, all columns at once.

    Column ``k`` (``phi = z**k``) is ``(u_i**k / D_i) v - s_{i+2} quot(z**k, u_i)``
    where ``v`` collects the pole terms divided against ``N_i``; the
    quotient matrix is upper triangular with entries ``u_i**(k-1-m)``.
    """
    ld = np.longdouble
    n = len(u)
    size = n + 1
    uu = np.asarray(u, dtype=ld)
    ss = np.asarray(s, dtype=ld)
    ui = uu[i]
    roots = np.concatenate([np.array([0, 1], dtype=ld), np.delete(uu, i)])
    exps = np.concatenate([ss[:2], np.delete(ss[2:], i)])
    denom = ui * (ui - 1) * np.prod(ui - np.delete(uu, i))
    nprod = np.array([1], dtype=ld)
    for r in roots:
        nprod = np.convolve(nprod, np.array([-r, 1], dtype=ld))
    vec = ss[2 + i] * synthetic_division(nprod, ui)[0]
    for root, e in zip(roots, exps):
        if e != 1:
            vec = vec + (e - 1) * synthetic_division(nprod, root)[0]
    powers = ui ** np.arange(size, dtype=ld)
    m_idx, k_idx = np.indices((size, size))
    quot = np.where(m_idx < k_idx, ui ** np.maximum(k_idx - 1 - m_idx, 0).astype(ld), ld(0))
    return np.outer(vec, powers / denom) - ss[2 + i] * quot


def lin_rhs(u, s, i: int, phi: Poly) -> Poly:
    """Right-hand side of the linear system applied to ``phi`` (exact division).

    Every simple-pole term ``(s_r - 1) / (z - r)`` is cancelled against a
    factor of ``N_i(z) = z (z - 1) prod_{j != i} (z - u_j)`` (degree ``n+1``)
    and the remaining term ``(phi(u_i) N_i / D_i - phi) / (z - u_i)`` is
    divided synthetically. The result has degree at most ``n``.
    """
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    c = phi.padded(len(u) + 1)
    re = _lin_rhs_real(u, s, i, c.real)
    im = _lin_rhs_real(u, s, i, c.imag) if np.any(c.imag) else 0.0
    return Poly(re.astype(float) + 1j * np.asarray(im, dtype=float))


def lin_rhs_pointwise(u, s, i: int, phi: Poly, z):
    """The same right-hand side evaluated as a rational function at ``z``."""
    roots, exps = _roots_and_exponents(u, s, i)
    denom = vandermonde_denominator(u, i)
    z = np.asarray(z, dtype=complex)
    p = np.prod([z - r for r in roots], axis=0) / denom
    poles = sum((e - 1.0) / (z - r) for r, e in zip(roots, exps)) + s[2 + i] / (z - u[i])
    return poly_eval(phi, u[i]) * p * poles - s[2 + i] * poly_eval(phi, z) / (z - u[i])


def connection_matrix(u, s, i: int, mode: str = "exact", interval=(0.1, 0.9)) -> np.ndarray:
    """``(n+1) x (n+1)`` matrix ``M_i`` with ``d phi / d u_i = M_i phi``.

    Column ``k`` holds the coefficients of the right-hand side for
    ``phi = zeta**k``. ``mode="exact"`` builds all columns at once in
    extended precision, ``mode="columns"`` applies :func:`lin_rhs` to each
    basis monomial, and ``mode="interp"`` samples the rational right-hand
    side at Chebyshev nodes in ``interval`` (which must avoid ``0, 1, u_j``)
    and interpolates. The last two are cross-checks.
    """
    u = validate_chamber(u)
    n = len(u)
    s = validate_exponents(s, n)
    if not 0 <= i < n:
        raise IndexError(f"direction {i} out of range for n={n}")
    size = n + 1
    mat = np.zeros((size, size), dtype=complex)
    if mode == "exact":
        mat[:] = _connection_matrix_ld(u, s, i).astype(float)
    elif mode == "columns":
        for k in range(size):
            e = np.zeros(size)
            e[k] = 1.0
            mat[:, k] = lin_rhs(u, s, i, Poly(e)).coeffs
    elif mode == "interp":
        nodes = chebyshev_nodes(size, *interval)
        for k in range(size):
            e = np.zeros(size)
            e[k] = 1.0
            vals = lin_rhs_pointwise(u, s, i, Poly(e), nodes)
            mat[:, k] = poly_interp(zip(nodes, vals)).padded(size)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return mat


def connection_matrices(u, s, mode: str = "exact") -> list[np.ndarray]:
    return [connection_matrix(u, s, i, mode=mode) for i in range(len(u))]


def zero_curvature_residual(u, s, i: int, j: int, h: float | None = None, s_j=None) -> float:
    """Max-norm of ``d_j M_i - d_i M_j + [M_i, M_j]`` at ``u``.

    Partials come from :func:`fd_derivative`. ``s_j`` optionally builds
    ``M_j`` (and its derivative) from different exponents; this breaks the
    connection and is used as a negative control.
    """
    if i == j:
        return 0.0
    u = validate_chamber(u)
    s = validate_exponents(s, len(u))
    s_j = s if s_j is None else validate_exponents(s_j, len(u))
    hi = 1e-5 * max(1.0, abs(u[i])) if h is None else h
    hj = 1e-5 * max(1.0, abs(u[j])) if h is None else h
    for k, step in ((i, hi), (j, hj)):
        for off in (-2 * step, 2 * step):
            shifted = u.copy()
            shifted[k] += off
            validate_chamber(shifted)

    ld = np.longdouble
    u_ld = u.astype(ld)

    def mat(v, ss, k):
        return _connection_matrix_ld(v, ss, k)

    def shifted(k, t):
        v = u_ld.copy()
        v[k] += t
        return v

    mi = mat(u_ld, s, i)
    mj = mat(u_ld, s_j, j)
    dj_mi = fd_derivative(lambda t: mat(shifted(j, t), s, i), ld(0), ld(hj))
    di_mj = fd_derivative(lambda t: mat(shifted(i, t), s_j, j), ld(0), ld(hi))
    curv = dj_mi - di_mj + mi @ mj - mj @ mi
    return float(np.max(np.abs(curv)))


def _check_path(path: PathInU):
    for w in path.waypoints:
        validate_chamber(w)


def transport(u0, u1, s, y0, path: PathInU | None = None, tol: float = 1e-11) -> np.ndarray:
    """Carry coefficient vector(s) ``y0`` (shape ``(n+1,)`` or ``(n+1, k)``) from ``u0`` to ``u1``."""
    u0 = validate_chamber(u0)
    u1 = validate_chamber(u1)
    s = validate_exponents(s, len(u0))
    if path is None:
        path = PathInU.straight(u0, u1)
    if not (np.allclose(path.waypoints[0], u0, rtol=0, atol=1e-14)
            and np.allclose(path.waypoints[-1], u1, rtol=0, atol=1e-14)):
        raise ValueError("path endpoints do not match u0, u1")
    _check_path(path)

    def field(p, y):
        return np.stack([m @ y for m in connection_matrices(p, s)])

    return ode_transport(field, path, y0, tol=tol)


def transport_basis(u0, u1, s, path: PathInU | None = None, tol: float = 1e-11) -> np.ndarray:
    """Fundamental matrix: column ``k`` is the transport of basis vector ``e_k``."""
    n = len(np.atleast_1d(u0))
    return transport(u0, u1, s, np.eye(n + 1, dtype=complex), path=path, tol=tol)
