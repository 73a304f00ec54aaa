"""Polynomial kernel, path transport and finite differences.

Everything here works on complex scalars so the rational and elliptic
families share one numeric core.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import InterpolationError, TransportError

__all__ = [
    "Poly",
    "PathInU",
    "poly_eval",
    "poly_div_linear",
    "synthetic_division",
    "poly_interp",
    "poly_from_roots",
    "chebyshev_nodes",
    "ode_transport",
    "fd_derivative",
]


@dataclass(frozen=True, eq=False)
class Poly:
    """Dense univariate polynomial; ``coeffs[k]`` multiplies ``zeta**k``.

    ``degree`` is the declared degree (``len(coeffs) - 1``); the leading
    coefficient may vanish when the producer only guarantees a degree bound.
    The zero-length polynomial (degree -1) is the empty quotient of a
    constant divided by a linear factor.
    """

    coeffs: np.ndarray

    def __init__(self, coeffs):
        arr = np.array(coeffs, dtype=complex).reshape(-1)
        object.__setattr__(self, "coeffs", arr)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return poly_eval(self, z)

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()!r})"

    def padded(self, length: int) -> np.ndarray:
        """Coefficient vector zero-padded (never truncated) to ``length``."""
        if length < len(self.coeffs):
            raise ValueError("cannot pad to a shorter length")
        out = np.zeros(length, dtype=complex)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly([other])
        m = max(len(self), len(other))
        return Poly(self.padded(m) + other.padded(m))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-self.coeffs)

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly([other])
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Poly):
            if len(self) == 0 or len(other) == 0:
                return Poly([])
            return Poly(np.convolve(self.coeffs, other.coeffs))
        return Poly(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Poly(self.coeffs / scalar)


def poly_eval(p: Poly, z):
    """Horner evaluation; ``z`` may be a scalar or an array."""
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in p.coeffs[::-1]:
        acc = acc * z + c
    return acc[()] if acc.ndim == 0 else acc


def synthetic_division(coeffs: np.ndarray, root):
    """Divide an ascending coefficient array by ``(z - root)``.

    Works in the dtype of ``coeffs`` (extended precision included) and
    returns ``(quotient_coeffs, remainder)``.
    """
    d = len(coeffs) - 1
    if d < 0:
        return coeffs[:0].copy(), coeffs.dtype.type(0)
    q = np.zeros(d, dtype=coeffs.dtype)
    acc = coeffs.dtype.type(0)
    for k in range(d, 0, -1):
        acc = acc * root + coeffs[k]
        q[k - 1] = acc
    return q, acc * root + coeffs[0]


def poly_div_linear(p: Poly, root) -> tuple[Poly, complex]:
    """Synthetic division ``p(z) = (z - root) q(z) + r``.

    Returns the quotient and the scalar remainder. A constant input yields
    the empty quotient.
    """
    q, rem = synthetic_division(p.coeffs, complex(root))
    return Poly(q), complex(rem)


def poly_from_roots(roots: Sequence, lead=1.0) -> Poly:
    out = Poly([lead])
    for r in roots:
        out = out * Poly([-r, 1.0])
    return out


def chebyshev_nodes(count: int, lo: float, hi: float) -> np.ndarray:
    """First-kind Chebyshev points mapped into ``(lo, hi)``."""
    k = np.arange(count)
    x = np.cos((2 * k + 1) * np.pi / (2 * count))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x


def poly_interp(samples) -> Poly:
    """Interpolating polynomial through ``(z, value)`` pairs.

    Newton divided differences, then nested expansion to monomial
    coefficients. Raises :class:`InterpolationError` on repeated abscissae.
    """
    pts = list(samples)
    z = np.array([s[0] for s in pts], dtype=complex)
    y = np.array([s[1] for s in pts], dtype=complex)
    m = len(z)
    if m == 0:
        raise InterpolationError("no samples")
    scale = max(1.0, float(np.max(np.abs(z))))
    for i in range(m):
        for j in range(i + 1, m):
            if abs(z[i] - z[j]) <= 1e-14 * scale:
                raise InterpolationError(f"duplicate abscissa {z[i]}")
    dd = y.copy()
    for level in range(1, m):
        dd[level:] = (dd[level:] - dd[level - 1 : -1]) / (z[level:] - z[: m - level])
    # expand dd[0] + (x-z0)(dd[1] + (x-z1)(...)) from the innermost factor out
    out = Poly([dd[-1]])
    for k in range(m - 2, -1, -1):
        out = out * Poly([-z[k], 1.0]) + dd[k]
    return out


@dataclass(frozen=True)
class PathInU:
    """Polyline in parameter space; consumers validate the waypoints."""

    waypoints: tuple

    def __init__(self, waypoints):
        pts = tuple(np.atleast_1d(np.asarray(w, dtype=float)) for w in waypoints)
        if len(pts) < 1:
            raise ValueError("a path needs at least one waypoint")
        dims = {p.shape for p in pts}
        if len(dims) != 1:
            raise ValueError("waypoints must share one dimension")
        object.__setattr__(self, "waypoints", pts)

    @classmethod
    def straight(cls, start, end):
        return cls([start, end])

    @property
    def length(self) -> float:
        return float(sum(np.linalg.norm(b - a) for a, b in zip(self.waypoints, self.waypoints[1:])))


def ode_transport(
    field: Callable[[np.ndarray, np.ndarray], np.ndarray],
    path: PathInU,
    y0,
    tol: float = 1e-10,
) -> np.ndarray:
    """Integrate ``dy = sum_k field(p, y)[k] dp_k`` along a polyline.

    ``field(p, y)`` returns the partial derivatives of the state with respect
    to each coordinate of ``p``, stacked along the first axis (shape
    ``(dim,) + y.shape``). Each straight segment is parametrised by arclength
    and integrated with the Dormand-Prince 5(4) pair, local error controlled
    at ``tol`` per unit arclength.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = np.array(y0, dtype=complex)
    shape = y.shape
    travelled = 0.0
    for a, b in zip(path.waypoints, path.waypoints[1:]):
        seg = b - a
        length = float(np.linalg.norm(seg))
        if length == 0.0:
            continue
        direction = seg / length

        def rhs(s, yflat, a=a, direction=direction):
            p = a + s * direction
            partials = np.asarray(field(p, yflat.reshape(shape)), dtype=complex)
            dy = np.tensordot(direction, partials, axes=(0, 0))
            return dy.reshape(-1)

        sol = solve_ivp(
            rhs,
            (0.0, length),
            y.reshape(-1),
            method="RK45",
            rtol=tol,
            atol=tol,
        )
        if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
            where = travelled + (float(sol.t[-1]) if sol.t.size else 0.0)
            raise TransportError(f"integration failed: {sol.message}", arclength=where)
        y = sol.y[:, -1].reshape(shape)
        travelled += length
    return y


def fd_derivative(f: Callable, x, h: float | None = None, richardson: bool = False):
    """Fourth-order central difference of ``f`` at ``x``.

    The default step is ``1e-5 * max(1, |x|)``. With ``richardson`` the
    estimates at ``h`` and ``h/2`` are combined to cancel the ``h**4`` term.
    """
    if h is None:
        h = 1e-5 * max(1.0, abs(x))

    def central(step):
        fm2 = np.asarray(f(x - 2 * step))
        fm1 = np.asarray(f(x - step))
        fp1 = np.asarray(f(x + step))
        fp2 = np.asarray(f(x + 2 * step))
        # paired differences keep constants exactly at zero
        return ((fm2 - fp2) + 8 * (fp1 - fm1)) / (12 * step)

    d = central(h)
    if richardson:
        d = (16 * central(h / 2) - d) / 15
    return d
