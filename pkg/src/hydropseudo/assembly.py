"""Quasilinear systems built from three solutions of the linear system.

Given coefficient vectors of ``phi, phi1, phi2`` at a chamber point, the
bilinear polynomials ``theta_i, nu_i, mu_i`` (degree ``n-1``) define the
polynomial identity

    sum_i nu_i(z) u_it + sum_i mu_i(z) u_ix + sum_i theta_i(z) u_iy = 0,

whose ``n`` coefficients are the equations of the system.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .exceptions import DegeneracyError, SingularPointError
from .polyode import Poly, poly_div_linear, poly_eval
from .rational import validate_chamber, vandermonde_denominator

RANK_TOL = 1e-8
DIRECTIONS = ("t", "x", "y")


def numerical_rank(mat, rtol: float = RANK_TOL) -> tuple[int, np.ndarray]:
    sv = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > rtol * sv[0])), sv


@dataclass(frozen=True)
class SolutionTriple:
    """Coefficient vectors of ``phi`` (alpha), ``phi1`` (beta), ``phi2`` (gamma)."""

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

    def polys(self) -> tuple[Poly, Poly, Poly]:
        return Poly(self.alpha), Poly(self.beta), Poly(self.gamma)

    def transformed(self, g) -> "SolutionTriple":
        """Apply ``g`` in GL_3 to ``(phi, phi1, phi2)``."""
        new = np.asarray(g) @ self.stack
        return SolutionTriple(*new)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, scale: float = 1.0):
        return cls(*rng.normal(scale=scale, size=(3, n + 1)))


@dataclass(frozen=True)
class BilinearPolys:
    theta: tuple
    nu: tuple
    mu: tuple

    @property
    def n(self) -> int:
        return len(self.nu)

    def coefficient_stack(self) -> np.ndarray:
        """``3n x n`` array of all coefficient vectors (theta, nu, mu blocks)."""
        n = self.n
        return np.vstack([p.padded(n) for p in (*self.theta, *self.nu, *self.mu)])

    def evaluate(self, z):
        """Values ``(theta_i(z), nu_i(z), mu_i(z))`` as three length-n arrays."""
        return tuple(np.array([poly_eval(p, z) for p in group]) for group in (self.theta, self.nu, self.mu))


def _wedge(pa: Poly, pb: Poly, root, denom) -> Poly:
    """``(pa(root) pb(z) - pb(root) pa(z)) / ((z - root) denom)``."""
    numer = pb * complex(poly_eval(pa, root)) - pa * complex(poly_eval(pb, root))
    quot, _ = poly_div_linear(numer, root)
    return quot / denom


def bilinear_polys(u, triple: SolutionTriple) -> BilinearPolys:
    """``theta_i, nu_i, mu_i`` for every direction ``i``.

    ``theta_i`` pairs (phi1, phi2), ``nu_i`` pairs (phi2, phi) and ``mu_i``
    pairs (phi, phi1); each numerator vanishes at ``z = u_i`` and is divided
    exactly, then scaled by ``1 / (u_i (u_i - 1) prod_{j != i} (u_i - u_j))``.
    """
    u = validate_chamber(u)
    n = len(u)
    if len(triple.alpha) != n + 1:
        raise ValueError(f"triple has length {len(triple.alpha)}, expected {n + 1}")
    phi, phi1, phi2 = triple.polys()
    theta, nu, mu = [], [], []
    for i in range(n):
        d = vandermonde_denominator(u, i)
        theta.append(_wedge(phi1, phi2, u[i], d))
        nu.append(_wedge(phi2, phi, u[i], d))
        mu.append(_wedge(phi, phi1, u[i], d))
    return BilinearPolys(tuple(theta), tuple(nu), tuple(mu))


@dataclass(frozen=True)
class HydroSystemN:
    """Coefficient tensor ``T[l, i, d]`` of ``sum_{i,d} T[l,i,d] u_{i,d} = 0``.

    ``d`` runs over the directions ``(t, x, y)``.
    """

    T: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=complex)
        if T.ndim != 3 or T.shape[2] != 3:
            raise ValueError("coefficient tensor must have shape (m, n, 3)")
        object.__setattr__(self, "T", T)

    @property
    def n(self) -> int:
        return self.T.shape[1]

    def block(self, direction: str) -> np.ndarray:
        return self.T[:, :, DIRECTIONS.index(direction)]

    def matrix(self) -> np.ndarray:
        """``m x 3n`` matrix acting on the stacked vector ``(u_t, u_x, u_y)``."""
        return np.hstack([self.block(d) for d in DIRECTIONS])

    def apply(self, ut, ux, uy) -> np.ndarray:
        return self.block("t") @ ut + self.block("x") @ ux + self.block("y") @ uy

    def rank(self) -> int:
        return numerical_rank(self.matrix())[0]

    def kernel(self) -> np.ndarray:
        """Orthonormal basis (columns) of the solution space in ``(u_t, u_x, u_y)``."""
        mat = self.matrix()
        r = self.rank()
        _, _, vh = np.linalg.svd(mat)
        return vh[r:].conj().T

    def row_normalized(self) -> "HydroSystemN":
        scale = np.max(np.abs(self.matrix()), axis=1)
        scale[scale == 0] = 1.0
        return HydroSystemN(self.T / scale[:, None, None])

    def t_condition(self) -> float:
        return float(np.linalg.cond(self.block("t")))


def assemble_system(u, triple: SolutionTriple, bilinears: BilinearPolys | None = None) -> HydroSystemN:
    """Equation ``l`` is the coefficient of ``z**l`` in the polynomial identity."""
    bp = bilinear_polys(u, triple) if bilinears is None else bilinears
    n = bp.n
    T = np.zeros((n, n, 3), dtype=complex)
    for i in range(n):
        T[:, i, 0] = bp.nu[i].padded(n)
        T[:, i, 1] = bp.mu[i].padded(n)
        T[:, i, 2] = bp.theta[i].padded(n)
    return HydroSystemN(T)


def evolutionary_form(system: HydroSystemN, max_condition: float = 1e12):
    """Solve for ``u_t = A u_x + B u_y``.

    Raises :class:`DegeneracyError` (carrying the condition number) when the
    t-block is not invertible.
    """
    tt = system.block("t")
    if tt.shape[0] != tt.shape[1]:
        raise DegeneracyError(f"t-block has shape {tt.shape}; need a square block", float("inf"))
    cond = float(np.linalg.cond(tt))
    if not np.isfinite(cond) or cond > max_condition:
        raise DegeneracyError(f"t-block is singular (condition number {cond:.3g})", cond)
    A = -np.linalg.solve(tt, system.block("x"))
    B = -np.linalg.solve(tt, system.block("y"))
    return A, B


def _cleared_factor(z, u, s):
    """``z^{1-2s_1} (z-1)^{1-2s_2} prod (z-u_i)^{1-2s_{i+2}}`` on the principal branch."""
    bases = np.concatenate([[z, z - 1.0], z - np.asarray(u)])
    exps = 1.0 - 2.0 * np.asarray(s)
    if np.all(np.isreal(bases)) and np.all(np.real(bases) > 0):
        return float(np.prod(np.real(bases) ** exps))
    return complex(np.prod(np.exp(exps * np.log(bases.astype(complex)))))


def sample_zetas(rng: np.random.Generator, u, count: int = 10) -> np.ndarray:
    u = np.asarray(u)
    return rng.uniform(u[-1] + 0.5, u[-1] + 5.0, size=count)


def compatibility_residual(u, triple: SolutionTriple, ux, uy, zetas, ut=None,
                           mode: str = "cleared", s=None) -> float:
    """Normalised residual of the polynomial identity at sample points.

    ``u_t`` defaults to the evolutionary form of the assembled system. In
    ``"uncleared"`` mode every sample is multiplied by the common power
    factor (requires the exponents ``s``; samples must be real and exceed
    ``u_n``). The result is ``max_z |sum| / max_z max |summand|``.
    """
    u = validate_chamber(u)
    n = len(u)
    bp = bilinear_polys(u, triple)
    ux = np.asarray(ux, dtype=complex)
    uy = np.asarray(uy, dtype=complex)
    if ut is None:
        A, B = evolutionary_form(assemble_system(u, triple, bp))
        ut = A @ ux + B @ uy
    ut = np.asarray(ut, dtype=complex)
    if mode not in ("cleared", "uncleared"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "uncleared" and s is None:
        raise ValueError("uncleared mode needs the exponents s")
    worst = 0.0
    scale = 0.0
    for z in np.atleast_1d(zetas):
        if np.any(np.isclose(z, np.concatenate([[0.0, 1.0], u]), rtol=0, atol=1e-12)):
            raise SingularPointError(f"sample {z} hits a pole")
        th, nu, mu = bp.evaluate(z)
        terms = np.concatenate([nu * ut, mu * ux, th * uy])
        if mode == "uncleared":
            terms = terms * _cleared_factor(z, u, s)
        worst = max(worst, abs(np.sum(terms)))
        scale = max(scale, float(np.max(np.abs(terms))) if terms.size else 0.0)
    return 0.0 if scale == 0 else worst / scale


def span_check(bp: BilinearPolys, rtol: float = RANK_TOL):
    """Rank and singular values of the ``3n`` stacked coefficient vectors."""
    return numerical_rank(bp.coefficient_stack(), rtol)


def kernel_angle(basis_a: np.ndarray, basis_b: np.ndarray) -> float:
    """Largest principal angle between two column spaces (pi/2 if dimensions differ)."""
    if basis_a.shape[1] != basis_b.shape[1]:
        return float(np.pi / 2)
    if basis_a.shape[1] == 0:
        return 0.0
    return float(np.max(subspace_angles(basis_a, basis_b)))


def literal_ex_system(u, triple: SolutionTriple) -> HydroSystemN:
    """The explicit coefficient formula exactly as printed, for comparison.

    Row ``l`` (``l = 1..n``) sums over ``0 <= j <= l < k <= n`` with weight
    ``u_i**(j+l) / prod_{m != i} (u_i - u_m)``; row ``n`` is empty.
    """
    u = validate_chamber(u)
    n = len(u)
    al, be, ga = triple.alpha, triple.beta, triple.gamma
    T = np.zeros((n, n, 3), dtype=complex)
    for row, l in enumerate(range(1, n + 1)):
        for i in range(n):
            w0 = 1.0 / np.prod(u[i] - np.delete(u, i))
            for j in range(0, l + 1):
                for k in range(l + 1, n + 1):
                    w = w0 * u[i] ** (j + l)
                    T[row, i, 0] += w * (ga[j] * al[k] - ga[k] * al[j])
                    T[row, i, 1] += w * (al[j] * be[k] - al[k] * be[j])
                    T[row, i, 2] += w * (be[j] * ga[k] - be[k] * ga[j])
    return HydroSystemN(T)


def literal_ex_discrepancy(u, triple: SolutionTriple) -> dict:
    """How far the printed formula is from the derived system.

    Reports both ranks and the largest principal angle between the two
    solution spaces. Nothing is asserted here.
    """
    derived = assemble_system(u, triple)
    literal = literal_ex_system(u, triple)
    kd, kl = derived.kernel(), literal.kernel()
    return {
        "derived_rank": derived.rank(),
        "literal_rank": literal.rank(),
        "kernel_angle": kernel_angle(kd, kl),
    }


def null_basis(mat) -> np.ndarray:
    return null_space(np.atleast_2d(mat), rcond=RANK_TOL)
