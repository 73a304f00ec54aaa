"""Verification suites: each trial returns one scalar residual.

A suite passes a trial when its residual is below the suite tolerance.
Scaling suites additionally return ``(eps, residual)`` series for plotting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import elliptic as ell
from . import n2
from .assembly import (
    SolutionTriple,
    assemble_system,
    bilinear_polys,
    compatibility_residual,
    evolutionary_form,
    kernel_angle,
    sample_zetas,
    span_check,
)
from .polyode import PathInU, chebyshev_nodes, poly_from_roots
from .pseudo import extract_AB
from .rational import (
    connection_matrix,
    random_chamber_point,
    random_exponents,
    transport_basis,
    zero_curvature_residual,
)

SCALING_EPS = (1e-6, 1e-4, 1e-2)


@dataclass
class TrialContext:
    n: int
    s: np.ndarray | None = None
    tau: complex = 1j
    eta: complex = 0.17 + 0.11j
    series: list = field(default_factory=list)

    def exponents(self, rng):
        return random_exponents(rng, self.n) if self.s is None else np.asarray(self.s, dtype=float)

    def theta_ctx(self):
        return ell.ThetaCtx(self.tau)


@dataclass(frozen=True)
class Suite:
    name: str
    tolerance: float
    trial: Callable[[np.random.Generator, TrialContext], float]
    scaling: bool = False


def loglog_slope(eps, res) -> float:
    return float(np.polyfit(np.log10(eps), np.log10(res), 1)[0])


# rational ----------------------------------------------------------------

def _zero_curvature(rng, ctx):
    u = random_chamber_point(rng, ctx.n)
    s = ctx.exponents(rng)
    return max(zero_curvature_residual(u, s, i, j) for i in range(ctx.n) for j in range(i + 1, ctx.n))


def detour_path(u0, u1, bump: float = 0.3) -> PathInU:
    """Through a midpoint pushed by an increasing offset, so order is kept."""
    n = len(u0)
    mid = 0.5 * (np.asarray(u0) + np.asarray(u1)) + bump * np.arange(1, n + 1) / n
    return PathInU([u0, mid, u1])


def _path_independence(rng, ctx):
    u0 = random_chamber_point(rng, ctx.n)
    u1 = u0 + np.sort(rng.uniform(0.2, 1.0, ctx.n))
    s = ctx.exponents(rng)
    ya = transport_basis(u0, u1, s)
    yb = transport_basis(u0, u1, s, path=detour_path(u0, u1))
    return float(np.max(np.abs(ya - yb)) / np.max(np.abs(ya)))


def product_solution_residual(u, s12) -> float:
    """``M_i phi - d_u_i phi`` for ``phi = prod (z - u_j)`` with unit exponents at every ``u_j``."""
    n = len(u)
    s = np.concatenate([s12, np.ones(n)])
    phi = poly_from_roots(u)
    worst = 0.0
    for i in range(n):
        lhs = connection_matrix(u, s, i) @ phi.padded(n + 1)
        exact = -poly_from_roots(np.delete(u, i)).padded(n + 1)
        worst = max(worst, float(np.max(np.abs(lhs - exact)) / np.max(np.abs(exact))))
    return worst


def _product_solution(rng, ctx):
    return product_solution_residual(random_chamber_point(rng, ctx.n), rng.uniform(-2, 2, 2))


def _span_rank(rng, ctx):
    u = random_chamber_point(rng, ctx.n)
    rank, _ = span_check(bilinear_polys(u, SolutionTriple.random(rng, ctx.n)))
    return float(abs(rank - ctx.n))


def _compat_config(rng, n):
    u = random_chamber_point(rng, n)
    tr = SolutionTriple.random(rng, n)
    ux, uy = rng.normal(size=(2, n))
    return u, tr, ux, uy, sample_zetas(rng, u, 10)


def _compatibility(rng, ctx):
    return compatibility_residual(*_compat_config(rng, ctx.n))


def q_nodes(u, count: int = 5):
    """Real Chebyshev nodes on ``(u_n + 0.5, u_n + 5)``."""
    return np.sort(chebyshev_nodes(count, u[-1] + 0.5, u[-1] + 5.0))


def q_circle(u, count: int = 5, radius: float = 2.0):
    """Equispaced points on a circle right of ``u_n``; better conditioned than real nodes."""
    centre = u[-1] + 0.5 + radius
    return centre + radius * np.exp(2j * np.pi * (np.arange(count) + 0.5) / count)


def _extraction(rng, ctx):
    u = random_chamber_point(rng, ctx.n)
    s = ctx.exponents(rng)
    tr = SolutionTriple.random(rng, ctx.n)
    A, B, spread = extract_AB(u, tr, s, q_circle(u), mode="complex")
    A2, B2 = evolutionary_form(assemble_system(u, tr))
    scale = max(1.0, float(np.max(np.abs(A2))), float(np.max(np.abs(B2))))
    gap = max(float(np.max(np.abs(A - A2))), float(np.max(np.abs(B - B2)))) / scale
    return max(spread, gap)


def perturbation_series(u, tr, ux, uy, zetas, eps=SCALING_EPS):
    A, B = evolutionary_form(assemble_system(u, tr))
    ut = A @ ux + B @ uy
    e1 = np.zeros(len(u))
    e1[0] = 1.0
    return np.array([compatibility_residual(u, tr, ux, uy, zetas, ut=ut + e * e1) for e in eps])


def _perturbation(rng, ctx):
    res = perturbation_series(*_compat_config(rng, ctx.n))
    ctx.series.append((list(SCALING_EPS), res.tolist()))
    return abs(loglog_slope(SCALING_EPS, res) - 1.0)


RATIONAL = (
    Suite("zero-curvature", 1e-6, _zero_curvature),
    Suite("path-independence", 1e-7, _path_independence),
    Suite("product-solution", 1e-12, _product_solution),
    Suite("span-rank", 0.5, _span_rank),
    Suite("compatibility", 1e-10, _compatibility),
    Suite("coefficient-extraction", 1e-8, _extraction),
    Suite("perturbation-scaling", 0.1, _perturbation, scaling=True),
)


# elliptic ----------------------------------------------------------------

def theta_law_residual(z, tctx) -> float:
    th = lambda x: ell.theta(x, tctx)
    t = th(z)
    e = np.exp(-2j * np.pi * z)
    scale = max(1.0, float(np.max(np.abs(t))))
    laws = (
        np.abs(th(z + 1.0) - t),
        np.abs(th(z + tctx.tau) + e * t),
        np.abs(th(-z) + e * t),
    )
    return max(float(max(np.max(x) for x in laws)) / scale, abs(th(0.0)))


def _theta_laws(rng, ctx):
    tctx = ctx.theta_ctx()
    z = rng.random(50) + (rng.random(50) - 0.5) * tctx.tau
    return theta_law_residual(z, tctx)


def _membership(rng, ctx):
    tctx = ctx.theta_ctx()
    n = ctx.n
    pt = ell.random_elliptic_point(rng, n, tctx, ctx.eta)
    tr = ell.EllipticTriple.random(rng, n)
    c1 = pt.u.sum() - pt.eta
    worst = max(ell.theta_space_member(lambda z, k=k: ell.psi_basis(z, pt, tctx)[k], n, c1, tctx) for k in range(n))

    def bil(z, which, k):
        return ell.elliptic_bilinears_grid(z, pt, tr, tctx)[which, k]

    c2 = pt.u.sum() - 2 * pt.eta
    for which in range(3):
        for k in range(n):
            worst = max(worst, ell.theta_space_member(lambda z: bil(z, which, k), n, c2, tctx))
    return worst


def _basis_equation(rng, ctx):
    tctx = ctx.theta_ctx()
    pt = ell.random_elliptic_point(rng, ctx.n, tctx, ctx.eta)
    e = np.eye(ctx.n)
    return max(ell.linell_residual(pt, e[k], i, tctx) for k in range(ctx.n) for i in range(ctx.n))


def _trivial_reduction(rng, ctx):
    tctx = ctx.theta_ctx()
    pt = ell.random_elliptic_point(rng, 3, tctx, ctx.eta)
    sys3 = ell.assemble_exell(pt, ell.EllipticTriple.standard(3), tctx)
    return kernel_angle(sys3.kernel(), ell.trivial_system_n3().kernel())


def _translation(rng, ctx):
    tctx = ctx.theta_ctx()
    pt = ell.random_elliptic_point(rng, ctx.n, tctx, ctx.eta)
    tr = ell.EllipticTriple.random(rng, ctx.n)
    v = complex(rng.normal(), rng.normal())
    t0 = ell.assemble_exell(pt, tr, tctx).T
    t1 = ell.assemble_exell(pt.translated(v), tr, tctx).T
    return float(np.max(np.abs(t0 - t1)) / np.max(np.abs(t0)))


def random_kernel_vector(rng, system):
    K = system.kernel()
    return K @ (rng.normal(size=K.shape[1]) + 1j * rng.normal(size=K.shape[1]))


def _elliptic_compat(rng, ctx):
    tctx = ctx.theta_ctx()
    n = ctx.n
    pt = ell.random_elliptic_point(rng, n, tctx, ctx.eta)
    tr = ell.EllipticTriple.random(rng, n)
    v = random_kernel_vector(rng, ell.assemble_exell(pt, tr, tctx))
    zs = ell.random_zetas(rng, pt, tctx, 20)
    return ell.elliptic_compat_residual(pt, tr, v[n:2 * n], v[2 * n:], v[:n], zs, tctx)


def _elliptic_identity(rng, ctx):
    tctx = ctx.theta_ctx()
    pt = ell.random_elliptic_point(rng, ctx.n, tctx, ctx.eta)
    tr = ell.EllipticTriple.random(rng, ctx.n)
    qs = ell.sample_flow_points(rng, pt, tr.alpha, tctx, 5)
    return max(ell.elliptic_pseudo_fields(q, pt, tr, tctx).ps1_residual for q in qs)


ELLIPTIC = (
    Suite("theta-laws", 1e-10, _theta_laws),
    Suite("theta-membership", 1e-9, _membership),
    Suite("basis-equation", 1e-6, _basis_equation),
    Suite("trivial-reduction", 1e-8, _trivial_reduction),
    Suite("translation-invariance", 1e-10, _translation),
    Suite("elliptic-compatibility", 1e-8, _elliptic_compat),
    Suite("elliptic-identity", 1e-9, _elliptic_identity),
)


# two-component -----------------------------------------------------------

def _jet_completion(rng, ctx):
    return float(np.max(np.abs(n2.condition_residuals(n2.random_integrable_jet(rng)))))


def _relabel(rng, ctx):
    return float(np.max(np.abs(n2.condition_residuals(n2.relabel(n2.random_integrable_jet(rng))))))


def _closure(rng, ctx):
    jet = n2.random_integrable_jet(rng)
    return max(float(np.max(np.abs(n2.closure_residuals(jet, n2.random_gsample(rng))))) for _ in range(10))


CLOSURE_EPS = (1e-5, 1e-4, 1e-3)


def _closure_perturbation(rng, ctx):
    """``10 * baseline / perturbed`` at the largest step; below 1 means detected."""
    jet = n2.random_integrable_jet(rng)
    gss = [n2.random_gsample(rng) for _ in range(10)]

    def worst(j):
        return max(float(np.max(np.abs(n2.closure_residuals(j, g)))) for g in gss)

    base = worst(jet)
    res = [worst(jet.with_hessian("a", "vw", jet.dd("a", "vw") + e)) for e in CLOSURE_EPS]
    ctx.series.append((list(CLOSURE_EPS), res))
    return 10.0 * base / res[-1] if res[-1] > 0 else np.inf


N2 = (
    Suite("jet-completion", 1e-10, _jet_completion),
    Suite("relabel-symmetry", 1e-10, _relabel),
    Suite("closure", 1e-7, _closure),
    Suite("closure-perturbation", 1.0, _closure_perturbation, scaling=True),
)

MODES = {"rational": RATIONAL, "elliptic": ELLIPTIC, "n2-conditions": N2}
