"""Two-component systems in the normal form

    v_t + a v_x + p v_y + q w_y = 0,
    w_t + b w_x + r v_y + s w_y = 0,

with ``a, b, p, q, r, s`` functions of ``(v, w)``.

Integrability is a set of sixteen second-order PDEs for these six
coefficients. This module evaluates that set pointwise on 2-jets, completes
arbitrary first-order data to an integrable 2-jet, and checks that the
pseudopotential system for ``g(xi, v, w)`` (``xi = psi_y``) closes on such
jets: with ``h1 = g_v`` and ``h2 = g_w`` as unknowns, all prescribed first
derivatives must have symmetric mixed partials.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import SingularPointError
from .jets import Jet

FIELDS = ("a", "b", "p", "q", "r", "s")
_IDX = {name: k for k, name in enumerate(FIELDS)}

# condition order: 3 for a, 3 for b, 3 for p, 3 for s, then the q,r block
CONDITIONS = (
    "a_vv", "a_vw", "a_ww",
    "b_vv", "b_vw", "b_ww",
    "p_vv", "p_vw", "p_ww",
    "s_vv", "s_vw", "s_ww",
    "qr_ww", "q_vw", "r_vw", "qr_vv",
)
CLOSURE_NAMES = ("h1_vw", "h2_vw", "h1_vxi", "h1_wxi", "h2_vxi", "h2_wxi")

# relabelling v <-> w, a <-> b, p <-> s, q <-> r
_SWAP = {"a": "b", "b": "a", "p": "s", "s": "p", "q": "r", "r": "q"}


@dataclass(frozen=True)
class Jet2Fields:
    """Values, gradients ``(d_v, d_w)`` and Hessians ``(vv, vw, ww)`` of a..s."""

    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(6))
        object.__setattr__(self, "grads", np.asarray(self.grads, dtype=float).reshape(6, 2))
        object.__setattr__(self, "hessians", np.asarray(self.hessians, dtype=float).reshape(6, 3))

    def __getitem__(self, name):
        return self.values[_IDX[name]]

    def d(self, name, wrt):
        return self.grads[_IDX[name], "vw".index(wrt)]

    def dd(self, name, wrt):
        key = {"vv": 0, "vw": 1, "wv": 1, "ww": 2}[wrt]
        return self.hessians[_IDX[name], key]

    def with_hessian(self, name, wrt, val) -> "Jet2Fields":
        h = self.hessians.copy()
        h[_IDX[name], {"vv": 0, "vw": 1, "ww": 2}[wrt]] = val
        return replace(self, hessians=h)

    def check(self, min_gap: float = 0.0, min_qr: float = 0.0):
        a, b, q, r = self["a"], self["b"], self["q"], self["r"]
        if abs(a - b) <= min_gap or a == b:
            raise SingularPointError(f"a - b = {a - b} is too small")
        if abs(q) <= min_qr or q == 0:
            raise SingularPointError(f"q = {q} is too small")
        if abs(r) <= min_qr or r == 0:
            raise SingularPointError(f"r = {r} is too small")
        return self


@dataclass(frozen=True)
class GSample:
    """First derivatives ``(g_v, g_w)`` of the pseudopotential at a point."""

    g_v: float
    g_w: float

    def __post_init__(self):
        if self.g_v == 0:
            raise SingularPointError("g_v must be nonzero")
        if self.g_w == 0:
            raise SingularPointError("g_w must be nonzero")


def relabel(jet: Jet2Fields) -> Jet2Fields:
    """Apply the symmetry ``v <-> w, a <-> b, p <-> s, q <-> r``."""
    perm = [_IDX[_SWAP[name]] for name in FIELDS]
    values = jet.values[perm]
    grads = jet.grads[perm][:, ::-1]
    hess = jet.hessians[perm][:, ::-1]
    return Jet2Fields(values, grads, hess)


def _first(jet: Jet2Fields):
    """Field values and first derivatives as a flat namespace dict."""
    env = {}
    for name in FIELDS:
        env[name] = jet[name]
        env[name + "v"] = jet.d(name, "v")
        env[name + "w"] = jet.d(name, "w")
    return env


def _rhs_terms(e) -> dict:
    """Right-hand sides of the sixteen conditions as lists of summands.

    ``e`` maps ``a, av, aw, ...`` to numbers. The qr-block entries are the
    right-hand sides of ``q r_ww + r q_ww``, ``q_vw``, ``r_vw`` and
    ``q r_vv + r q_vv``.
    """
    a, b, p, q, r, s = (e[k] for k in FIELDS)
    av, aw, bv, bw = e["av"], e["aw"], e["bv"], e["bw"]
    pv, pw, qv, qw = e["pv"], e["pw"], e["qv"], e["qw"]
    rv, rw, sv, sw = e["rv"], e["rw"], e["sv"], e["sw"]
    amb = a - b
    bma = b - a
    amb2 = amb * amb
    t = {}
    t["a_vv"] = [
        q * av * bv / (amb * q), 2 * q * av * av / (amb * q), (s - p) * av * aw / (amb * q),
        -r * aw * aw / (amb * q), av * rv / r, 2 * av * pw / q, -aw * pv / q,
    ]
    t["a_vw"] = [av * aw / amb, av * bw / amb, av * qw / q, av * rw / r]
    t["a_ww"] = [
        q * av * bv / (amb * r), (s - p) * av * bw / (amb * r), r * aw * aw / (amb * r),
        av * sw / r, aw * qw / q,
    ]
    t["b_vv"] = [
        r * aw * bw / (bma * q), (p - s) * av * bw / (bma * q), q * bv * bv / (bma * q),
        bw * pv / q, bv * rv / r,
    ]
    t["b_vw"] = [bw * av / bma, bw * bv / bma, bw * qv / q, bw * rv / r]
    t["b_ww"] = [
        r * aw * bw / (bma * r), 2 * r * bw * bw / (bma * r), (p - s) * bv * bw / (bma * r),
        -q * bv * bv / (bma * r), bw * qw / q, 2 * bw * sv / r, -bv * sw / r,
    ]
    t["p_vv"] = [
        2 * r * av * bw / amb2, -2 * r * aw * bv / amb2, 2 * (s - p) * av * bv / amb2,
        rv * pv / r, pv * pw / q,
        (r / q) * 2 * qv * aw / bma, -(r / q) * 2 * av * qw / bma, (r / q) * aw * pw / bma,
        -bv * pv / bma, 2 * rv * aw / bma,
        -2 * av * sv / bma, -2 * av * pv / bma, -2 * av * rw / bma,
        ((p - s) / q) * 2 * pv * aw / bma, -((p - s) / q) * av * pw / bma,
    ]
    t["p_vw"] = [
        2 * (s - p) * av * bw / amb2, -bw * pv / bma, -2 * sw * av / bma, -pw * av / bma,
        pv * qw / q, pv * rw / r,
    ]
    t["p_ww"] = [
        2 * q * aw * bv / amb2, -2 * q * av * bw / amb2, 2 * (s - p) * aw * bw / amb2,
        (p - s) * bw * pv / (bma * r), -q * bv * pv / (bma * r), -2 * r * sw * aw / (bma * r),
        -r * aw * pw / (bma * r),
        pv * sw / r, qw * pw / q,
    ]
    t["s_vv"] = [
        2 * r * aw * bv / amb2, -2 * r * av * bw / amb2, 2 * (p - s) * av * bv / amb2,
        (s - p) * av * sw / (amb * q), -r * aw * sw / (amb * q), -2 * q * pv * bv / (amb * q),
        -q * bv * sv / (amb * q),
        pv * sw / q, rv * sv / r,
    ]
    t["s_vw"] = [
        2 * (p - s) * av * bw / amb2, -av * sw / amb, -2 * pv * bw / amb, -sv * bw / amb,
        sw * qv / q, sw * rv / r,
    ]
    t["s_ww"] = [
        2 * q * av * bw / amb2, -2 * q * aw * bv / amb2, 2 * (p - s) * aw * bw / amb2,
        qw * sw / q, sv * sw / r,
        (q / r) * 2 * rw * bv / amb, -(q / r) * 2 * bw * rv / amb, (q / r) * bv * sv / amb,
        -aw * sw / amb, 2 * qw * bv / amb,
        -2 * bw * pw / amb, -2 * bw * sw / amb, -2 * bw * qv / amb,
        ((s - p) / r) * 2 * sw * bv / amb, -((s - p) / r) * bw * sv / amb,
    ]
    t["qr_ww"] = [
        2 * (p - s) * (p - s) * aw * bw / amb2, 2 * (p - s) * q * av * bw / amb2,
        -2 * (p - s) * q * aw * bv / amb2,
        q * (rv / r) * q * bv / amb, q * (rv / r) * (s - p) * bw / amb,
        (s - p) * 2 * aw * sw / amb, (s - p) * 2 * bw * pw / amb, (s - p) * bw * qv / amb,
        r * aw * qw / amb, -2 * r * bw * qw / amb,
        q * aw * rw / amb, q * bv * 2 * pw / amb, q * bv * 2 * sw / amb, q * bv * qv / amb,
        -2 * q * bw * rw / amb, -2 * q * bw * pv / amb, -2 * q * bw * sv / amb,
        (r / q) * qw * qw, (q / r) * sw * rv, -qw * rw, 2 * sw * pw, sw * qv,
    ]
    t["q_vw"] = [
        (s - p) * q * av * bv / (r * amb2), (s - p) * (s - p) * av * bw / (r * amb2),
        (s - p) * r * aw * bw / (r * amb2),
        qv * qw / q, pv * sw / r,
        av * r * qw / (r * amb), av * q * rw / (r * amb),
        (s - p) * av * sw / (r * amb), (s - p) * bw * pv / (r * amb),
        r * aw * sw / (r * amb), q * pv * bv / (r * amb),
    ]
    t["r_vw"] = [
        (p - s) * r * aw * bw / (q * amb2), (p - s) * (p - s) * av * bw / (q * amb2),
        (p - s) * q * av * bv / (q * amb2),
        rv * rw / r, pv * sw / q,
        bw * r * qv / (q * bma), bw * q * rv / (q * bma),
        (p - s) * av * sw / (q * bma), (p - s) * bw * pv / (q * bma),
        r * aw * sw / (q * bma), q * pv * bv / (q * bma),
    ]
    t["qr_vv"] = [
        2 * (s - p) * (s - p) * av * bv / amb2, 2 * (s - p) * r * av * bw / amb2,
        -2 * (s - p) * r * aw * bv / amb2,
        r * (qw / q) * r * aw / bma, r * (qw / q) * (p - s) * av / bma,
        (p - s) * 2 * bv * pv / bma, (p - s) * 2 * av * sv / bma, (p - s) * av * rw / bma,
        q * bv * rv / bma, -2 * q * av * rv / bma,
        r * bv * qv / bma, r * aw * 2 * sv / bma, r * aw * 2 * pv / bma, r * aw * rw / bma,
        -2 * r * av * qv / bma, -2 * r * av * sw / bma, -2 * r * av * pw / bma,
        (q / r) * rv * rv, (r / q) * pv * qw, -rv * qv, 2 * pv * sv, pv * rw,
    ]
    return t


def _lhs(jet: Jet2Fields) -> dict:
    q, r = jet["q"], jet["r"]
    out = {}
    for f in ("a", "b", "p", "s"):
        for wrt in ("vv", "vw", "ww"):
            out[f"{f}_{wrt}"] = jet.dd(f, wrt)
    out["qr_ww"] = q * jet.dd("r", "ww") + r * jet.dd("q", "ww")
    out["q_vw"] = jet.dd("q", "vw")
    out["r_vw"] = jet.dd("r", "vw")
    out["qr_vv"] = q * jet.dd("r", "vv") + r * jet.dd("q", "vv")
    return out


def condition_residuals(jet: Jet2Fields) -> np.ndarray:
    """Sixteen residuals ``LHS - RHS``, each scaled by its largest term.

    The scale is the largest absolute value among the right-hand-side
    summands and the left-hand side; a condition whose terms all vanish
    has residual zero.
    """
    jet.check()
    terms = _rhs_terms(_first(jet))
    lhs = _lhs(jet)
    out = np.empty(len(CONDITIONS))
    for k, name in enumerate(CONDITIONS):
        rhs = terms[name]
        scale = max([abs(x) for x in rhs] + [abs(lhs[name])])
        out[k] = 0.0 if scale == 0 else (lhs[name] - sum(rhs)) / scale
    return out


def complete_integrable_jet(values, gradients, free_q_vv: float = 0.0, free_q_ww: float = 0.0) -> Jet2Fields:
    """Fill in Hessians so that every integrability condition holds exactly.

    ``values`` are ``(a, b, p, q, r, s)`` and ``gradients`` their
    ``(d_v, d_w)`` pairs. The Hessians of a, b, p, s and the mixed
    derivatives of q, r are read off the conditions; the q,r block leaves
    ``q_vv`` and ``q_ww`` free and fixes ``r_vv``, ``r_ww`` from them.
    """
    jet = Jet2Fields(values, gradients, np.zeros((6, 3))).check()
    rhs = {k: sum(v) for k, v in _rhs_terms(_first(jet)).items()}
    q, r = jet["q"], jet["r"]
    hess = np.zeros((6, 3))
    for f in ("a", "b", "p", "s"):
        hess[_IDX[f]] = [rhs[f"{f}_vv"], rhs[f"{f}_vw"], rhs[f"{f}_ww"]]
    hess[_IDX["q"]] = [free_q_vv, rhs["q_vw"], free_q_ww]
    hess[_IDX["r"]] = [
        (rhs["qr_vv"] - r * free_q_vv) / q,
        rhs["r_vw"],
        (rhs["qr_ww"] - r * free_q_ww) / q,
    ]
    return Jet2Fields(jet.values, jet.grads, hess)


def random_jet_data(rng: np.random.Generator):
    """Seeded first-order data inside the sampling box.

    Values in ``[1, 2]`` with ``|a - b| >= 0.5``, ``q, r`` in ``[0.5, 1.5]``,
    gradients in ``[-1, 1]``.
    """
    while True:
        a, b = rng.uniform(1.0, 2.0, size=2)
        if abs(a - b) >= 0.5:
            break
    p, s = rng.uniform(1.0, 2.0, size=2)
    q, r = rng.uniform(0.5, 1.5, size=2)
    values = np.array([a, b, p, q, r, s])
    grads = rng.uniform(-1.0, 1.0, size=(6, 2))
    return values, grads


def random_integrable_jet(rng: np.random.Generator) -> Jet2Fields:
    values, grads = random_jet_data(rng)
    free = rng.uniform(-1.0, 1.0, size=2)
    return complete_integrable_jet(values, grads, *free)


def random_gsample(rng: np.random.Generator, lo: float = 0.3, hi: float = 2.0) -> GSample:
    mags = rng.uniform(lo, hi, size=2)
    signs = rng.choice([-1.0, 1.0], size=2)
    return GSample(*(mags * signs))


# --- pseudopotential chain ------------------------------------------------

def _g_xi(e, h1, h2):
    a, b, p, q, r, s = (e[k] for k in FIELDS)
    return (s + q * h1 / h2 - p - r * h2 / h1) / (a - b)


def _f_xi(e, h1, h2):
    a, b, p, q, r, s = (e[k] for k in FIELDS)
    return (b * (p + r * h2 / h1) - a * (s + q * h1 / h2)) / (a - b)


def _g_second(e, h1, h2):
    """``(g_vv, g_vw, g_ww)`` as functions of the fields and ``h1, h2``."""
    a, b, p, q, r, s = (e[k] for k in FIELDS)
    av, aw, bv, bw = e["av"], e["aw"], e["bv"], e["bw"]
    pv, qw, rv, sw = e["pv"], e["qw"], e["rv"], e["sw"]
    g_vw = aw * h1 / (b - a) + bv * h2 / (a - b)
    g_vv = h1 * (
        h2 * h2 * (r * (bv - av) + (a - b) * rv)
        + h1 * h2 * ((a - b) * pv + (s - p) * av - r * aw)
        + q * av * h1 * h1
    ) / ((a - b) * r * h2 * h2)
    g_ww = h2 * (
        h1 * h1 * (q * (aw - bw) + (b - a) * qw)
        + h1 * h2 * ((b - a) * sw + (p - s) * bw - q * bv)
        + r * bw * h2 * h2
    ) / ((b - a) * q * h1 * h1)
    return g_vv, g_vw, g_ww


def _check_denominators(jet: Jet2Fields, gs: GSample):
    for label, val in (("q", jet["q"]), ("r", jet["r"]), ("a - b", jet["a"] - jet["b"]),
                       ("g_v", gs.g_v), ("g_w", gs.g_w)):
        if val == 0:
            raise SingularPointError(f"vanishing denominator: {label}")


def g_chain(jet: Jet2Fields, gs: GSample):
    """``(f_v, f_w, f_xi, g_xi, g_vv, g_vw, g_ww)`` at the given point."""
    _check_denominators(jet, gs)
    e = _first(jet)
    h1, h2 = gs.g_v, gs.g_w
    g_vv, g_vw, g_ww = _g_second(e, h1, h2)
    return (-jet["a"] * h1, -jet["b"] * h2, _f_xi(e, h1, h2), _g_xi(e, h1, h2), g_vv, g_vw, g_ww)


def _field_jets(jet: Jet2Fields):
    """Fields and their first derivatives as jets over ``(v, w, xi)``."""
    e = {}
    for name in FIELDS:
        gv, gw = jet.d(name, "v"), jet.d(name, "w")
        e[name] = Jet(jet[name], (gv, gw, 0.0), "vwx")
        e[name + "v"] = Jet(gv, (jet.dd(name, "vv"), jet.dd(name, "vw"), 0.0), "vwx")
        e[name + "w"] = Jet(gw, (jet.dd(name, "vw"), jet.dd(name, "ww"), 0.0), "vwx")
    return e


def _closure_pass(jet: Jet2Fields, gs: GSample, h_xi):
    e = _field_jets(jet)
    plain = _first(jet)
    g_vv0, g_vw0, g_ww0 = _g_second(plain, gs.g_v, gs.g_w)
    h1 = Jet(gs.g_v, (g_vv0, g_vw0, h_xi[0]), "vwx")
    h2 = Jet(gs.g_w, (g_vw0, g_ww0, h_xi[1]), "vwx")
    g_vv, g_vw, g_ww = _g_second(e, h1, h2)

    # D_v g_xi and D_w g_xi as (v, w, xi)-jets: differentiate g_xi along the
    # prescribed v- and w-derivatives of its arguments with an outer jet layer
    names = list(FIELDS)

    def directional(d):
        args = {n: Jet(e[n], (e[n + d],), "dir") for n in names}
        k1 = Jet(h1, ((g_vv if d == "v" else g_vw),), "dir")
        k2 = Jet(h2, ((g_vw if d == "v" else g_ww),), "dir")
        return _g_xi(args, k1, k2).grad[0]

    return g_vv, g_vw, g_ww, directional("v"), directional("w")


def closure_residuals(jet: Jet2Fields, gs: GSample) -> np.ndarray:
    """Mixed-partial mismatches of the system for ``h1 = g_v``, ``h2 = g_w``.

    Prescribed derivatives: ``d_v h1 = g_vv``, ``d_w h1 = d_v h2 = g_vw``,
    ``d_w h2 = g_ww`` and ``d_xi h1 = D_v g_xi``, ``d_xi h2 = D_w g_xi``.
    Returned in the order of :data:`CLOSURE_NAMES`; each mismatch is divided
    by ``max(1, |lhs|, |rhs|)``.
    """
    _check_denominators(jet, gs)
    _, _, _, dv_gxi, dw_gxi = _closure_pass(jet, gs, (0.0, 0.0))
    h_xi = (dv_gxi.val, dw_gxi.val)
    g_vv, g_vw, g_ww, dv_gxi, dw_gxi = _closure_pass(jet, gs, h_xi)
    V, W, X = 0, 1, 2
    pairs = (
        (g_vv.grad[W], g_vw.grad[V]),
        (g_vw.grad[W], g_ww.grad[V]),
        (dv_gxi.grad[V], g_vv.grad[X]),
        (dv_gxi.grad[W], g_vw.grad[X]),
        (dw_gxi.grad[V], g_vw.grad[X]),
        (dw_gxi.grad[W], g_ww.grad[X]),
    )
    return np.array([(x - y) / max(1.0, abs(x), abs(y)) for x, y in pairs])
