"""Verification engine for pseudopotential constructions of hydrodynamic type systems."""
from .assembly import (
    BilinearPolys,
    HydroSystemN,
    SolutionTriple,
    assemble_system,
    bilinear_polys,
    compatibility_residual,
    evolutionary_form,
    span_check,
)
from .elliptic import (
    EllipticPoint,
    EllipticTriple,
    ThetaCtx,
    assemble_exell,
    elliptic_bilinears,
    elliptic_compat_residual,
    elliptic_pseudo_fields,
    linell_residual,
    psi_basis,
    theta,
    theta_space_member,
)
from .exceptions import (
    BranchCutError,
    ChamberError,
    ConfigError,
    DegeneracyError,
    HydroPseudoError,
    InterpolationError,
    SingularPointError,
    ThetaTruncationError,
    TransportError,
)
from .n2 import GSample, Jet2Fields, closure_residuals, complete_integrable_jet, condition_residuals, g_chain, relabel
from .polyode import PathInU, Poly, fd_derivative, ode_transport, poly_div_linear, poly_eval, poly_interp
from .pseudo import PseudoJet, QState, extract_AB, fg_derivatives, pseudo_compat_residual, q_flow_field
from .rational import connection_matrix, transport, zero_curvature_residual

__version__ = "0.1.0"
