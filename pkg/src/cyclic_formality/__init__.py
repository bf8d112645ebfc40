"""Equivariant disk-graph L-infinity morphism from negative cyclic chains to
multivector fields on R^d, with exact graded algebra and Monte Carlo weights."""

__version__ = "0.1.0"

from .assembly import (
    F1_closed,
    F_n,
    GammaWord,
    PoissonData,
    TaylorResult,
    U1,
    U2,
    affine_property_check,
    check_unimodular,
    miranda_residual,
    star_product,
    trace_integrand,
)
from .diffop import MultiDiffOp
from .gradedcore import (
    DiffForm,
    KoszulContext,
    MultiVector,
    PolyFunction,
    contraction,
    delta_omega,
    divergence,
    hkr_chain,
    hkr_cochain,
    koszul_sign,
    lie_action,
    schouten,
    wedge,
)
from .graphs import AdmissibleGraph, canonical_key, edge_boundary, enumerate_graphs, validate
from .hochschild import HochschildChain, NegCyclicChain, b_plus_uB, cochain_action
from .weights import WeightEstimate, exact_weight, mc_weight, weight

__all__ = [
    "AdmissibleGraph",
    "DiffForm",
    "F1_closed",
    "F_n",
    "GammaWord",
    "HochschildChain",
    "KoszulContext",
    "MultiDiffOp",
    "MultiVector",
    "NegCyclicChain",
    "PoissonData",
    "PolyFunction",
    "TaylorResult",
    "U1",
    "U2",
    "WeightEstimate",
    "affine_property_check",
    "b_plus_uB",
    "canonical_key",
    "check_unimodular",
    "cochain_action",
    "contraction",
    "delta_omega",
    "divergence",
    "edge_boundary",
    "enumerate_graphs",
    "exact_weight",
    "hkr_chain",
    "hkr_cochain",
    "koszul_sign",
    "lie_action",
    "mc_weight",
    "miranda_residual",
    "schouten",
    "star_product",
    "trace_integrand",
    "validate",
    "wedge",
    "weight",
]
