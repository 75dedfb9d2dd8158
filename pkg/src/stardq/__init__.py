"""Exact deformation quantization of polynomial Poisson structures via graph expansions."""
from .poly import ParseError, Poly, parse_poly
from .series import EpsSeries
from .multivector import MultiVectorField, jacobiator, parse_multivector, poisson_bracket, schouten
from .multidiff import (GaugeOp, MultiDiffOp, StarProduct, gerstenhaber, hkr_u1, hochschild_d, mc_residual,
                        u1_defect)
from .graphs import AdmissibleGraph, assemble_operator, enumerate_graphs, named_graph
from .weights import WeightCache, WeightEstimate, WeightSource, known_weight, mc_weight
from .star import (assoc_residual, formality_residual, gauge_transform, moyal, skew_normalize,
                   solve_order2_weights, star_expand)

__all__ = [
    "ParseError", "Poly", "parse_poly", "EpsSeries",
    "MultiVectorField", "parse_multivector", "schouten", "jacobiator", "poisson_bracket",
    "MultiDiffOp", "StarProduct", "GaugeOp", "gerstenhaber", "hochschild_d", "hkr_u1", "u1_defect",
    "mc_residual",
    "AdmissibleGraph", "enumerate_graphs", "assemble_operator", "named_graph",
    "WeightCache", "WeightEstimate", "WeightSource", "known_weight", "mc_weight",
    "star_expand", "moyal", "assoc_residual", "gauge_transform", "skew_normalize",
    "formality_residual", "solve_order2_weights",
]
