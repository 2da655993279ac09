"""
civ: conditional instrumental sets in acyclic directed mixed graphs
Validity, comparison and optimal construction of instrument/conditioning tuples for two-stage
least squares, with a linear SEM engine and a Monte Carlo harness
"""
from .models.civ_models import (
    CondInstrumentSet, Dominance, Edge, EdgeKind, ErrorFamily, EstimateReport, GreedyAction,
    GreedyTrace, GuardMode, OptimalResult, StudyConfig, ValidityReport, Verdict
)
from .services.admg_core import (
    Admg, ancestors, causal_nodes, children, descendants, district, district_plus, forbidden_nodes,
    has_causal_path, is_reduced, latent_projection, load_graph, parents, parse_graph, random_admg,
    reduce_for_estimation, remove_causal_out_edges, serialize_graph, siblings, topological_order
)
from .services.avar import (
    AvarQuery, avar_new_formula, avar_ols, avar_traditional, instrument_strength, residual_variance
)
from .services.criteria import (
    compare_cis, conditioning_is_safe, dominance_conditions, enumerate_valid_cis, is_valid_adjustment,
    is_valid_cis, suggests_instrument_over_conditioning
)
from .services.estimator import ols, tsls
from .services.greedy import greedy_forward
from .services.msep import m_separated, reachable
from .services.optimal import optimal_cis
from .services.sem import (
    CanonicalSem, CovModel, DataMatrix, LinearSem, canonical_sem, conditional_cov, implied_covariance,
    load_linear_sem, marginal_linear_sem, random_sem, regression_coef, sample, total_effect
)
from .services.simulate import StudyResult, run_study
from .utils.errors import CivError

__all__ = [
    "Admg", "AvarQuery", "CanonicalSem", "CivError", "CondInstrumentSet", "CovModel", "DataMatrix",
    "Dominance", "Edge", "EdgeKind", "ErrorFamily", "EstimateReport", "GreedyAction", "GreedyTrace",
    "GuardMode", "LinearSem", "OptimalResult", "StudyConfig", "StudyResult", "ValidityReport", "Verdict",
    "ancestors", "avar_new_formula", "avar_ols", "avar_traditional", "canonical_sem", "causal_nodes", "children",
    "compare_cis", "conditional_cov", "conditioning_is_safe", "descendants", "district", "district_plus",
    "dominance_conditions", "enumerate_valid_cis", "forbidden_nodes", "greedy_forward", "has_causal_path",
    "implied_covariance", "instrument_strength", "is_reduced", "is_valid_adjustment", "is_valid_cis",
    "latent_projection", "load_graph", "load_linear_sem", "m_separated", "marginal_linear_sem", "ols",
    "optimal_cis", "parents", "parse_graph", "random_admg", "random_sem", "reachable", "reduce_for_estimation",
    "regression_coef", "remove_causal_out_edges", "residual_variance", "run_study", "sample", "serialize_graph",
    "siblings", "suggests_instrument_over_conditioning", "topological_order", "total_effect", "tsls",
]
