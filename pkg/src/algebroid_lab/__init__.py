"""Verification toolkit for Lie algebroid and Dirac-structure models.

Symbolic scalar fields on box charts give exact derivatives for every
axiom formula; verification happens numerically at seeded sample points,
with one SVD rank policy for all transversality and subspace tests, and a
fixed-step RK4 integrator for transport along algebroid paths.
"""

from .action import ActionModel, LinearCombinationField, MoritaWitness, \
    QuotientChartModel, SolvedField, TensorQuotientContext, check_action, \
    check_module, check_quasi_equivalence, check_strong_morita, flip_side, \
    leaf_action_check, pointwise_bracket, poisson_map_action, \
    probe_completeness, tensor_distribution, unique_lift_action
from .algebroid import AlgebroidSection, LieAlgebroidModel, MorphismData, \
    bracket_of_sections, check_algebroid_axioms, check_morphism, \
    construct_standard, cotangent_algebroid, fibered_product_fiber, \
    opposite_algebroid, pullback_fiber, tangent_algebroid, \
    transformation_algebroid
from .apath import APath, IntegratorConfig, Trajectory, \
    check_transport_invariances, integrate_apath, psi_transport, \
    transport_along, validate_apath
from .calculus import Bivector, ChartDomain, OneForm, ScalarField, \
    SmoothMap, TwoForm, VectorField, cartan, eval_and_derive, exterior_d, \
    interior, interval_chart, lie_bracket_vf, lie_derivative, pullback, \
    pullback_pushforward, pushforward_at
from .dirac import DiracMapData, DiracStructureModel, GaugeResult, \
    GeneralizedSection, check_dirac, check_dirac_map, courant_bracket, \
    dirac_algebroid, frames_equal, gauge_transform, graph_of_bivector, \
    graph_of_two_form, induced_dirac_action, pairing
from .kernel import backend_name
from .report import CheckReport
from .runner import report_json, report_text, run_checks
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
