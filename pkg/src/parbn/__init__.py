"""parbn: parameterized Bayesian networks with decision-list CPDs.

Sampling-based inference (forward + Gibbs) over an explicit state KB, and
an evidence-driven program specializer that rewrites every CPD-query's
decision list against the static part of the KB while preserving the
sampler's draw sequence exactly.
"""

from .model import (
    And,
    BodyFormula,
    CategoricalDistribution,
    Clause,
    CountConstraint,
    CPDQuery,
    DecisionList,
    Evidence,
    FalseF,
    GroundRV,
    Literal,
    Model,
    Or,
    ParRVDecl,
    Population,
    TrueF,
    ValidationReport,
    Var,
    cpd_queries_for,
    enumerate_rvs,
    validate_model,
)
from .parser import (
    ParseError,
    SourceSpan,
    parse_evidence,
    parse_model,
    parse_specialized,
    serialize_program,
)
from .statekb import StateKB, init_from_evidence
from .evaluator import apply_cpd, eval_body, eval_count
from .specializer import (
    SpecializedProgram,
    ground_body,
    simplify_body,
    spec_decision_list,
    specialize,
    specialize_body,
    specialize_literal,
    verify_equivalence,
)
from .dependency import (
    DependencyGraph,
    build_dependency_graph,
    check_acyclic,
    children_of,
    topological_order,
)
from .sampling import (
    MarginalEstimate,
    SamplerConfig,
    draw_from,
    exact_marginals,
    forward_sample,
    gibbs_psample,
    run_gibbs,
)
from .rng import SplitMix64

__version__ = "0.1.0"

__all__ = [
    "And", "BodyFormula", "CategoricalDistribution", "Clause", "CountConstraint",
    "CPDQuery", "DecisionList", "Evidence", "FalseF", "GroundRV", "Literal",
    "Model", "Or", "ParRVDecl", "Population", "TrueF", "ValidationReport", "Var",
    "cpd_queries_for", "enumerate_rvs", "validate_model",
    "ParseError", "SourceSpan", "parse_evidence", "parse_model",
    "parse_specialized", "serialize_program",
    "StateKB", "init_from_evidence",
    "apply_cpd", "eval_body", "eval_count",
    "SpecializedProgram", "ground_body", "simplify_body", "spec_decision_list",
    "specialize", "specialize_body", "specialize_literal", "verify_equivalence",
    "DependencyGraph", "build_dependency_graph", "check_acyclic", "children_of",
    "topological_order",
    "MarginalEstimate", "SamplerConfig", "draw_from", "exact_marginals",
    "forward_sample", "gibbs_psample", "run_gibbs",
    "SplitMix64",
]
