"""Symbolic regression over structured rational-function families."""

from .algebra import (
    MonomialBasis,
    RationalSpec,
    enumerate_monomials,
    eval_poly,
    eval_rational,
    monomial_matrix,
)
from .datagen import GenConfig, generate_problem, sample_dataset, sample_function
from .expressivity import (
    ExprCensus,
    TreeParams,
    approx_c,
    approx_d,
    cardano_x1,
    census,
    coverage_ratio,
    exact_counts,
    ratio_table,
    series_counts,
)
from .family import (
    BaseFunction,
    FamilyEvaluator,
    ModelSpec,
    ParamVector,
    count_params,
    evaluate,
    gradient,
    param_vector,
    to_expression,
)
from .guards import guard_div, guard_exp, guard_log, guard_sqrt
from .metrics import (
    EvalReport,
    add_noise,
    complexity,
    r_squared,
    symbolic_match,
    symbolic_match_details,
)
from .optimize import (
    FitConfig,
    OptimResult,
    basin_hopping,
    bfgs,
    finetune,
    loss,
    multistart,
)
from .search import FitResult, SearchConfig, fit_auto, traverse_specs

__version__ = "0.1.0"

__all__ = [
    "BaseFunction", "EvalReport", "ExprCensus", "FamilyEvaluator", "FitConfig",
    "FitResult", "GenConfig", "ModelSpec", "MonomialBasis", "OptimResult",
    "ParamVector", "RationalSpec", "SearchConfig", "TreeParams",
    "add_noise", "approx_c", "approx_d", "basin_hopping", "bfgs", "cardano_x1",
    "census", "complexity", "count_params", "coverage_ratio", "enumerate_monomials",
    "eval_poly", "eval_rational", "evaluate", "exact_counts", "finetune",
    "fit_auto", "generate_problem", "gradient", "guard_div", "guard_exp",
    "guard_log", "guard_sqrt", "loss", "monomial_matrix", "multistart",
    "param_vector", "r_squared", "ratio_table", "sample_dataset",
    "sample_function", "series_counts", "symbolic_match",
    "symbolic_match_details", "to_expression", "traverse_specs",
]
