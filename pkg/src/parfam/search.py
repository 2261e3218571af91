"""Traversal of family instances from simple to complex, driving fits.

The order is fixed: one pure polynomial at the maximal output-numerator
degree, then purely rational models (denominator degree in the outer loop),
then every combination of base-function multiset and degree tuple, with the
multiset loop innermost.  Fitting a dataset walks this list, runs the global
optimizer plus the sparsity finetune on each instance, and stops early once
the validation R^2 clears the success bar.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import expressions as ex
from .errors import NoCandidateError
from .family import BaseFunction, FamilyEvaluator, ModelSpec, random_theta, to_expression
from .metrics import r_squared
from .optimize import (
    EvalCounter,
    FitConfig,
    basin_hopping,
    finetune,
    make_objective,
    multistart,
    split_validation,
)


@dataclass(frozen=True)
class SearchConfig:
    """Bounds of the family traversal plus stopping rules."""

    n_vars: int = 1
    max_deg_input_num: int = 2
    max_deg_input_den: int = 2
    max_deg_output_num: int = 4
    max_deg_output_den: int = 3
    max_var_power: int = 3
    base_function_pool: tuple[str, ...] = ("sqrt", "cos", "exp")
    max_base_functions: int = 1
    success_r2: float = 0.999
    time_budget: float = 28800.0
    eval_budget: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "base_function_pool", tuple(self.base_function_pool))
        if not (0.0 < self.success_r2 <= 1.0):
            raise ValueError("success_r2 must lie in (0, 1]")
        if self.time_budget <= 0 or self.eval_budget <= 0:
            raise ValueError("budgets must be positive")


@dataclass
class FitResult:
    """Best candidate of one full search."""

    expression: ex.Expr
    r2_train: float
    r2_val: float
    r2_test: float | None
    n_nonzero: int
    spec: ModelSpec
    spec_index: int
    theta: np.ndarray
    final_loss: float
    seed: int
    wall_time: float
    eval_count: int

    @property
    def expression_text(self) -> str:
        return ex.to_string(self.expression)


def traverse_specs(config: SearchConfig) -> list[ModelSpec]:
    """Deterministic, duplicate-free instance list, simplest first.

    Base-function multisets are enumerated with repetition in non-decreasing
    pool order, so duplicates of the same kind are allowed but permutations
    are not produced twice.
    """
    specs = [ModelSpec(
        n_vars=config.n_vars,
        deg_output_num=config.max_deg_output_num,
        max_var_power=config.max_var_power,
    )]
    for d2_out in range(1, config.max_deg_output_den + 1):
        for d1_out in range(1, config.max_deg_output_num + 1):
            specs.append(ModelSpec(
                n_vars=config.n_vars,
                deg_output_num=d1_out,
                deg_output_den=d2_out,
                max_var_power=config.max_var_power,
            ))
    for n_funcs in range(1, config.max_base_functions + 1):
        for d2_out in range(0, config.max_deg_output_den + 1):
            for d1_out in range(1, config.max_deg_output_num + 1):
                for d2_in in range(0, config.max_deg_input_den + 1):
                    for d1_in in range(1, config.max_deg_input_num + 1):
                        for kinds in itertools.combinations_with_replacement(
                                config.base_function_pool, n_funcs):
                            specs.append(ModelSpec(
                                n_vars=config.n_vars,
                                base_functions=tuple(BaseFunction(k) for k in kinds),
                                deg_input_num=d1_in,
                                deg_input_den=d2_in,
                                deg_output_num=d1_out,
                                deg_output_den=d2_out,
                                max_var_power=config.max_var_power,
                            ))
    return specs


def _spec_seed(root_seed: int, spec_index: int, stream: int) -> int:
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(spec_index, stream))
    return int(ss.generate_state(1)[0])


def _model_r2(spec: ModelSpec, theta, X, y) -> float:
    values = FamilyEvaluator(spec, X).values(theta)
    if not np.all(np.isfinite(values)):
        return -math.inf
    if np.ptp(y) == 0.0:
        # constant targets: R^2 is degenerate, fall back to near-interpolation
        mse = float(np.mean((values - y) ** 2))
        return 1.0 if mse <= 1e-12 * (1.0 + float(np.mean(y**2))) else -math.inf
    return r_squared(y, values)


def _tree_r2(tree: ex.Expr, X, y) -> float:
    values = ex.evaluate(tree, X)
    if not np.all(np.isfinite(values)):
        return -math.inf
    if np.ptp(y) == 0.0:
        mse = float(np.mean((values - y) ** 2))
        return 1.0 if mse <= 1e-12 * (1.0 + float(np.mean(y**2))) else -math.inf
    return r_squared(y, values)


def fit_auto(X, y, search_config: SearchConfig, fit_config: FitConfig) -> FitResult:
    """Walk the traversal, fit each instance, return the best candidate.

    Candidates are ordered by validation R^2, then fewer nonzero
    coefficients, then earlier position in the traversal.  The time and
    evaluation budgets are checked between instances, so at most one
    instance's work can overshoot them.  The reported R^2 values are
    recomputed from the extracted expression tree, which is what a caller
    ultimately receives.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 data rows")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y disagree on the number of rows")

    config = replace(search_config, n_vars=X.shape[1])
    specs = traverse_specs(config)
    if not specs:
        raise NoCandidateError("traversal produced no model instances")

    X_tr, y_tr, X_val, y_val = split_validation(X, y)
    counter = EvalCounter()
    started = time.perf_counter()
    best = None  # (sort_key, spec_index, spec, theta, val_r2)

    for index, spec in enumerate(specs):
        if index > 0:
            if time.perf_counter() - started > config.time_budget:
                break
            if counter.count > config.eval_budget:
                break
        objective, grad, mse_fn = make_objective(
            spec, X_tr, y_tr, fit_config.lam, counter)
        local_cfg = replace(fit_config, seed=_spec_seed(fit_config.seed, index, 1))
        if fit_config.backend == "multistart_bfgs":
            result = multistart(objective, grad, spec, local_cfg, mse_fn)
        else:
            rng = np.random.default_rng(_spec_seed(fit_config.seed, index, 0))
            theta0 = random_theta(spec, rng)
            result = basin_hopping(objective, grad, theta0, local_cfg, mse_fn)
        theta = finetune(spec, result.theta_best, X, y, fit_config.threshold_schedule)
        val_r2 = _model_r2(spec, theta, X_val, y_val)
        if math.isfinite(val_r2):
            key = (-val_r2, int(np.count_nonzero(theta)), index)
            if best is None or key < best[0]:
                best = (key, index, spec, theta, val_r2)
        if val_r2 > config.success_r2:
            break

    if best is None:
        raise NoCandidateError(
            "no finite candidate within the time/evaluation budget")

    _, index, spec, theta, _ = best
    tree = to_expression(spec, theta, X_tr)
    from .optimize import loss as loss_fn

    try:
        final_loss = loss_fn(spec, theta, X_tr, y_tr, fit_config.lam)
    except Exception:
        final_loss = math.inf
    return FitResult(
        expression=tree,
        r2_train=_tree_r2(tree, X_tr, y_tr),
        r2_val=_tree_r2(tree, X_val, y_val),
        r2_test=None,
        n_nonzero=int(np.count_nonzero(theta)),
        spec=spec,
        spec_index=index,
        theta=theta,
        final_loss=final_loss,
        seed=fit_config.seed,
        wall_time=time.perf_counter() - started,
        eval_count=counter.count,
    )
