"""Synthetic problem generation: sparse coefficient sampling plus filtering.

Functions are drawn from a fixed family instance by choosing a small random
support per polynomial block (1-3 nonzeros by default), forcing the support
to witness every structural choice of the instance (its maximal degrees and
each declared base function) so the generated function is not covered by a
strictly smaller instance, and sampling the surviving coefficients from a
centered normal.  Datasets are sampled uniformly on a box; rows whose target
exceeds the cap (or is non-finite) are resampled a few times before the
whole function is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .family import (
    FamilyEvaluator,
    ModelSpec,
    ParamVector,
    input_bases,
    layout_for,
    output_bases,
    param_vector,
    to_expression,
)

COEFF_STD = 3.0  # values are N(0, 9)


@dataclass(frozen=True)
class GenConfig:
    spec: ModelSpec
    n_points: int = 200
    domain_low: float = 1.0
    domain_high: float = 5.0
    min_nonzero: int = 1
    max_nonzero: int = 3
    coeff_std: float = COEFF_STD
    y_cap: float = 1000.0
    max_resamples: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.domain_low >= self.domain_high:
            raise ValueError("domain_low must be < domain_high")
        if self.y_cap <= 0:
            raise ValueError("y_cap must be positive")
        if not (1 <= self.min_nonzero <= self.max_nonzero):
            raise ValueError("need 1 <= min_nonzero <= max_nonzero")


def _block_exponents(spec: ModelSpec, block_name: str) -> np.ndarray:
    in_num, in_den = input_bases(spec)
    out_num, out_den = output_bases(spec)
    if block_name == "out.num":
        return out_num.exponent_array
    if block_name == "out.den":
        return out_den.exponent_array
    basis = in_num if block_name.endswith(".num") else in_den
    return basis.exponent_array


def sample_function(config: GenConfig, rng: np.random.Generator) -> tuple[ParamVector, ex.Expr]:
    """Draw sparse coefficients with minimality forcing; return (theta, tree).

    Per block, the support always contains one monomial of the block's
    maximal attainable total degree; the output numerator additionally uses
    every base function at least once.  Extra support indices are then drawn
    until the block's sampled nonzero count is reached.
    """
    spec = config.spec
    layout = layout_for(spec)
    theta = np.zeros(layout.n_params)

    for block in layout.blocks:
        E = _block_exponents(spec, block.name)
        size = E.shape[0]
        degrees = E.sum(axis=1)
        forced: set[int] = set()
        top = np.flatnonzero(degrees == degrees.max())
        forced.add(int(rng.choice(top)))
        if block.name == "out.num":
            for i in range(spec.k):
                uses = np.flatnonzero(E[:, spec.n_vars + i] > 0)
                forced.add(int(rng.choice(uses)))
        count = int(rng.integers(config.min_nonzero, config.max_nonzero + 1))
        count = min(max(count, len(forced)), size)
        support = list(forced)
        remaining = [j for j in range(size) if j not in forced]
        if count > len(forced):
            extra = rng.choice(len(remaining), size=count - len(forced), replace=False)
            support.extend(remaining[int(e)] for e in extra)
        values = rng.normal(0.0, config.coeff_std, size=len(support))
        theta[[block.start + j for j in support]] = values

    tree = to_expression(spec, theta)
    return param_vector(spec, theta), tree


def sample_dataset(f, config: GenConfig, rng: np.random.Generator):
    """Uniform box sample with violation resampling; None signals rejection.

    Args:
        f: callable mapping an (n, n_vars) array to n target values.
    Returns:
        (X, y) with all targets finite and |y| <= y_cap, or None if
        violations persist after max_resamples rounds.
    """
    n_vars = config.spec.n_vars
    X = rng.uniform(config.domain_low, config.domain_high, size=(config.n_points, n_vars))
    with np.errstate(all="ignore"):
        y = np.asarray(f(X), dtype=float)
    for _ in range(config.max_resamples):
        bad = ~np.isfinite(y) | (np.abs(y) > config.y_cap)
        if not bad.any():
            break
        X[bad] = rng.uniform(config.domain_low, config.domain_high,
                             size=(int(bad.sum()), n_vars))
        with np.errstate(all="ignore"):
            y[bad] = np.asarray(f(X[bad]), dtype=float)
    bad = ~np.isfinite(y) | (np.abs(y) > config.y_cap)
    if bad.any():
        return None
    return X, y


def generate_problem(config: GenConfig, rng: np.random.Generator):
    """One accepted (X, y, truth tree) triple, or None if rejected.

    The target values come from the guarded model; the ground-truth tree is
    re-extracted against the accepted sample so sqrt/log sign choices match
    the data.
    """
    theta, _ = sample_function(config, rng)

    def f(X):
        return FamilyEvaluator(config.spec, X).values(theta.values)

    drawn = sample_dataset(f, config, rng)
    if drawn is None:
        return None
    X, y = drawn
    tree = to_expression(config.spec, theta.values, X)
    return X, y, tree
