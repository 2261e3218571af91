"""Benchmark metrics: R^2, the symbolic-solution oracle, complexity, noise.

The symbolic-solution check is evaluation-based, not algebraic: two
expressions count as equivalent when they differ by a constant offset or a
constant factor on a dense sample of the domain.  This is a conservative
approximation of a computer-algebra equivalence check and is reported as
such wherever it appears in output documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expressions as ex

ACCURACY_R2 = 0.999
MATCH_SAMPLES = 256
MATCH_STD_TOL = 1e-6
MATCH_RATIO_FLOOR = 1e-8
MATCH_MAX_BAD_FRACTION = 0.05
CONSTANT_GRANULARITY = 1e-4


@dataclass
class EvalReport:
    """Per-problem benchmark outcome."""

    r2: float
    accuracy_hit: bool
    symbolic_hit: bool
    complexity: int
    wall_time: float


def r_squared(y, y_hat) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot.

    Degenerate zero-variance targets give 1.0 on an exact match and -inf
    otherwise (the sentinel flags a meaningless comparison).
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.size == 0 or y.shape != y_hat.shape:
        raise ValueError("r_squared needs two equal-length nonempty vectors")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if np.array_equal(y, y_hat) else -math.inf
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MatchDetails:
    matched: bool
    mode: str | None  # "difference" | "ratio" | None
    flag: str | None  # diagnostic when evaluation failed


def _round_constants(tree: ex.Expr) -> ex.Expr:
    grain = CONSTANT_GRANULARITY

    def snap(c: float) -> float:
        snapped = round(c / grain) * grain
        return snapped if abs(c - snapped) < grain else c

    return ex.map_constants(tree, snap)


def symbolic_match_details(pred: ex.Expr, truth: ex.Expr, domain, rng) -> MatchDetails:
    """Constant-offset / constant-factor equivalence on sampled points.

    Args:
        pred: candidate expression; its constants are snapped to the 1e-4
            grid before comparison.
        truth: reference expression, used as-is.
        domain: (low, high) arrays or scalars defining the sampling box.
        rng: numpy Generator for the sample.
    """
    low, high = domain
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    n_vars = max(
        [i + 1 for i in ex.variables_used(pred) | ex.variables_used(truth)] or [1])
    if low.size == 1:
        low = np.repeat(low, n_vars)
        high = np.repeat(high, n_vars)
    X = rng.uniform(low, high, size=(MATCH_SAMPLES, low.size))

    p = ex.evaluate(_round_constants(pred), X)
    t = ex.evaluate(truth, X)
    ok = np.isfinite(p) & np.isfinite(t)
    if ok.mean() < 1.0 - MATCH_MAX_BAD_FRACTION:
        return MatchDetails(False, None, flag="non-finite evaluations on >5% of samples")
    p, t = p[ok], t[ok]

    diff = p - t
    if diff.std() < MATCH_STD_TOL * (1.0 + abs(float(diff.mean()))):
        return MatchDetails(True, "difference", None)

    big = np.abs(t) > MATCH_RATIO_FLOOR
    if big.sum() >= MATCH_SAMPLES // 2:
        ratio = p[big] / t[big]
        if ratio.std() < MATCH_STD_TOL * abs(float(ratio.mean())):
            return MatchDetails(True, "ratio", None)
    return MatchDetails(False, None, None)


def symbolic_match(pred: ex.Expr, truth: ex.Expr, domain, rng) -> bool:
    return symbolic_match_details(pred, truth, domain, rng).matched


def complexity(expr: ex.Expr) -> int:
    """Node count after constant collapsing and zero pruning."""
    return ex.count_nodes(ex.simplify(expr))


def add_noise(y, sigma: float, rng) -> np.ndarray:
    """Targets plus N(0, sigma^2 * mean(y^2)) noise; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    y = np.asarray(y, dtype=float)
    if sigma == 0.0:
        return y.copy()
    scale = sigma * math.sqrt(float(np.mean(y**2)))
    return y + rng.normal(0.0, scale, size=y.shape) if scale > 0 else y.copy()
