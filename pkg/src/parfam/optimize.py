"""Loss assembly, BFGS, basin-hopping, multi-start, and the sparsity finetune.

The local minimizer is a dense BFGS with Armijo backtracking; the global
layer follows the classic basin-hopping loop (perturb, minimize locally,
Metropolis-accept) and always returns the best minimum ever seen.
All randomness flows through a seeded generator, so identical
(seed, config, data) reproduce results bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .algebra import signed_norm
from .errors import ZeroDenominatorError
from .family import FamilyEvaluator, ModelSpec, ParamVector, count_params, layout_for, regularization

GRAD_TOL = 1e-8
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_BACKTRACKS = 40
DEFAULT_THRESHOLDS = (1e-5, 1e-4, 1e-3, 1e-2)
VALIDATION_FRACTION = 0.2
LOCAL_STEPS_PER_DIM = 100

BACKENDS = ("basin_hopping", "multistart_bfgs")


@dataclass(frozen=True)
class FitConfig:
    """Optimization hyperparameters for fitting one family instance."""

    lam: float = 0.001
    bh_iterations: int = 10
    max_local_steps: int | None = None  # None: 100 x problem dimension
    step_size: float = 0.5
    temperature: float = 1.0
    backend: str = "basin_hopping"
    n_starts: int = 10
    seed: int = 0
    threshold_schedule: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.bh_iterations < 1:
            raise ValueError("bh_iterations must be >= 1")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        ts = tuple(float(t) for t in self.threshold_schedule)
        object.__setattr__(self, "threshold_schedule", ts)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("threshold schedule must be strictly increasing")
        if ts and (ts[0] < 1e-5 or ts[-1] > 1e-2):
            raise ValueError("thresholds must lie within [1e-5, 1e-2]")

    def local_steps(self, dim: int) -> int:
        return self.max_local_steps if self.max_local_steps else LOCAL_STEPS_PER_DIM * dim


@dataclass
class BfgsResult:
    theta: np.ndarray
    loss: float
    n_iterations: int
    converged: bool
    hit_nonfinite: bool


@dataclass
class OptimResult:
    """Outcome of one global search."""

    theta_best: np.ndarray
    loss: float
    mse: float
    n_local_searches: int
    n_accepted: int
    wall_time: float


class EvalCounter:
    """Counts model-objective evaluations (forward passes)."""

    def __init__(self):
        self.count = 0


def make_objective(spec: ModelSpec, X, y, lam: float, counter: EvalCounter | None = None):
    """Build (objective, gradient, mse) closures over a cached evaluator.

    Non-finite model outputs yield an objective of +inf rather than an
    exception, so line searches can simply reject such points.
    """
    evaluator = FamilyEvaluator(spec, X)
    y = np.asarray(y, dtype=float)
    counter = counter if counter is not None else EvalCounter()

    def mse(theta) -> float:
        f = evaluator.values(theta)
        if not np.all(np.isfinite(f)):
            return math.inf
        with np.errstate(over="ignore"):
            value = float(np.mean((f - y) ** 2))
        return value

    def objective(theta) -> float:
        counter.count += 1
        m = mse(theta)
        if not math.isfinite(m):
            return math.inf
        if lam:
            reg, _ = regularization(spec, theta)
            return m + lam * reg
        return m

    def grad(theta) -> np.ndarray:
        counter.count += 1
        f, vjp = evaluator.values_and_backprop(theta)
        if not np.all(np.isfinite(f)):
            return np.zeros_like(np.asarray(theta, dtype=float))
        g = vjp(2.0 * (f - y) / y.size)
        if lam:
            _, reg_grad = regularization(spec, theta)
            g = g + lam * reg_grad
        return g

    return objective, grad, mse


def loss(spec: ModelSpec, theta, X, y, lam: float) -> float:
    """MSE plus lam times the (denominator-normalized) L1 term."""
    from .family import evaluate

    f = evaluate(spec, theta, X)
    y = np.asarray(y, dtype=float)
    value = float(np.mean((f - y) ** 2))
    if lam:
        reg, _ = regularization(spec, theta)
        value += lam * reg
    return value


# ---------------------------------------------------------------------------
# local minimizer


def bfgs(objective, grad, theta0, max_steps: int, gtol: float = GRAD_TOL) -> BfgsResult:
    """Dense BFGS with Armijo backtracking; returns the best iterate seen.

    Terminates on gradient norm below `gtol`, on `max_steps` iterations, on
    line-search failure, or (flagged) on a non-finite objective at the start.
    """
    x = np.asarray(theta0, dtype=float).copy()
    f = objective(x)
    if not math.isfinite(f):
        return BfgsResult(x, f, 0, False, True)
    g = grad(x)
    dim = x.size
    identity = np.eye(dim)
    H = identity
    best_x, best_f = x.copy(), f
    n_iter = 0
    converged = False
    hit_nonfinite = False

    while n_iter < max_steps:
        gnorm = float(np.linalg.norm(g))
        if not math.isfinite(gnorm):
            hit_nonfinite = True
            break
        if gnorm < gtol:
            converged = True
            break
        p = -(H @ g)
        slope = float(g @ p)
        if slope >= 0:
            H = identity
            p = -g
            slope = -(gnorm**2)

        alpha = 1.0
        x_new = f_new = None
        for _ in range(ARMIJO_MAX_BACKTRACKS):
            cand = x + alpha * p
            f_cand = objective(cand)
            if math.isfinite(f_cand) and f_cand <= f + ARMIJO_C * alpha * slope:
                x_new, f_new = cand, f_cand
                break
            alpha *= ARMIJO_SHRINK
        if x_new is None:
            break

        g_new = grad(x_new)
        s = x_new - x
        yk = g_new - g
        sy = float(s @ yk)
        if n_iter == 0 and sy > 0:
            H = (sy / float(yk @ yk)) * identity
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yk)):
            rho = 1.0 / sy
            Hy = H @ yk
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * float(yk @ Hy) + rho) * np.outer(s, s))
        x, f, g = x_new, f_new, g_new
        n_iter += 1
        if f < best_f:
            best_x, best_f = x.copy(), f

    return BfgsResult(best_x, best_f, n_iter, converged, hit_nonfinite)


# ---------------------------------------------------------------------------
# global searches


def basin_hopping(objective, grad, theta0, config: FitConfig, mse_fn=None) -> OptimResult:
    """Initial local search, then perturb / minimize / Metropolis rounds.

    Returns the best local minimum ever seen, not merely the last accepted.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    theta0 = np.asarray(theta0, dtype=float)
    max_steps = config.local_steps(theta0.size)

    current = bfgs(objective, grad, theta0, max_steps)
    best_theta, best_loss = current.theta, current.loss
    cur_theta, cur_loss = current.theta, current.loss
    n_accepted = 0
    for _ in range(config.bh_iterations):
        perturbed = cur_theta + rng.uniform(-config.step_size, config.step_size, cur_theta.size)
        res = bfgs(objective, grad, perturbed, max_steps)
        u = rng.uniform()
        delta = res.loss - cur_loss
        if delta <= 0:
            accept = True
        elif math.isfinite(delta):
            accept = math.exp(-delta / config.temperature) >= u
        else:
            accept = False
        if accept:
            cur_theta, cur_loss = res.theta, res.loss
            n_accepted += 1
        if res.loss < best_loss:
            best_theta, best_loss = res.theta, res.loss

    return OptimResult(
        theta_best=best_theta,
        loss=best_loss,
        mse=mse_fn(best_theta) if mse_fn is not None else math.nan,
        n_local_searches=1 + config.bh_iterations,
        n_accepted=n_accepted,
        wall_time=time.perf_counter() - start,
    )


def multistart(objective, grad, spec: ModelSpec, config: FitConfig, mse_fn=None) -> OptimResult:
    """n_starts independent BFGS runs from fresh standard-normal starts."""
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    dim = count_params(spec)
    max_steps = config.local_steps(dim)
    best_theta = None
    best_loss = math.inf
    n_improved = 0
    for _ in range(config.n_starts):
        theta0 = rng.standard_normal(dim)
        res = bfgs(objective, grad, theta0, max_steps)
        if best_theta is None or res.loss < best_loss:
            best_theta, best_loss = res.theta, res.loss
            n_improved += 1
    return OptimResult(
        theta_best=best_theta,
        loss=best_loss,
        mse=mse_fn(best_theta) if mse_fn is not None else math.nan,
        n_local_searches=config.n_starts,
        n_accepted=n_improved,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# sparsity finetuning


def split_validation(X, y, fraction: float = VALIDATION_FRACTION):
    """Deterministic holdout: the last `fraction` of rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    n_val = max(1, int(round(fraction * n))) if n > 1 else 0
    cut = n - n_val
    return X[:cut], y[:cut], X[cut:], y[cut:]


def canonicalize_denominators(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    """Rescale every denominator block to unit signed norm (model-invariant)."""
    theta = np.asarray(theta, dtype=float).copy()
    for block in layout_for(spec).blocks:
        if block.is_denominator:
            try:
                theta[block.start:block.stop] /= signed_norm(theta[block.start:block.stop])
            except ZeroDenominatorError:
                pass
    return theta


def _masked_mse_refit(spec, theta, support, X, y, max_steps):
    """Re-minimize the plain MSE over the surviving coordinates only."""
    evaluator = FamilyEvaluator(spec, X)
    y = np.asarray(y, dtype=float)
    base = theta.copy()

    def embed(phi):
        full = base.copy()
        full[support] = phi
        return full

    def objective(phi):
        f = evaluator.values(embed(phi))
        if not np.all(np.isfinite(f)):
            return math.inf
        with np.errstate(over="ignore"):
            value = float(np.mean((f - y) ** 2))
        return value

    def grad(phi):
        f, vjp = evaluator.values_and_backprop(embed(phi))
        if not np.all(np.isfinite(f)):
            return np.zeros(int(support.sum()))
        return vjp(2.0 * (f - y) / y.size)[support]

    res = bfgs(objective, grad, theta[support], max_steps)
    return embed(res.theta)


def finetune_stages(spec: ModelSpec, theta, X, y, schedule=DEFAULT_THRESHOLDS):
    """Candidate per threshold stage: (validation_mse, n_nonzero, stage, theta).

    Thresholds chain: each stage prunes the previous stage's re-optimized
    coefficients, so supports are nested and the nonzero count never grows.
    """
    values = np.asarray(theta, dtype=float)
    X_tr, y_tr, X_val, y_val = split_validation(X, y)
    val_evaluator = FamilyEvaluator(spec, X_val)
    y_val = np.asarray(y_val, dtype=float)
    max_steps = LOCAL_STEPS_PER_DIM * values.size

    def validation_mse(candidate) -> float:
        if not candidate.any():
            return float(np.mean(y_val**2))
        f = val_evaluator.values(candidate)
        if not np.all(np.isfinite(f)):
            return math.inf
        with np.errstate(over="ignore"):
            value = float(np.mean((f - y_val) ** 2))
        return value

    current = canonicalize_denominators(spec, values)
    candidates = []
    for stage, threshold in enumerate(schedule):
        current = current.copy()
        current[np.abs(current) < threshold] = 0.0
        support = current != 0.0
        if support.any():
            current = _masked_mse_refit(spec, current, support, X_tr, y_tr, max_steps)
            current = canonicalize_denominators(spec, current)
            current[~support] = 0.0
        else:
            current = np.zeros_like(current)
        candidates.append((validation_mse(current), int(np.count_nonzero(current)),
                           stage, current.copy()))
    return candidates


def finetune(spec: ModelSpec, theta, X, y, schedule=DEFAULT_THRESHOLDS):
    """Ascending-threshold pruning with MSE re-optimization per stage.

    Each stage zeroes every coefficient below its threshold (denominator
    blocks are compared on their canonical unit-norm scale), re-optimizes the
    survivors by plain MSE on the training split with the zeroed coordinates
    frozen, and records the candidate.  The candidate with the lowest
    validation MSE wins; MSEs within a relative 1e-9 count as tied so the
    fewer-nonzeros tie-break can act, then the earlier stage wins.  If a
    stage zeroes everything the constant-zero model stands in.
    """
    wrap = isinstance(theta, ParamVector)
    values = theta.values if wrap else np.asarray(theta, dtype=float)
    candidates = finetune_stages(spec, values, X, y, schedule)
    best_mse = min(c[0] for c in candidates)
    tie_band = best_mse + 1e-9 * abs(best_mse) + 1e-300
    best = min(candidates, key=lambda c: (c[0] > tie_band, c[1], c[2]))
    result = best[3]
    return ParamVector(result, layout_for(spec)) if wrap else result
