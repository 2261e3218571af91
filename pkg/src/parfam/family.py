"""The guarded rational-family model and its parameter gradient.

A model is defined by a :class:`ModelSpec`: ``k`` first-layer rationals
``Q_1..Q_k`` feeding unary base functions ``g_1..g_k``, combined by an output
rational over the raw variables followed by the base-function outputs:

    f(x) = Q_out(x_0, ..., x_{n-1}, g_1(Q_1(x)), ..., g_k(Q_k(x)))

The learnable parameters are the stacked polynomial coefficients of all
rationals.  Denominators are divided by their signed Euclidean norm, then
clamped away from zero; sqrt/exp/log are guarded (see :mod:`parfam.guards`),
so evaluation is total for finite inputs up to float overflow.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .algebra import MonomialBasis, enumerate_monomials, monomial_matrix, signed_norm
from .errors import DimensionMismatchError, NonFiniteEvaluationError
from .guards import (
    guard_div,
    guard_div_deriv,
    guard_exp,
    guard_exp_deriv,
    guard_log,
    guard_log_deriv,
    guard_sqrt,
    guard_sqrt_deriv,
)

BASE_KINDS = ("sin", "cos", "exp", "sqrt", "log")

_BASE_VALUE = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": guard_exp,
    "sqrt": guard_sqrt,
    "log": guard_log,
}

_BASE_DERIV = {
    "sin": np.cos,
    "cos": lambda q: -np.sin(q),
    "exp": guard_exp_deriv,
    "sqrt": guard_sqrt_deriv,
    "log": guard_log_deriv,
}


@dataclass(frozen=True)
class BaseFunction:
    """A unary non-rational function with a cap on its power in the output."""

    kind: str
    power_cap: int = 1

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown base function kind {self.kind!r}")
        if self.power_cap < 1:
            raise ValueError("power_cap must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """Discrete choices defining one parametric family instance."""

    n_vars: int
    base_functions: tuple[BaseFunction, ...] = ()
    deg_input_num: int = 0
    deg_input_den: int = 0
    deg_output_num: int = 1
    deg_output_den: int = 0
    max_var_power: int = 3

    def __post_init__(self):
        object.__setattr__(self, "base_functions", tuple(self.base_functions))
        if self.n_vars < 1:
            raise ValueError("n_vars must be >= 1")
        if self.deg_output_num < 1:
            raise ValueError("deg_output_num must be >= 1 (model must be able to be non-constant)")
        if min(self.deg_input_num, self.deg_input_den, self.deg_output_den) < 0:
            raise ValueError("degrees must be non-negative")
        if self.max_var_power < 1:
            raise ValueError("max_var_power must be >= 1")
        if self.base_functions and self.deg_input_num < 1:
            raise ValueError("base functions need deg_input_num >= 1")

    @property
    def k(self) -> int:
        return len(self.base_functions)


@dataclass(frozen=True)
class Block:
    """One contiguous coefficient block of the parameter vector."""

    name: str
    start: int
    stop: int
    is_denominator: bool

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class ParamLayout:
    blocks: tuple[Block, ...]

    @property
    def n_params(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    def slice(self, name: str) -> slice:
        for b in self.blocks:
            if b.name == name:
                return slice(b.start, b.stop)
        raise KeyError(name)


@dataclass(frozen=True)
class ParamVector:
    """Coefficients of one family instance plus their block layout."""

    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.layout.n_params,):
            raise DimensionMismatchError(
                f"got {values.size} values for a layout of {self.layout.n_params} parameters")


@functools.lru_cache(maxsize=None)
def input_bases(spec: ModelSpec) -> tuple[MonomialBasis, MonomialBasis]:
    caps = (spec.max_var_power,) * spec.n_vars
    num = enumerate_monomials(spec.n_vars, spec.deg_input_num, caps)
    den = enumerate_monomials(spec.n_vars, spec.deg_input_den, caps)
    return num, den


@functools.lru_cache(maxsize=None)
def output_bases(spec: ModelSpec) -> tuple[MonomialBasis, MonomialBasis | None]:
    """Bases over (x_0..x_{n-1}, g_1..g_k); both caps apply simultaneously.

    A degree-0 output denominator means "no denominator": the block is
    dropped entirely and the model is a plain polynomial in its inputs.
    """
    m = spec.n_vars + spec.k
    caps = (spec.max_var_power,) * spec.n_vars + tuple(
        bf.power_cap for bf in spec.base_functions)
    num = enumerate_monomials(m, spec.deg_output_num, caps)
    den = enumerate_monomials(m, spec.deg_output_den, caps) if spec.deg_output_den >= 1 else None
    return num, den


@functools.lru_cache(maxsize=None)
def layout_for(spec: ModelSpec) -> ParamLayout:
    in_num, in_den = input_bases(spec)
    out_num, out_den = output_bases(spec)
    blocks = []
    pos = 0
    for i in range(spec.k):
        for suffix, basis, is_den in ((f"q{i+1}.num", in_num, False), (f"q{i+1}.den", in_den, True)):
            blocks.append(Block(suffix, pos, pos + len(basis), is_den))
            pos += len(basis)
    blocks.append(Block("out.num", pos, pos + len(out_num), False))
    pos += len(out_num)
    if out_den is not None:
        blocks.append(Block("out.den", pos, pos + len(out_den), True))
        pos += len(out_den)
    return ParamLayout(tuple(blocks))


def count_params(spec: ModelSpec) -> int:
    """Total coefficient count across all rationals of the family."""
    return layout_for(spec).n_params


def param_vector(spec: ModelSpec, values) -> ParamVector:
    return ParamVector(np.asarray(values, dtype=float), layout_for(spec))


def random_theta(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. standard normal initialization."""
    return rng.standard_normal(count_params(spec))


def _theta_values(theta) -> np.ndarray:
    return theta.values if isinstance(theta, ParamVector) else np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# evaluation engine


def _var_power_product(X: np.ndarray, E: np.ndarray, n_vars: int) -> np.ndarray:
    """prod over the first n_vars coordinates of X**E; shape (N, M)."""
    if n_vars == 0:
        return np.ones((X.shape[0], E.shape[0]))
    with np.errstate(all="ignore"):
        return np.prod(X[:, None, :n_vars] ** E[None, :, :n_vars], axis=2)


class FamilyEvaluator:
    """Caches everything about (spec, X) that does not depend on theta.

    The input-layer design matrices and the variable-only part of the output
    monomials are fixed across optimizer steps; only the base-function
    columns are recomputed per call.  Power caps of 1 (the default for every
    base function) take a multiply-by-mask fast path instead of a power op.
    """

    def __init__(self, spec: ModelSpec, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != spec.n_vars:
            raise DimensionMismatchError(
                f"data has {X.shape[1]} columns, spec expects {spec.n_vars}")
        self.spec = spec
        self.X = X
        self.layout = layout_for(spec)
        in_num, in_den = input_bases(spec)
        out_num, out_den = output_bases(spec)
        k = spec.k
        if k:
            self.phi_num = monomial_matrix(in_num, X)
            self.phi_den = monomial_matrix(in_den, X)
            self._num_slices = [self.layout.slice(f"q{i+1}.num") for i in range(k)]
            self._den_slices = [self.layout.slice(f"q{i+1}.den") for i in range(k)]
        self._out_num_slice = self.layout.slice("out.num")
        self.E_out_num = out_num.exponent_array
        self.E_out_den = out_den.exponent_array if out_den is not None else None
        self.psix_num = _var_power_product(X, self.E_out_num, spec.n_vars)
        # per base function: exponent column over the output numerator basis
        self._gexp_num = [self.E_out_num[:, spec.n_vars + i] for i in range(k)]
        if self.E_out_den is not None:
            self._out_den_slice = self.layout.slice("out.den")
            self.psix_den = _var_power_product(X, self.E_out_den, spec.n_vars)
            self._gexp_den = [self.E_out_den[:, spec.n_vars + i] for i in range(k)]
        else:
            self.psix_den = None
            self._gexp_den = None

    # -- forward -----------------------------------------------------------

    def _g_columns(self, theta: np.ndarray):
        """First layer: returns (G, cache) where G is (N, k)."""
        spec = self.spec
        k = spec.k
        if k == 0:
            return np.zeros((self.X.shape[0], 0)), None
        A = np.stack([theta[s] for s in self._num_slices], axis=1)
        B = np.stack([theta[s] for s in self._den_slices], axis=1)
        norms = np.array([signed_norm(B[:, i]) for i in range(k)])
        nums = self.phi_num @ A
        dens_raw = self.phi_den @ B
        w = dens_raw / norms
        dens = guard_div(w)
        Q = nums / dens
        G = np.column_stack([_BASE_VALUE[bf.kind](Q[:, i])
                             for i, bf in enumerate(spec.base_functions)])
        cache = (A, B, norms, nums, dens_raw, w, dens, Q)
        return G, cache

    @staticmethod
    def _g_factor(G, i, exponents):
        """G_i raised to the per-monomial exponents: (N, M)."""
        if exponents.max() <= 1:
            return np.where(exponents[None, :] == 1, G[:, i:i + 1], 1.0)
        return G[:, i:i + 1] ** exponents[None, :]

    @staticmethod
    def _g_factor_deriv(G, i, exponents):
        """d/dG_i of the factor above."""
        if exponents.max() <= 1:
            return np.where(exponents[None, :] == 1, 1.0, 0.0) * np.ones((G.shape[0], 1))
        return exponents[None, :] * G[:, i:i + 1] ** np.maximum(exponents - 1, 0)[None, :]

    def _psi(self, G, psix, gexp, with_derivs=False):
        """Output monomial matrix and (optionally) its d/dG_i companions."""
        k = self.spec.k
        factors = [self._g_factor(G, i, gexp[i]) for i in range(k)]
        psi = psix.copy()
        for f in factors:
            psi *= f
        if not with_derivs:
            return psi, None
        dpsi = []
        for i in range(k):
            pe = psix * self._g_factor_deriv(G, i, gexp[i])
            for j in range(k):
                if j != i:
                    pe *= factors[j]
            dpsi.append(pe)
        return psi, dpsi

    def values(self, theta) -> np.ndarray:
        """Model outputs; may contain non-finite entries on float overflow."""
        theta = _theta_values(theta)
        self._check_len(theta)
        with np.errstate(all="ignore"):
            G, _ = self._g_columns(theta)
            psi_num, _ = self._psi(G, self.psix_num, self._gexp_num)
            num = psi_num @ theta[self._out_num_slice]
            if self.E_out_den is None:
                return num
            b_out = theta[self._out_den_slice]
            psi_den, _ = self._psi(G, self.psix_den, self._gexp_den)
            den = guard_div((psi_den @ b_out) / signed_norm(b_out))
            return num / den

    # -- reverse mode ------------------------------------------------------

    def values_and_backprop(self, theta) -> tuple[np.ndarray, "callable"]:
        """Returns (f, vjp) where vjp(w) = sum_r w_r * d f_r / d theta."""
        theta = _theta_values(theta)
        self._check_len(theta)
        spec = self.spec
        k = spec.k

        with np.errstate(all="ignore"):
            G, cache = self._g_columns(theta)
            psi_num, dpsi_num = self._psi(G, self.psix_num, self._gexp_num,
                                          with_derivs=bool(k))
            a_out = theta[self._out_num_slice]
            num = psi_num @ a_out

            if self.E_out_den is not None:
                b_out = theta[self._out_den_slice]
                psi_den, dpsi_den = self._psi(G, self.psix_den, self._gexp_den,
                                              with_derivs=bool(k))
                sn_out = signed_norm(b_out)
                den_raw = psi_den @ b_out
                w_out = den_raw / sn_out
                den = guard_div(w_out)
                f = num / den
            else:
                den = None
                f = num

        def vjp(w: np.ndarray) -> np.ndarray:
            grad = np.zeros_like(theta)
            with np.errstate(all="ignore"):
                if den is not None:
                    d_num = w / den
                    d_den = -w * num / den**2
                    d_w_out = d_den * guard_div_deriv(w_out)
                    norm = abs(sn_out)
                    grad[self._out_den_slice] = (
                        psi_den.T @ d_w_out / sn_out
                        - np.sign(sn_out) * (d_w_out @ den_raw) * b_out / norm**3)
                else:
                    d_num = w
                    d_w_out = None
                grad[self._out_num_slice] = psi_num.T @ d_num

                if k:
                    A, B, norms, nums, dens_raw, w_in, dens, Q = cache
                    for i, bf in enumerate(spec.base_functions):
                        d_g = d_num * (dpsi_num[i] @ a_out)
                        if d_w_out is not None:
                            d_g += d_w_out * ((dpsi_den[i] @ b_out) / sn_out)
                        d_q = d_g * _BASE_DERIV[bf.kind](Q[:, i])
                        grad[self._num_slices[i]] = self.phi_num.T @ (d_q / dens[:, i])
                        d_den_i = -d_q * nums[:, i] / dens[:, i] ** 2
                        d_w_i = d_den_i * guard_div_deriv(w_in[:, i])
                        norm = abs(norms[i])
                        grad[self._den_slices[i]] = (
                            self.phi_den.T @ d_w_i / norms[i]
                            - np.sign(norms[i]) * (d_w_i @ dens_raw[:, i]) * B[:, i] / norm**3)
            return grad

        return f, vjp

    def _check_len(self, theta: np.ndarray) -> None:
        if theta.shape != (self.layout.n_params,):
            raise DimensionMismatchError(
                f"theta has {theta.size} entries, spec needs {self.layout.n_params}")


# ---------------------------------------------------------------------------
# public operations


def evaluate(spec: ModelSpec, theta, X) -> np.ndarray:
    """f(x) for every row of X; raises if any output is non-finite."""
    values = FamilyEvaluator(spec, X).values(theta)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteEvaluationError(
            f"model produced a non-finite value at row {bad[0]}", row=int(bad[0]))
    return values


def regularization(spec: ModelSpec, theta) -> tuple[float, np.ndarray]:
    """Sparsity term: L1 of numerator blocks plus L1 of normalized denominators.

    Returns (value, gradient); the gradient uses subgradient 0 at exact zeros
    and treats the sign of the signed norm as locally constant.
    """
    theta = _theta_values(theta)
    layout = layout_for(spec)
    value = 0.0
    grad = np.zeros_like(theta)
    for block in layout.blocks:
        coeffs = theta[block.start:block.stop]
        if block.is_denominator:
            sn = signed_norm(coeffs)
            norm = abs(sn)
            value += float(np.abs(coeffs).sum()) / norm
            grad[block.start:block.stop] = (
                np.sign(coeffs) / norm - np.abs(coeffs).sum() * coeffs / norm**3)
        else:
            value += float(np.abs(coeffs).sum())
            grad[block.start:block.stop] = np.sign(coeffs)
    return value, grad


def gradient(spec: ModelSpec, theta, X, y, lam: float) -> np.ndarray:
    """Gradient of MSE(y, f(X)) + lam * regularization at theta."""
    theta_v = _theta_values(theta)
    evaluator = FamilyEvaluator(spec, X)
    y = np.asarray(y, dtype=float)
    f, vjp = evaluator.values_and_backprop(theta_v)
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise NonFiniteEvaluationError(
            f"model produced a non-finite value at row {bad[0]}", row=int(bad[0]))
    grad = vjp(2.0 * (f - y) / y.size)
    if lam:
        _, reg_grad = regularization(spec, theta_v)
        grad = grad + lam * reg_grad
    return grad


# ---------------------------------------------------------------------------
# symbolic extraction


def _poly_expr(coeffs: np.ndarray, E: np.ndarray, inputs: list[ex.Expr]) -> ex.Expr:
    def monomial(e) -> ex.Expr | None:
        factors = []
        for i, p in enumerate(e):
            if p == 0:
                continue
            base = inputs[i]
            factors.append(base if p == 1 else ex.Binary("^", base, ex.Const(float(p))))
        if not factors:
            return None
        out = factors[0]
        for f in factors[1:]:
            out = ex.Binary("*", out, f)
        return out

    acc: ex.Expr | None = None
    for c, e in zip(coeffs, E):
        if c == 0.0:
            continue
        mono = monomial(e)
        if acc is None:
            if mono is None:
                acc = ex.Const(float(c))
            elif c == 1.0:
                acc = mono
            else:
                acc = ex.Binary("*", ex.Const(float(c)), mono)
            continue
        mag = abs(float(c))
        piece = ex.Const(mag) if mono is None else (
            mono if mag == 1.0 else ex.Binary("*", ex.Const(mag), mono))
        acc = ex.Binary("+" if c > 0 else "-", acc, piece)
    return acc if acc is not None else ex.Const(0.0)


def to_expression(spec: ModelSpec, theta, X=None) -> ex.Expr:
    """Convert fitted parameters into a simplified expression tree.

    The emitted tree evaluates with honest (unguarded) semantics.  For sqrt
    and log arguments whose fitted values are non-positive over the reference
    data X, the argument is negated so the honest tree matches the guarded
    model's absolute-value behaviour there.
    """
    theta = _theta_values(theta)
    layout = layout_for(spec)
    in_num, in_den = input_bases(spec)
    out_num, out_den = output_bases(spec)
    variables: list[ex.Expr] = [ex.Var(i) for i in range(spec.n_vars)]

    q_values = None
    if X is not None and spec.k:
        _, cache = FamilyEvaluator(spec, X)._g_columns(theta)
        q_values = cache[7]

    def rational(num_coeffs, num_E, den_coeffs, den_E, inputs) -> ex.Expr:
        num = _poly_expr(num_coeffs, num_E, inputs)
        if den_coeffs is None:
            return num
        den_tilde = den_coeffs / signed_norm(den_coeffs)
        if np.count_nonzero(den_tilde) == 1 and den_tilde[0] == 1.0 and den_E[0].sum() == 0:
            return num
        den = _poly_expr(den_tilde, den_E, inputs)
        return ex.Binary("/", num, den)

    inputs_out = list(variables)
    for i, bf in enumerate(spec.base_functions):
        arg = rational(
            theta[layout.slice(f"q{i+1}.num")], in_num.exponent_array,
            theta[layout.slice(f"q{i+1}.den")], in_den.exponent_array,
            variables)
        if bf.kind in ("sqrt", "log") and q_values is not None:
            if np.max(q_values[:, i]) <= 0.0:
                arg = ex.Unary("neg", arg)
        inputs_out.append(ex.Unary(bf.kind, arg))

    out_den_coeffs = theta[layout.slice("out.den")] if out_den is not None else None
    tree = rational(
        theta[layout.slice("out.num")], out_num.exponent_array,
        out_den_coeffs, out_den.exponent_array if out_den is not None else None,
        inputs_out)
    return ex.simplify(tree)
