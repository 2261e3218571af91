"""Multivariate polynomials under degree caps, and normalized rational functions.

A polynomial is a coefficient vector over a :class:`MonomialBasis`; a rational
function is a pair of such polynomials whose denominator is normalized by its
(signed) Euclidean norm before the division guard is applied.  Only numeric
evaluation and coefficient gradients live here; nothing symbolic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ZeroDenominatorError
from .guards import guard_div

ZERO_NORM_EPS = 1e-30


@dataclass(frozen=True)
class MonomialBasis:
    """An ordered set of exponent vectors over a fixed number of inputs.

    The order is graded lexicographic (total degree first, then the first
    input binds strongest), fixed once so that the coefficient-index to
    monomial mapping is reproducible across runs.
    """

    n_inputs: int
    exponents: tuple[tuple[int, ...], ...]
    max_total_degree: int
    per_input_caps: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.exponents)

    @property
    def exponent_array(self) -> np.ndarray:
        return np.array(self.exponents, dtype=np.int64).reshape(len(self.exponents), self.n_inputs)


@dataclass(frozen=True)
class RationalSpec:
    """Numerator/denominator bases of one rational function."""

    numerator_basis: MonomialBasis
    denominator_basis: MonomialBasis

    def __post_init__(self):
        if (0,) * self.denominator_basis.n_inputs not in self.denominator_basis.exponents:
            raise ValueError("denominator basis must contain the constant monomial")


def enumerate_monomials(n_inputs: int, max_total_degree: int, per_input_caps) -> MonomialBasis:
    """All exponent vectors with total degree and per-input caps, graded-lex order.

    Args:
        n_inputs: number of inputs (>= 1).
        max_total_degree: cap on the sum of exponents (>= 0).
        per_input_caps: per-input exponent cap, one entry per input (>= 0).
    """
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    caps = tuple(int(c) for c in per_input_caps)
    if len(caps) != n_inputs:
        raise DimensionMismatchError(
            f"expected {n_inputs} per-input caps, got {len(caps)}")
    if max_total_degree < 0 or any(c < 0 for c in caps):
        raise ValueError("degree caps must be non-negative")

    ranges = [range(min(c, max_total_degree) + 1) for c in caps]
    vectors = [e for e in itertools.product(*ranges) if sum(e) <= max_total_degree]
    vectors.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return MonomialBasis(
        n_inputs=n_inputs,
        exponents=tuple(vectors),
        max_total_degree=max_total_degree,
        per_input_caps=caps,
    )


def monomial_matrix(basis: MonomialBasis, X: np.ndarray) -> np.ndarray:
    """Design matrix of monomial values, shape (n_rows, len(basis)).

    Row r, column j holds prod_i X[r, i] ** e[j, i].  This is also the
    coefficient gradient of :func:`eval_poly` at each row.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != basis.n_inputs:
        raise DimensionMismatchError(
            f"input has {X.shape[1]} columns, basis expects {basis.n_inputs}")
    E = basis.exponent_array
    return np.prod(X[:, None, :] ** E[None, :, :], axis=2)


def eval_poly(coeffs, basis: MonomialBasis, x) -> np.ndarray | float:
    """Evaluate sum_j coeffs[j] * monomial_j(x).

    `x` may be a single point (1-D) or a batch (2-D); the result matches.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (len(basis),):
        raise DimensionMismatchError(
            f"got {coeffs.size} coefficients for a basis of size {len(basis)}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    values = monomial_matrix(basis, x) @ coeffs
    return float(values[0]) if single else values


def signed_norm(coeffs) -> float:
    """Euclidean norm carrying the sign of the first nonzero coefficient.

    Dividing a denominator by its signed norm makes the rational function
    invariant under scaling the denominator block by any nonzero factor,
    negative ones included.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    norm = float(np.linalg.norm(coeffs))
    if norm < ZERO_NORM_EPS:
        raise ZeroDenominatorError("denominator coefficients are all zero")
    nonzero = np.flatnonzero(coeffs)
    return norm if coeffs[nonzero[0]] > 0 else -norm


def eval_rational(num_coeffs, den_coeffs, spec: RationalSpec, x) -> np.ndarray | float:
    """numerator(x) / guard_div(denominator(x) / signed_norm(den_coeffs))."""
    norm = signed_norm(den_coeffs)
    num = eval_poly(num_coeffs, spec.numerator_basis, x)
    den = eval_poly(den_coeffs, spec.denominator_basis, x)
    out = np.asarray(num) / guard_div(np.asarray(den) / norm)
    return float(out) if np.ndim(x) == 1 else out
