import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from parfam.algebra import (
    MonomialBasis,
    RationalSpec,
    enumerate_monomials,
    eval_poly,
    eval_rational,
    monomial_matrix,
    signed_norm,
)
from parfam.errors import DimensionMismatchError, ZeroDenominatorError


def lattice_count_oracle(n, d, caps):
    """Count admissible exponent vectors via polynomial multiplication.

    The number of lattice points equals the sum of the first d+1 coefficients
    of prod_i (1 + z + ... + z^caps[i]).
    """
    poly = [1]
    for cap in caps:
        factor = [1] * (cap + 1)
        out = [0] * (len(poly) + len(factor) - 1)
        for i, a in enumerate(poly):
            for j, b in enumerate(factor):
                out[i + j] += a * b
        poly = out
    return sum(poly[: d + 1])


class TestEnumerateMonomials:
    def test_univariate_quadratic(self):
        basis = enumerate_monomials(1, 2, [2])
        assert basis.exponents == ((0,), (1,), (2,))

    def test_two_vars_degree_two(self):
        basis = enumerate_monomials(2, 2, [2, 2])
        assert len(basis) == 6
        assert basis.exponents == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    def test_var_power_cap(self):
        basis = enumerate_monomials(2, 4, [3, 3])
        assert (4, 0) not in basis.exponents
        assert (0, 4) not in basis.exponents
        assert (3, 1) in basis.exponents

    def test_constant_only(self):
        assert enumerate_monomials(3, 0, [2, 2, 2]).exponents == ((0, 0, 0),)

    def test_rejects_empty_variable_case(self):
        with pytest.raises(ValueError):
            enumerate_monomials(0, 2, [])

    def test_rejects_cap_count_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            enumerate_monomials(2, 2, [2])

    @given(
        n=st.integers(1, 3),
        d=st.integers(0, 5),
        caps=st.lists(st.integers(0, 5), min_size=3, max_size=3),
    )
    @settings(max_examples=60)
    def test_count_matches_lattice_oracle(self, n, d, caps):
        caps = caps[:n]
        basis = enumerate_monomials(n, d, caps)
        assert len(basis) == lattice_count_oracle(n, d, caps)
        assert len(set(basis.exponents)) == len(basis)


class TestEvalPoly:
    def test_hand_values(self):
        basis = enumerate_monomials(1, 2, [2])
        assert eval_poly([1.0, 1.0, 1.0], basis, np.array([2.0])) == 7.0

    def test_zero_polynomial(self):
        basis = enumerate_monomials(2, 2, [2, 2])
        X = np.array([[1.0, 2.0], [-3.0, 0.5]])
        assert_allclose(eval_poly(np.zeros(6), basis, X), 0.0)

    def test_cross_term(self):
        basis = MonomialBasis(2, ((0, 0), (1, 1)), 2, (1, 1))
        assert eval_poly([2.0, -1.0], basis, np.array([3.0, 4.0])) == -10.0

    def test_length_mismatch(self):
        basis = enumerate_monomials(1, 2, [2])
        with pytest.raises(DimensionMismatchError):
            eval_poly([1.0, 2.0], basis, np.array([0.0]))

    @given(st.integers(0, 2**31))
    @settings(max_examples=30)
    def test_coefficient_gradient_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        basis = enumerate_monomials(2, 3, [3, 3])
        coeffs = rng.standard_normal(len(basis))
        x = rng.uniform(-2.0, 2.0, size=2)
        analytic = monomial_matrix(basis, x[None, :])[0]
        h = 1e-6
        for j in range(len(basis)):
            up, down = coeffs.copy(), coeffs.copy()
            up[j] += h
            down[j] -= h
            fd = (eval_poly(up, basis, x) - eval_poly(down, basis, x)) / (2 * h)
            scale = max(1.0, abs(analytic[j]))
            assert abs(fd - analytic[j]) < 1e-6 * scale


class TestEvalRational:
    def quad_spec(self):
        num = enumerate_monomials(1, 2, [2])
        den = enumerate_monomials(1, 1, [1])
        return RationalSpec(num, den)

    def test_constant_over_constant(self):
        num = enumerate_monomials(1, 0, [0])
        den = enumerate_monomials(1, 0, [0])
        spec = RationalSpec(num, den)
        assert eval_rational([1.0], [2.0], spec, np.array([5.0])) == 1.0

    def test_denominator_clamped(self):
        num = enumerate_monomials(1, 1, [1])
        den = enumerate_monomials(1, 1, [1])
        spec = RationalSpec(num, den)
        # 1 / x with x = 1e-9: denominator clamps at 1e-5
        value = eval_rational([1.0, 0.0], [0.0, 1.0], spec, np.array([1e-9]))
        assert value == pytest.approx(1e5)

    def test_all_zero_denominator_rejected(self):
        spec = self.quad_spec()
        with pytest.raises(ZeroDenominatorError):
            eval_rational([1.0, 0.0, 0.0], [0.0, 0.0], spec, np.array([1.0]))

    def test_denominator_basis_requires_constant(self):
        num = enumerate_monomials(1, 1, [1])
        bad_den = MonomialBasis(1, ((1,),), 1, (1,))
        with pytest.raises(ValueError):
            RationalSpec(num, bad_den)

    @given(st.integers(0, 2**31), st.floats(-10, 10))
    @settings(max_examples=80)
    def test_scaling_invariance(self, seed, gamma):
        if abs(gamma) < 1e-3:
            gamma = 1.7
        rng = np.random.default_rng(seed)
        spec = self.quad_spec()
        num = rng.standard_normal(3)
        den = rng.standard_normal(2)
        x = rng.uniform(-3, 3, size=(5, 1))
        base = np.asarray(eval_rational(num, den, spec, x))
        # stay clear of the clamp region where scaling changes nothing anyway
        den_vals = eval_poly(den / abs(signed_norm(den)), spec.denominator_basis, x)
        if np.min(np.abs(den_vals)) < 1e-3:
            return
        scaled = np.asarray(eval_rational(num, gamma * den, spec, x))
        assert np.max(np.abs(scaled - base)) < 1e-9


class TestSignedNorm:
    def test_sign_follows_first_nonzero(self):
        assert signed_norm([3.0, 4.0]) == 5.0
        assert signed_norm([-3.0, 4.0]) == -5.0
        assert signed_norm([0.0, -2.0]) == -2.0

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroDenominatorError):
            signed_norm([0.0, 0.0])
