import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from parfam.family import BaseFunction, FamilyEvaluator, ModelSpec, count_params, layout_for
from parfam.optimize import (
    FitConfig,
    basin_hopping,
    bfgs,
    canonicalize_denominators,
    finetune,
    finetune_stages,
    loss,
    make_objective,
    multistart,
    split_validation,
)


def quadratic(center):
    center = np.asarray(center, dtype=float)

    def f(x):
        return float(np.sum((x - center) ** 2))

    def g(x):
        return 2.0 * (x - center)

    return f, g


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


def rosenbrock_grad(x):
    return np.array([
        -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]),
        200.0 * (x[1] - x[0] ** 2),
    ])


def double_well(x):
    return float((x[0] ** 2 - 1.0) ** 2 + 0.1 * x[0])


def double_well_grad(x):
    return np.array([4.0 * x[0] * (x[0] ** 2 - 1.0) + 0.1])


def brute_force_minimum(f, lo=-2.0, hi=2.0, n=200001):
    grid = np.linspace(lo, hi, n)
    vals = np.array([f(np.array([g])) for g in grid])
    i = int(np.argmin(vals))
    return grid[i], vals[i]


class TestBfgs:
    def test_quadratic_converges_fast(self):
        dim = 6
        f, g = quadratic(np.arange(1.0, dim + 1.0))
        res = bfgs(f, g, np.zeros(dim), max_steps=dim + 5)
        assert_allclose(res.theta, np.arange(1.0, dim + 1.0), atol=1e-6)

    def test_rosenbrock(self):
        res = bfgs(rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]), max_steps=400)
        assert_allclose(res.theta, [1.0, 1.0], atol=1e-4)

    def test_zero_gradient_returns_start(self):
        f, g = quadratic([2.0, -1.0])
        res = bfgs(f, g, np.array([2.0, -1.0]), max_steps=50)
        assert res.n_iterations == 0
        assert res.converged
        assert_allclose(res.theta, [2.0, -1.0])

    def test_nonfinite_objective_flagged(self):
        res = bfgs(lambda x: math.nan, lambda x: np.zeros(2), np.zeros(2), max_steps=10)
        assert res.hit_nonfinite
        assert_allclose(res.theta, np.zeros(2))

    def test_accepted_values_never_exceed_start(self):
        seen = []

        def f(x):
            seen.append(rosenbrock(x))
            return seen[-1]

        res = bfgs(f, rosenbrock_grad, np.array([-1.2, 1.0]), max_steps=100)
        assert res.loss <= rosenbrock(np.array([-1.2, 1.0]))
        assert res.loss == min(seen)


class TestLoss:
    def test_interpolant_is_zero(self):
        spec = ModelSpec(n_vars=1, deg_output_num=2)
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(10, 1))
        theta = np.array([0.5, 1.0, -2.0])
        y = FamilyEvaluator(spec, X).values(theta)
        assert loss(spec, theta, X, y, 0.0) == 0.0

    def test_constant_model_hand_value(self):
        spec = ModelSpec(n_vars=1, deg_output_num=1)
        X = np.linspace(-1, 1, 7)[:, None]
        y = np.zeros(7)
        value = loss(spec, np.array([2.0, 0.0]), X, y, 0.001)
        assert value == pytest.approx(4.0 + 0.002)

    def test_denominator_scaling_invariance(self):
        rng = np.random.default_rng(1)
        spec = ModelSpec(n_vars=1, deg_output_num=2, deg_output_den=1)
        theta = rng.standard_normal(count_params(spec))
        X = rng.uniform(0.5, 2.0, size=(12, 1))
        y = rng.standard_normal(12)
        layout = layout_for(spec)
        for gamma in (3.0, -0.25):
            scaled = theta.copy()
            scaled[layout.slice("out.den")] *= gamma
            assert loss(spec, scaled, X, y, 0.001) == pytest.approx(
                loss(spec, theta, X, y, 0.001), rel=1e-9)


class TestBasinHopping:
    def test_convex_equals_single_bfgs(self):
        f, g = quadratic([1.0, 2.0, 3.0])
        config = FitConfig(bh_iterations=5, seed=0)
        theta0 = np.zeros(3)
        hop = basin_hopping(f, g, theta0, config)
        single = bfgs(f, g, theta0, max_steps=300)
        assert hop.loss == pytest.approx(single.loss, abs=1e-12)

    def test_finds_global_minimum_of_double_well(self):
        x_star, f_star = brute_force_minimum(double_well)
        hits = 0
        for seed in range(10):
            config = FitConfig(bh_iterations=10, seed=seed, step_size=1.5)
            res = basin_hopping(double_well, double_well_grad, np.array([-2.0]), config)
            if res.loss <= f_star + 1e-6:
                hits += 1
        assert hits >= 9

    def test_best_seen_contract(self):
        config = FitConfig(bh_iterations=8, seed=3, step_size=1.5)
        theta0 = np.array([-2.0])
        res = basin_hopping(double_well, double_well_grad, theta0, config)
        first = bfgs(double_well, double_well_grad, theta0,
                     max_steps=config.local_steps(1))
        assert res.loss <= first.loss + 1e-15

    def test_deterministic_given_seed(self):
        config = FitConfig(bh_iterations=6, seed=11)
        a = basin_hopping(double_well, double_well_grad, np.array([-2.0]), config)
        b = basin_hopping(double_well, double_well_grad, np.array([-2.0]), config)
        assert np.array_equal(a.theta_best, b.theta_best)
        assert a.loss == b.loss and a.n_accepted == b.n_accepted

    def test_zero_temperature_accepts_only_improvements(self):
        cold = FitConfig(bh_iterations=20, seed=5, temperature=1e-12, step_size=2.0)
        hot = FitConfig(bh_iterations=20, seed=5, temperature=1e9, step_size=2.0)
        res_cold = basin_hopping(double_well, double_well_grad, np.array([-2.0]), cold)
        res_hot = basin_hopping(double_well, double_well_grad, np.array([-2.0]), hot)
        assert res_cold.n_accepted <= res_hot.n_accepted

    def test_mse_matches_loss_decomposition(self):
        rng = np.random.default_rng(4)
        spec = ModelSpec(n_vars=1, deg_output_num=2)
        X = rng.uniform(-1, 1, size=(20, 1))
        y = X[:, 0] ** 2
        lam = 0.001
        objective, grad, mse_fn = make_objective(spec, X, y, lam)
        config = FitConfig(lam=lam, bh_iterations=3, seed=0)
        res = basin_hopping(objective, grad, np.zeros(3), config, mse_fn)
        recomputed = loss(spec, res.theta_best, X, y, lam)
        assert res.loss == pytest.approx(recomputed, abs=1e-12)
        assert res.loss == pytest.approx(
            res.mse + (res.loss - res.mse), abs=1e-12)
        assert res.mse <= res.loss


class TestMultistart:
    def test_single_start_equals_bfgs_from_same_draw(self):
        spec = ModelSpec(n_vars=1, deg_output_num=2)
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, size=(15, 1))
        y = 2.0 * X[:, 0]
        objective, grad, mse_fn = make_objective(spec, X, y, 0.0)
        config = FitConfig(backend="multistart_bfgs", n_starts=1, seed=7)
        res = multistart(objective, grad, spec, config, mse_fn)
        theta0 = np.random.default_rng(7).standard_normal(count_params(spec))
        single = bfgs(objective, grad, theta0, config.local_steps(3))
        assert res.loss == pytest.approx(single.loss, abs=0.0)
        assert np.array_equal(res.theta_best, single.theta)

    def test_convex_all_starts_agree(self):
        f, g = quadratic([0.5, -0.5])
        spec = ModelSpec(n_vars=1, deg_output_num=1)  # 2 parameters
        config = FitConfig(backend="multistart_bfgs", n_starts=6, seed=1)
        res = multistart(f, g, spec, config)
        assert res.loss == pytest.approx(0.0, abs=1e-6)

    def test_more_starts_never_worse(self):
        spec = ModelSpec(n_vars=1, deg_output_num=1)  # dim 2 placeholder
        for seed in range(10):
            losses = []
            for n in (1, 3, 10):
                config = FitConfig(backend="multistart_bfgs", n_starts=n, seed=seed)
                res = multistart(lambda x: double_well(x[:1]),
                                 lambda x: np.concatenate([double_well_grad(x[:1]), [0.0]]),
                                 spec, config)
                losses.append(res.loss)
            assert losses[1] <= losses[0] + 1e-12
            assert losses[2] <= losses[1] + 1e-12


class TestFinetune:
    def make_poly_data(self, rng, coeffs, n=60):
        spec = ModelSpec(n_vars=1, deg_output_num=len(coeffs) - 1,
                         max_var_power=len(coeffs) - 1)
        X = rng.uniform(-2, 2, size=(n, 1))
        y = FamilyEvaluator(spec, X).values(np.asarray(coeffs, dtype=float))
        return spec, X, y

    def test_large_coefficients_unchanged(self):
        rng = np.random.default_rng(0)
        spec, X, y = self.make_poly_data(rng, [0.5, -1.5, 2.0])
        theta = np.array([0.5, -1.5, 2.0])
        out = finetune(spec, theta, X, y)
        assert_allclose(out, theta, atol=1e-8)

    def test_spurious_coefficient_zeroed(self):
        rng = np.random.default_rng(1)
        spec, X, y = self.make_poly_data(rng, [0.0, 0.0, 1.0])  # y = x^2
        theta = np.array([1e-4, 0.0, 1.0])
        out = finetune(spec, theta, X, y)
        assert out[0] == 0.0
        assert out[2] == pytest.approx(1.0, abs=1e-10)
        _, _, X_val, y_val = split_validation(X, y)
        val_mse = float(np.mean((FamilyEvaluator(spec, X_val).values(out) - y_val) ** 2))
        assert val_mse <= 1e-16

    def test_all_zeroed_returns_zero_vector(self):
        rng = np.random.default_rng(2)
        spec, X, y = self.make_poly_data(rng, [0.0, 0.0, 1.0])
        theta = np.array([1e-6, -1e-7, 1e-6])
        out = finetune(spec, theta, X, y, schedule=(1e-5, 1e-4))
        assert np.array_equal(out, np.zeros(3))

    def test_nonzero_count_non_increasing_across_stages(self):
        rng = np.random.default_rng(3)
        spec, X, y = self.make_poly_data(rng, [0.3, 0.0, 1.0])
        theta = np.array([0.3, 5e-4, 1.0])
        stages = finetune_stages(spec, theta, X, y)
        counts = [c[1] for c in stages]
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_selection_contract(self):
        rng = np.random.default_rng(4)
        spec, X, y = self.make_poly_data(rng, [0.0, 1.0, 0.5])
        theta = np.array([2e-3, 1.0, 0.5])
        stages = finetune_stages(spec, theta, X, y)
        out = finetune(spec, theta, X, y)
        _, _, X_val, y_val = split_validation(X, y)
        out_mse = float(np.mean((FamilyEvaluator(spec, X_val).values(out) - y_val) ** 2))
        best_mse = min(c[0] for c in stages)
        assert out_mse <= best_mse * (1 + 1e-9) + 1e-300

    def test_param_vector_round_trip(self):
        rng = np.random.default_rng(5)
        spec, X, y = self.make_poly_data(rng, [0.0, 2.0])
        from parfam.family import param_vector

        pv = param_vector(spec, [0.0, 2.0])
        out = finetune(spec, pv, X, y)
        assert out.values.shape == (2,)

    def test_canonicalize_denominators_is_model_invariant(self):
        rng = np.random.default_rng(6)
        spec = ModelSpec(n_vars=1, deg_output_num=2, deg_output_den=1)
        theta = rng.standard_normal(count_params(spec))
        X = rng.uniform(0.5, 2.0, size=(9, 1))
        canon = canonicalize_denominators(spec, theta)
        before = FamilyEvaluator(spec, X).values(theta)
        after = FamilyEvaluator(spec, X).values(canon)
        assert_allclose(after, before, rtol=1e-12)
        layout = layout_for(spec)
        den = canon[layout.slice("out.den")]
        assert np.linalg.norm(den) == pytest.approx(1.0)


class TestFitConfigValidation:
    def test_rejects_bad_thresholds(self):
        with pytest.raises(ValueError):
            FitConfig(threshold_schedule=(1e-4, 1e-5))
        with pytest.raises(ValueError):
            FitConfig(threshold_schedule=(1e-6, 1e-2))

    def test_rejects_bad_backend(self):
        with pytest.raises(ValueError):
            FitConfig(backend="annealing")

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            FitConfig(lam=-1.0)
