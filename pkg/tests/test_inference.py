"""Inference tests: PRESS identities, closed-form variance, the search.

The brute-force oracle refits the GP on n-1 points per fold; the identities
under test never refit.
"""

import numpy as np
import pytest

from boundedgp import gp, inference
from boundedgp.projection import BoundSpec


def _hump_data(seed=0, n=10):
    """Nonnegative single-hump data on [0, 10], normalized."""
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, 10.0, size=n)).reshape(-1, 1)
    y = np.exp(-0.5 * (x[:, 0] - 5.0) ** 2) * 2.0
    return gp.TrainingSet.from_data(x, y)


def _brute_press(train, params):
    gram = gp.kernel_matrix(train.inputs, train.inputs, params)
    gram = gram + params.nugget * np.eye(train.n)
    total = 0.0
    for i in range(train.n):
        keep = [j for j in range(train.n) if j != i]
        sub = gram[np.ix_(keep, keep)]
        kx = gram[keep, i]
        mu = float(kx @ np.linalg.solve(sub, train.outputs[keep]))
        total += (train.outputs[i] - mu) ** 2
    return total


class TestPressUnbounded:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(4, 10))
            x = rng.uniform(-1, 1, size=(n, 2))
            y = rng.normal(size=n)
            train = gp.TrainingSet.from_data(x, y, normalize=False)
            theta = rng.uniform(0.5, 2.0, size=2)
            sigma2 = float(rng.uniform(0.5, 3.0))
            params = gp.HyperParams(sigma2, theta, nugget=1e-8 * sigma2)
            got = inference.press_unbounded(train, theta, sigma2, params.nugget)
            ref = _brute_press(train, params)
            assert got == pytest.approx(ref, rel=1e-6)

    def test_sigma2_invariance_with_zero_nugget(self):
        train = _hump_data(seed=1)
        theta = np.array([0.7])
        vals = [
            inference.press_unbounded(train, theta, s2, 0.0)
            for s2 in (1e-2, 0.3, 1.0, 27.0, 1e4)
        ]
        spread = (max(vals) - min(vals)) / max(vals)
        assert spread < 1e-10


class TestSigma2ClosedForm:
    def test_single_observation_returns_y_squared(self):
        train = gp.TrainingSet.from_data(
            np.array([[0.4]]), np.array([2.5]), normalize=False
        )
        got = inference.sigma2_closed_form(train, np.array([1.0]), nugget=0.0)
        assert got == pytest.approx(2.5**2, rel=1e-12)

    def test_matches_dense_formula(self):
        # (1/N) y^T Ktilde^-1 diag(Ktilde^-1)^-1 Ktilde^-1 y at unit signal
        # variance, using an explicit inverse as the oracle.
        rng = np.random.default_rng(6)
        for _ in range(8):
            n = int(rng.integers(3, 9))
            x = rng.uniform(-1, 1, size=(n, 1))
            y = rng.normal(size=n)
            train = gp.TrainingSet.from_data(x, y, normalize=False)
            theta = rng.uniform(0.5, 1.5, size=1)
            gram = gp.kernel_matrix(x, x, gp.HyperParams(1.0, theta)) + 1e-8 * np.eye(n)
            kinv = np.linalg.inv(gram)
            ref = float(y @ kinv @ np.diag(1.0 / np.diag(kinv)) @ kinv @ y) / n
            got = inference.sigma2_closed_form(train, theta, nugget=1e-8)
            assert got == pytest.approx(ref, rel=1e-6)


class TestPressBounded:
    def test_reduces_to_unbounded_when_bounds_are_far(self):
        train = _hump_data(seed=2)
        theta = np.array([0.6])
        sigma2 = 1.2
        params = gp.HyperParams(sigma2, theta, nugget=0.0)
        # Bounds dozens of LOO standard deviations away leave every
        # projected mean untouched.
        far = BoundSpec.constant(lower=-1e9, upper=1e9)
        got = inference.press_bounded(train, far, params)
        ref = inference.press_unbounded(train, theta, sigma2, 0.0)
        assert got == pytest.approx(ref, rel=1e-12)

    def test_projection_of_loo_means_changes_press(self):
        train = _hump_data(seed=3)
        params = gp.HyperParams(1.0, np.array([0.5]), nugget=0.0)
        bounded = inference.press_bounded(
            train, BoundSpec.constant(lower=0.0), params
        )
        unbounded = inference.press_unbounded(train, params.lengthscales, 1.0, 0.0)
        assert bounded != pytest.approx(unbounded, rel=1e-6)

    def test_matches_manual_projection(self):
        from boundedgp.projection import projected_mean_var

        train = _hump_data(seed=5)
        params = gp.HyperParams(0.8, np.array([0.4]), nugget=1e-8 * 0.8)
        bounds = BoundSpec.constant(lower=0.0)
        fitted = gp.fit(train, params)
        loo_mean, loo_var = gp.loo_arrays(fitted)
        lo_n = (0.0 - train.output_shift) / train.output_scale
        mu_g, _ = projected_mean_var(
            loo_mean, np.sqrt(loo_var), np.full(train.n, lo_n), np.full(train.n, np.inf)
        )
        ref = float(np.sum((train.outputs - mu_g) ** 2))
        got = inference.press_bounded(train, bounds, params)
        assert got == pytest.approx(ref, rel=1e-12)


class TestInferenceConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mode="other"),
            dict(mode="bounded", c_l=1.0, c_u=0.5),
            dict(mode="bounded", c_l=0.0),
            dict(mode="unbounded", cma_population=3),
            dict(mode="unbounded", cma_generations=0),
            dict(mode="unbounded", cma_initial_step=0.0),
            dict(mode="unbounded", restarts=-1),
            dict(mode="unbounded", lengthscale_box=(1.0, 1.0)),
            dict(mode="unbounded", nugget=-1e-9),
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            inference.InferenceConfig(**kwargs)

    def test_bounded_mode_requires_bounds(self):
        train = _hump_data()
        with pytest.raises(ValueError):
            inference.infer(train, None, inference.InferenceConfig(mode="bounded"))


class TestInfer:
    def test_unbounded_result_invariants(self):
        train = _hump_data(seed=7)
        config = inference.InferenceConfig(mode="unbounded", seed=11, restarts=1)
        result = inference.infer(train, None, config)
        ref = inference.press_unbounded(
            train, result.params.lengthscales, result.params.sigma2, result.params.nugget
        )
        assert result.objective == pytest.approx(ref, rel=1e-10)
        # Lengthscale inside the search box.
        lo, hi = config.lengthscale_box
        assert np.all(np.log(result.params.lengthscales) >= lo - 1e-12)
        assert np.all(np.log(result.params.lengthscales) <= hi + 1e-12)
        # Signal variance is the closed-form value at the selected theta.
        s2 = inference.sigma2_closed_form(train, result.params.lengthscales, config.nugget)
        assert result.params.sigma2 == pytest.approx(s2, rel=1e-12)
        assert result.evaluations > 0

    def test_bounded_result_invariants(self):
        train = _hump_data(seed=8)
        bounds = BoundSpec.constant(lower=0.0)
        config = inference.InferenceConfig(mode="bounded", seed=3, restarts=1)
        result = inference.infer(train, bounds, config)
        ref = inference.press_bounded(train, bounds, result.params)
        assert result.objective == pytest.approx(ref, rel=1e-10)
        s2h = inference.sigma2_closed_form(
            train, result.params.lengthscales, config.nugget
        )
        assert config.c_l * s2h * (1 - 1e-9) <= result.params.sigma2 <= config.c_u * s2h * (1 + 1e-9)

    def test_deterministic_for_fixed_seed(self):
        train = _hump_data(seed=9)
        bounds = BoundSpec.constant(lower=0.0)
        config = inference.InferenceConfig(mode="bounded", seed=21, restarts=1)
        r1 = inference.infer(train, bounds, config)
        r2 = inference.infer(train, bounds, config)
        assert r1.objective == r2.objective
        assert r1.params.sigma2 == r2.params.sigma2
        np.testing.assert_array_equal(r1.params.lengthscales, r2.params.lengthscales)
        assert r1.evaluations == r2.evaluations

    def test_different_seeds_may_differ_but_stay_close(self):
        train = _hump_data(seed=10)
        objectives = []
        for seed in range(3):
            config = inference.InferenceConfig(mode="unbounded", seed=seed, restarts=0)
            objectives.append(inference.infer(train, None, config).objective)
        assert max(objectives) <= min(objectives) * 1.5 + 1e-9

    def test_selected_model_predicts_well(self):
        # End-to-end sanity: inferred hyperparameters on a smooth function
        # should support near-perfect interpolation at 12 points.
        rng = np.random.default_rng(12)
        x = np.sort(rng.uniform(0, 2 * np.pi, size=12)).reshape(-1, 1)
        y = np.sin(x[:, 0])
        train = gp.TrainingSet.from_data(x, y)
        result = inference.infer(
            train, None, inference.InferenceConfig(mode="unbounded", seed=0)
        )
        fitted = gp.fit(train, result.params)
        grid = np.linspace(0.3, 2 * np.pi - 0.3, 200).reshape(-1, 1)
        grid_n = train.normalize_inputs(grid)
        mean_n, _ = gp.predict_many(fitted, grid_n)
        pred = train.denormalize_outputs(mean_n)
        truth = np.sin(grid[:, 0])
        resid = np.square(pred - truth).mean()
        assert resid < 1e-3

    def test_nugget_ratio_carried_into_params(self):
        train = _hump_data(seed=13)
        config = inference.InferenceConfig(
            mode="unbounded", seed=1, restarts=0, nugget=1e-6
        )
        result = inference.infer(train, None, config)
        assert result.params.nugget == pytest.approx(
            1e-6 * result.params.sigma2, rel=1e-12
        )
