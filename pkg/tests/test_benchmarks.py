"""Benchmark harness tests: designs, metrics, catalog, trial machinery.

Truth-function oracles are evaluated scalar-by-scalar with the math module,
independently of the vectorized implementations under test.
"""

import math

import numpy as np
import pytest
from scipy.special import beta as beta_fn

from boundedgp import benchmarks
from boundedgp.benchmarks import (
    ExperimentResult,
    coverage,
    get_problem,
    get_variant,
    lhs_sample,
    plot_data_csv,
    problem_catalog,
    r_squared,
    rmse,
    run_experiment,
    run_trial,
    summary_markdown,
    trials_csv,
    validate_problem,
)

FAST = dict(cma_generations=15, restarts=0)


class TestMetrics:
    def test_r_squared_perfect(self):
        assert r_squared([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]) == 1.0

    def test_r_squared_half(self):
        # SS_res = 1, SS_tot = 2.
        assert r_squared([0.0, 1.0, 2.0], [0.0, 1.0, 1.0]) == 0.5

    def test_r_squared_constant_truth_rejected(self):
        with pytest.raises(ValueError):
            r_squared([1.0, 1.0], [1.0, 2.0])

    def test_rmse(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))

    def test_coverage(self):
        cp = coverage([1.0, 2.0, 3.0], [0.0, 2.5, 2.0], [2.0, 3.0, 4.0])
        assert cp == pytest.approx(2.0 / 3.0)

    def test_coverage_closed_intervals(self):
        assert coverage([1.0], [1.0], [1.0]) == 1.0


class TestLhsSample:
    def test_stratified_in_every_dimension(self):
        n = 8
        domain = np.array([[0.0, 1.0], [-5.0, 5.0]])
        pts = lhs_sample(n, domain, np.random.default_rng(0))
        assert pts.shape == (n, 2)
        for j, (lo, hi) in enumerate(domain):
            unit = (pts[:, j] - lo) / (hi - lo)
            assert np.all((0.0 <= unit) & (unit <= 1.0))
            strata = np.sort(np.floor(unit * n).astype(int))
            assert np.array_equal(strata, np.arange(n))

    def test_deterministic(self):
        domain = np.array([[0.0, 1.0]])
        a = lhs_sample(6, domain, np.random.default_rng(3))
        b = lhs_sample(6, domain, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_single_point(self):
        pts = lhs_sample(1, np.array([[2.0, 4.0]]), np.random.default_rng(0))
        assert pts.shape == (1, 1)
        assert 2.0 <= pts[0, 0] <= 4.0

    def test_single_candidate_still_valid(self):
        pts = lhs_sample(5, np.array([[0.0, 1.0]]), np.random.default_rng(1), candidates=1)
        strata = np.sort(np.floor(pts[:, 0] * 5).astype(int))
        assert np.array_equal(strata, np.arange(5))

    def test_bad_domain_rejected(self):
        with pytest.raises(ValueError):
            lhs_sample(3, np.array([[1.0, 1.0]]), np.random.default_rng(0))

    def test_zero_points_rejected(self):
        with pytest.raises(ValueError):
            lhs_sample(0, np.array([[0.0, 1.0]]), np.random.default_rng(0))


class TestCatalog:
    def test_names_and_dims(self):
        problems = {p.name: p for p in problem_catalog()}
        assert set(problems) == {"a", "b", "c", "sinc2d", "ishigami"}
        assert [problems[k].dim for k in ("a", "b", "c", "sinc2d", "ishigami")] == [
            1, 1, 1, 2, 3,
        ]

    def test_default_sizes(self):
        problems = {p.name: p for p in problem_catalog()}
        assert problems["a"].default_train_sizes == (10,)
        assert problems["b"].default_train_sizes == (15,)
        assert problems["c"].default_train_sizes == (10,)
        assert problems["sinc2d"].default_train_sizes == (30, 50)
        assert problems["ishigami"].default_train_sizes == (20, 60, 100)

    def test_alias(self):
        assert get_problem("2d").name == "sinc2d"

    def test_unknown_problem(self):
        with pytest.raises(ValueError, match="choose from"):
            get_problem("zzz")

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="choose from"):
            get_variant("zzz")

    def test_variant_dash_alias(self):
        assert get_variant("bGP-P").name == "bGP_P"

    def test_every_problem_validates(self):
        for problem in problem_catalog():
            validate_problem(problem)

    def test_validator_catches_violations(self):
        bad = benchmarks.Problem(
            name="bad",
            dim=1,
            domain=np.array([[0.0, 1.0]]),
            truth=lambda x: np.asarray(x)[:, 0] - 2.0,
            bounds=benchmarks.BoundSpec.constant(lower=0.0),
            default_train_sizes=(5,),
        )
        with pytest.raises(ValueError, match="contain the truth"):
            validate_problem(bad)


class TestTruthFunctions:
    def test_problem_a_values(self):
        truth = get_problem("a").truth
        # Scaled beta(1.4, 2.6) bump supported on (3, 8).
        t = 0.5
        expected = t**0.4 * (1 - t) ** 1.6 / (beta_fn(1.4, 2.6) * 5.0)
        assert truth(np.array([[5.5]]))[0] == pytest.approx(expected, rel=1e-12)
        assert truth(np.array([[1.0]]))[0] == 0.0
        assert truth(np.array([[3.0]]))[0] == 0.0
        assert truth(np.array([[9.5]]))[0] == 0.0

    def test_problem_b_values(self):
        truth = get_problem("b").truth
        t = 0.25
        assert truth(np.array([[t]]))[0] == pytest.approx(t * t * math.sin(1.0 / t), rel=1e-14)
        assert truth(np.array([[0.0]]))[0] == 0.0

    def test_problem_b_inside_envelope(self):
        problem = get_problem("b")
        grid = np.linspace(-math.pi / 8, math.pi / 8, 101).reshape(-1, 1)
        vals = problem.truth(grid)
        assert np.all(np.abs(vals) <= np.square(grid[:, 0]) + 1e-15)

    def test_problem_c_values(self):
        truth = get_problem("c").truth
        t = 0.5
        expected = math.sin(10 * math.pi * t**2.5) / (10 * math.pi * t)
        assert truth(np.array([[t]]))[0] == pytest.approx(expected, rel=1e-14)
        assert truth(np.array([[0.0]]))[0] == 0.0

    def test_problem_c_sign_envelope(self):
        problem = get_problem("c")
        pts = np.array([[0.3], [0.45]])
        vals = problem.truth(pts)
        lo, hi = problem.bounds.evaluate(pts)
        assert vals[0] > 0 and lo[0] == 0.0 and hi[0] == math.inf
        assert vals[1] < 0 and lo[1] == -math.inf and hi[1] == 0.0

    def test_sinc2d_values(self):
        truth = get_problem("sinc2d").truth
        # Removable singularities: sin(t)/t -> 1 as t -> 0.
        expected = 2.0 - 1.0 - math.sin(2.0) / 2.0
        assert truth(np.array([[0.0, 0.0]]))[0] == pytest.approx(expected, rel=1e-14)
        x = np.array([[3.0, 1.5]])
        expected = 2.0 - math.sin(3.0) / 3.0 - math.sin(3.5) / 3.5
        assert truth(x)[0] == pytest.approx(expected, rel=1e-14)

    def test_sinc2d_envelope_values(self):
        bounds = get_problem("sinc2d").bounds
        lo, hi = bounds.at(np.array([4.0, 2.0]))
        assert lo == pytest.approx(1.5) and hi == pytest.approx(2.5)
        # Near the singular lines the envelope saturates at width 2 per term.
        lo, hi = bounds.at(np.array([0.0, -2.0]))
        assert lo == pytest.approx(0.0) and hi == pytest.approx(4.0)

    def test_ishigami_values(self):
        truth = get_problem("ishigami").truth
        assert truth(np.array([[math.pi / 2, 0.0, 1.0]]))[0] == pytest.approx(1.1, rel=1e-14)
        x1, x2, x3 = 0.7, -1.2, 2.0
        expected = math.sin(x1) * (1 + 0.1 * x3**4) + 7 * math.sin(x2) ** 2
        assert truth(np.array([[x1, x2, x3]]))[0] == pytest.approx(expected, rel=1e-14)

    def test_ishigami_envelope_values(self):
        bounds = get_problem("ishigami").bounds
        lo, hi = bounds.at(np.array([0.5, 0.2, 0.0]))
        assert lo == pytest.approx(0.0)
        assert hi == pytest.approx(0.5 + 7 * 0.04)


class TestTrials:
    def test_run_trial_deterministic(self):
        problem, variant = get_problem("a"), get_variant("GP")
        a = run_trial(problem, variant, 8, 1, n_test=50, config_overrides=FAST)
        b = run_trial(problem, variant, 8, 1, n_test=50, config_overrides=FAST)
        assert a == b

    def test_run_trial_seed_changes_design(self):
        problem, variant = get_problem("a"), get_variant("GP")
        a = run_trial(problem, variant, 8, 1, n_test=50, config_overrides=FAST)
        b = run_trial(problem, variant, 8, 2, n_test=50, config_overrides=FAST)
        assert a != b

    def test_trial_metric_ranges(self):
        tr = run_trial(get_problem("a"), get_variant("bGP"), 8, 0, n_test=50,
                       config_overrides=FAST)
        assert tr.r2 <= 1.0
        assert tr.rmse >= 0.0
        assert 0.0 <= tr.cp <= 1.0

    def test_run_experiment_counts(self):
        res = run_experiment(
            get_problem("a"), get_variant("GP"), 8,
            replications=3, n_test=50, config_overrides=FAST,
        )
        assert len(res.trials) == 3 and res.failures == 0
        assert [t.seed for t in res.trials] == [0, 1, 2]

    def test_run_experiment_counts_failures(self):
        res = run_experiment(
            get_problem("a"), get_variant("GP"), 8,
            replications=2, n_test=50,
            config_overrides=dict(FAST, variance_cap=1e-300),
        )
        assert len(res.trials) == 0 and res.failures == 2

    def test_summary_matches_numpy(self):
        res = run_experiment(
            get_problem("a"), get_variant("GP"), 8,
            replications=3, n_test=50, config_overrides=FAST,
        )
        r2s = np.array([t.r2 for t in res.trials])
        mean, std = res.summary()["r2"]
        assert mean == pytest.approx(float(r2s.mean()))
        assert std == pytest.approx(float(r2s.std(ddof=1)))


@pytest.fixture(scope="module")
def result():
    return run_experiment(
        get_problem("a"), get_variant("GP"), 8,
        replications=3, n_test=50, config_overrides=FAST,
    )


class TestReports:
    def test_trials_csv_shape(self, result):
        lines = trials_csv([result]).splitlines()
        assert lines[0] == "problem,variant,n_train,seed,r2,rmse,cp"
        assert len(lines) == 4
        cells = lines[1].split(",")
        assert cells[0] == "a" and cells[1] == "GP"
        assert float(cells[4]) == result.trials[0].r2

    def test_summary_markdown_structure(self, result):
        md = summary_markdown([result])
        assert "## Problem a" in md
        assert "R²×100" in md and "RMSE×100" in md and "CP×100" in md
        assert "GP" in md

    def test_plot_data_csv(self):
        text = plot_data_csv(
            get_problem("a"), get_variant("GP"), 8, resolution=20,
            config_overrides=FAST,
        )
        lines = text.splitlines()
        assert lines[0] == "x,truth,l,u,mu_g,q025,q975"
        assert len(lines) == 21
        row = lines[1].split(",")
        assert len(row) == 7
        assert row[2] == "0.0" and row[3] == ""

    def test_plot_data_rejects_2d(self):
        with pytest.raises(ValueError, match="1-D"):
            plot_data_csv(get_problem("sinc2d"), get_variant("GP"), 10)
