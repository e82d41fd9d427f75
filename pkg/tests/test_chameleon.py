import json
import math

import numpy as np
import pytest

from bellkit import chameleon as cham
from bellkit.chameleon import (
    ArcPolicy,
    ChameleonModel,
    UniformPolicy,
    cleaning,
    coincidence_protocol,
    counterfactual_substitute,
    empirical_bell_expression,
    fit_pair_policy,
    locality_probe,
    policy_correlation,
    predicted_mismatch,
    replay,
    run_pair_experiment,
    shares_hidden,
)

A, B, C = 0.0, math.pi / 4, math.pi / 2
UNIFORM = ChameleonModel()
FITTED = ChameleonModel(policy="fitted")


def uniform_corr(d):
    """Shared-density correlation of the default model: -1 + 2|d|/pi on [-pi, pi]."""
    d = abs(math.remainder(d, 2 * math.pi))
    return -1 + 2 * d / math.pi


class TestDefaultModel:
    def test_hand_geometry(self):
        run = run_pair_experiment(UNIFORM, (0.0, 0.0), 1, seed=0, lambdas=np.array([[1.0, 0.0]]))
        assert run.outcome1.tolist() == [1] and run.outcome2.tolist() == [-1]

    @pytest.mark.parametrize("model", [UNIFORM, FITTED, ChameleonModel(hidden="disk")])
    @pytest.mark.parametrize("x", [0.0, 0.3, math.pi / 2, 5.0])
    def test_identical_settings_are_pointwise_anticorrelated(self, model, x):
        run = run_pair_experiment(model, (x, x), 10_000, seed=1)
        assert np.all(run.outcome1 == -run.outcome2) and run.empirical_corr == -1.0

    def test_exact_axis_points(self):
        # Points on the response boundary still give opposite outcomes.
        pts = cham.circle_points(np.array([0.0, math.pi / 2, math.pi, 3 * math.pi / 2]))
        pts = np.round(pts)
        o1, o2 = UNIFORM.outcomes(pts, 0.0, 0.0)
        assert np.all(o1 == -o2)

    def test_locality(self):
        pts = cham.hidden_points("disk", UniformPolicy(), 0, "probe", 1000)
        settings = np.arange(16) * (2 * math.pi / 16)
        assert locality_probe(UNIFORM, settings, pts)
        assert locality_probe(ChameleonModel(hidden="disk"), settings, pts)

    def test_remote_setting_does_not_change_outcomes(self):
        pts = cham.hidden_points("circle", UniformPolicy(), 3, "remote", 500)
        o1, _ = UNIFORM.outcomes(pts, A, B)
        o1b, _ = UNIFORM.outcomes(pts, A, C)
        assert np.array_equal(o1, o1b)

    def test_invalid_options(self):
        with pytest.raises(ValueError):
            ChameleonModel(hidden="sphere")
        with pytest.raises(ValueError):
            ChameleonModel(policy="magic")
        with pytest.raises(ValueError):
            run_pair_experiment(UNIFORM, (A, B), 0, seed=0)


class TestPolicies:
    @pytest.mark.parametrize("d", [0.0, 0.3, math.pi / 4, math.pi / 2, 2.0, math.pi])
    def test_uniform_quadrature_matches_closed_form(self, d):
        assert policy_correlation(UNIFORM, UniformPolicy(), d, 0.0) == pytest.approx(uniform_corr(d), abs=1e-9)

    def test_uniform_monte_carlo_within_4_sigma(self):
        run = run_pair_experiment(UNIFORM, (A, B), 100_000, seed=2)
        expected = policy_correlation(UNIFORM, UniformPolicy(), A, B)
        sigma = math.sqrt((1 - expected**2) / run.n)
        assert abs(run.empirical_corr - expected) < 4 * sigma

    @pytest.mark.parametrize("x,y", [(A, B), (C, B), (A, C), (0.2, 2.9), (1.0, 1.0)])
    def test_fitted_policy_reaches_singlet(self, x, y):
        policy = fit_pair_policy(FITTED, x, y)
        assert abs(policy_correlation(FITTED, policy, x, y) + math.cos(x - y)) < cham.FIT_TOL
        run = run_pair_experiment(FITTED, (x, y), 100_000, seed=4)
        target = -math.cos(x - y)
        sigma = math.sqrt(max(1 - target**2, 1e-12) / run.n)
        assert abs(run.empirical_corr - target) < 4 * sigma + 1e-12

    def test_fit_unreachable_target(self):
        with pytest.raises(ValueError):
            fit_pair_policy(FITTED, 0.0, 0.0, target=0.5)

    def test_arc_policy_sampling_follows_density(self):
        policy = ArcPolicy((0.0, 1.0, 4.0), (1.0, 3.0, 0.5))
        u = cham.rng.uniforms(0, "arc", count=200_000)
        phi = policy.sample(u)
        lengths = np.array([1.0, 3.0, 2 * math.pi - 4.0])
        mass = lengths * np.array([1.0, 3.0, 0.5])
        expected = mass / mass.sum()
        counts = np.histogram(phi, bins=[0.0, 1.0, 4.0, 2 * math.pi])[0] / len(phi)
        assert np.all(np.abs(counts - expected) < 4 * np.sqrt(expected * (1 - expected) / len(phi)))
        # Density integrates to one.
        assert np.dot(lengths, policy.density(np.array([0.5, 2.0, 5.0]))) == pytest.approx(1.0)

    def test_arc_policy_validation(self):
        with pytest.raises(ValueError):
            ArcPolicy((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            ArcPolicy((0.0, 7.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            ArcPolicy((0.0,), (0.0,))


class TestRuns:
    def test_empirical_corr_definition(self):
        run = run_pair_experiment(UNIFORM, (A, C), 5000, seed=5)
        assert run.empirical_corr == np.mean(run.outcome1.astype(float) * run.outcome2)
        assert abs(run.empirical_corr) <= 1

    def test_determinism_and_replay(self):
        run = run_pair_experiment(FITTED, (A, B), 20_000, seed=9, retain_lambda=True)
        again = replay(json.loads(run.to_json())["manifest"])
        assert run.digest() == again.digest() and run.to_json() == again.to_json()

    def test_csv_columns(self):
        run = run_pair_experiment(UNIFORM, (A, B), 3, seed=0)
        lines = run.to_csv().splitlines()
        assert lines[0] == "lambda_id,outcome1,outcome2" and len(lines) == 4

    def test_counter_based_streams(self):
        # Draw j depends only on (seed, stream, j): a longer run extends a shorter one.
        short = run_pair_experiment(UNIFORM, (A, B), 1000, seed=3, stream="s")
        long = run_pair_experiment(UNIFORM, (A, B), 5000, seed=3, stream="s")
        assert np.array_equal(short.outcome1, long.outcome1[:1000])

    def test_shared_stream_detection(self):
        r1 = run_pair_experiment(UNIFORM, (A, B), 100, seed=1, stream="shared")
        r2 = run_pair_experiment(UNIFORM, (C, B), 100, seed=1, stream="shared")
        r3 = run_pair_experiment(UNIFORM, (C, B), 100, seed=1)
        assert shares_hidden(r1, r2) and not shares_hidden(r1, r3)
        f1 = run_pair_experiment(FITTED, (A, B), 100, seed=1, stream="shared")
        f2 = run_pair_experiment(FITTED, (C, B), 100, seed=1, stream="shared")
        assert not shares_hidden(f1, f2)  # same stream, different densities


class TestEmpiricalBell:
    def test_identical_runs_cancel(self):
        run = run_pair_experiment(UNIFORM, (A, B), 1000, seed=0)
        bell = empirical_bell_expression(run, run)
        assert bell.lhs == 0.0 and bell.regime == "single-space"

    @pytest.mark.parametrize("sign", [1, -1])
    def test_single_space_never_exceeds(self, sign):
        for seed in range(20):
            r1 = run_pair_experiment(UNIFORM, (A, B), 10_000, seed=seed, stream="s")
            r2 = run_pair_experiment(UNIFORM, (C, B), 10_000, seed=seed, stream="s")
            bell = empirical_bell_expression(r1, r2, sign=sign)
            assert bell.regime == "single-space"
            assert bell.lhs <= bell.bound + 4 * bell.sigma

    def test_separate_samples_violate(self):
        r1 = run_pair_experiment(FITTED, (A, B), 100_000, seed=0)
        r2 = run_pair_experiment(FITTED, (C, B), 100_000, seed=0)
        r3 = run_pair_experiment(FITTED, (A, C), 100_000, seed=0)
        bell = empirical_bell_expression(r1, r2, sign=1, run3=r3)
        assert bell.regime == "separate-sample"
        assert bell.margin >= 0.3 and bell.lhs <= bell.separate_bound

    def test_bound_two_without_third_run(self):
        r1 = run_pair_experiment(FITTED, (A, B), 1000, seed=0)
        r2 = run_pair_experiment(FITTED, (C, B), 1000, seed=0)
        assert empirical_bell_expression(r1, r2, sign=1).bound == 2.0

    def test_argument_checks(self):
        r1 = run_pair_experiment(UNIFORM, (A, B), 100, seed=0)
        with pytest.raises(ValueError):
            empirical_bell_expression(r1, run_pair_experiment(UNIFORM, (C, B), 50, seed=0))
        with pytest.raises(ValueError):
            empirical_bell_expression(r1, run_pair_experiment(UNIFORM, (C, A), 100, seed=0))
        with pytest.raises(ValueError):
            empirical_bell_expression(r1, r1, sign=0)


class TestCleaning:
    def test_identical_runs(self):
        run = run_pair_experiment(UNIFORM, (A, B), 1000, seed=0)
        assert cleaning(run, run)[2] == 0

    def test_independent_runs_discard_half(self):
        r1 = run_pair_experiment(UNIFORM, (A, B), 100_000, seed=0, stream="one")
        r2 = run_pair_experiment(UNIFORM, (C, B), 100_000, seed=0, stream="two")
        k1, k2, discarded = cleaning(r1, r2)
        assert abs(discarded - 50_000) < 4 * math.sqrt(100_000 * 0.25)
        assert np.array_equal(k1.outcome2, k2.outcome2) and k1.n == 100_000 - discarded

    def test_opposite_outcomes_discard_all(self):
        pts = cham.hidden_points("circle", UniformPolicy(), 0, "opp", 500)
        r1 = run_pair_experiment(UNIFORM, (A, B), 500, seed=0, lambdas=pts)
        r2 = run_pair_experiment(UNIFORM, (C, B), 500, seed=0, lambdas=-pts)
        assert cleaning(r1, r2)[2] == 500


class TestCounterfactual:
    def test_identity_substitution(self):
        run = run_pair_experiment(FITTED, (A, B), 10_000, seed=0, retain_lambda=True)
        rerun, mismatch = counterfactual_substitute(FITTED, run, B, B)
        assert mismatch == 0 and np.array_equal(rerun.outcome2, run.outcome2)

    def test_antipodal_substitution(self):
        run = run_pair_experiment(UNIFORM, (A, B), 10_000, seed=0, retain_lambda=True)
        _, mismatch = counterfactual_substitute(UNIFORM, run, B, B + math.pi)
        assert mismatch == run.n

    @pytest.mark.parametrize("model", [UNIFORM, FITTED])
    def test_quarter_turn_offset(self, model):
        run = run_pair_experiment(model, (A, B), 10_000, seed=1, retain_lambda=True)
        _, mismatch = counterfactual_substitute(model, run, B, B + math.pi / 4)
        p = predicted_mismatch(model, (A, B), B + math.pi / 4)
        assert 0 < p < 1
        assert abs(mismatch / run.n - p) < 4 * math.sqrt(p * (1 - p) / run.n)

    def test_needs_retained_lambdas(self):
        run = run_pair_experiment(UNIFORM, (A, B), 10, seed=0)
        with pytest.raises(ValueError):
            counterfactual_substitute(UNIFORM, run, B, C)

    def test_measured_setting_checked(self):
        run = run_pair_experiment(UNIFORM, (A, B), 10, seed=0, retain_lambda=True)
        with pytest.raises(ValueError):
            counterfactual_substitute(UNIFORM, run, C, B)


class TestCoincidence:
    def test_single_direction(self):
        assert coincidence_protocol(1, 1000, seed=0) == 1.0

    def test_four_directions(self):
        f = coincidence_protocol(4, 100_000, seed=0)
        assert abs(f - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 100_000)

    def test_continuum_limit(self):
        assert coincidence_protocol(10**6, 1000, seed=0) < 0.01

    def test_arguments(self):
        with pytest.raises(ValueError):
            coincidence_protocol(0, 10, 0)
