"""Tests for binned distributions, order-statistic tables, and the
rank-likelihood model.

Derived expectations were computed from independent closed forms (error
function, beta integrals, binomial tails, exhaustive pair enumeration)
before being frozen here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankmatch.distributions import (
    LOG_FLOOR,
    BinAxis,
    DiscreteDistribution,
    GridScoreSampler,
    JointGrid,
    MvnScoreSampler,
    axis_for_step,
    build_rank_likelihood_model,
    combined_score_spec,
    discretize,
    fit_gaussian,
    fit_mvn,
    gaussian_distribution,
    order_statistic_table,
    quantize,
    simulated_order_statistic_table,
    uniform_distribution,
)


class TestBinAxis:
    def test_index_clamps_and_counts(self):
        axis = BinAxis(0.0, 0.1, 10)
        idx, clamped = axis.index([0.05, 0.95, -3.0, 4.0])
        assert idx.tolist() == [0, 9, 0, 9]
        assert clamped == 2

    def test_centers_and_edges(self):
        axis = BinAxis(-1.0, 0.5, 4)
        assert axis.upper == 1.0
        np.testing.assert_allclose(axis.centers(), [-0.75, -0.25, 0.25, 0.75])
        np.testing.assert_allclose(axis.edges(), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_axis_for_step_centers_on_multiples(self):
        axis = axis_for_step(12.0, 30.0, 5.0)
        np.testing.assert_allclose(axis.centers(), [15.0, 20.0, 25.0, 30.0])

    @given(st.floats(-50, 50), st.floats(0.01, 5), st.integers(2, 200))
    def test_centers_index_back_to_own_bin(self, lower, width, count):
        axis = BinAxis(lower, width, count)
        idx, clamped = axis.index(axis.centers())
        assert clamped == 0
        assert idx.tolist() == list(range(count))


class TestDiscretize:
    def test_gaussian_central_mass_matches_error_function(self):
        # Oracle: integral of the standard normal over [-1, 1] = erf(1/sqrt 2).
        dist = gaussian_distribution(bin_width=0.01)
        idx, _ = dist.axis.index(np.arange(-0.995, 1.0, 0.01))
        mass = dist.mass[np.unique(idx)].sum()
        assert mass == pytest.approx(0.6826894921370859, abs=5e-5)

    def test_uniform_is_flat(self):
        dist = uniform_distribution(0.0, 1.0, 0.01)
        assert dist.mass.size == 100
        np.testing.assert_allclose(dist.mass, 0.01, atol=1e-12)

    def test_mass_sums_to_one(self):
        dist = discretize(lambda x: np.exp(-np.abs(x)), -8.0, 8.0, 0.05)
        assert dist.mass.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_zero_mass_grid(self):
        with pytest.raises(ValueError):
            discretize(lambda x: np.zeros_like(x), 0.0, 1.0, 0.1)

    def test_sampling_stays_in_range(self):
        dist = uniform_distribution(2.0, 3.0, 0.1)
        rng = np.random.default_rng(0)
        draws = dist.sample(rng, 1000)
        assert draws.min() >= 2.0 and draws.max() < 3.0


class TestOrderStatisticTable:
    def test_single_draw_equals_base_distribution(self):
        dist = uniform_distribution(0.0, 1.0, 0.01)
        table = order_statistic_table(dist, 1)
        np.testing.assert_allclose(np.exp(table.log_density[0]) * 0.01,
                                   dist.mass, atol=1e-12)

    def test_two_draw_uniform_closed_form(self):
        # Oracle: min of two uniforms has density 2(1-x), max has 2x;
        # integrated over the bin [0.75, 0.76) that is 0.49 and 1.51.
        dist = uniform_distribution(0.0, 1.0, 0.01)
        table = order_statistic_table(dist, 2)
        assert np.exp(table.log_density[0, 75]) == pytest.approx(0.49, abs=1e-9)
        assert np.exp(table.log_density[1, 75]) == pytest.approx(1.51, abs=1e-9)

    def test_three_draw_uniform_binomial_tail_value(self):
        # Oracle: P(2nd smallest of 3 in [0.4, 0.5)) via binomial tails = 0.148.
        dist = uniform_distribution(0.0, 1.0, 0.1)
        table = order_statistic_table(dist, 3)
        assert np.exp(table.log_density[1, 4]) * 0.1 == pytest.approx(0.148, abs=1e-9)

    @pytest.mark.parametrize("cohort", [2, 10, 25, 50])
    @pytest.mark.parametrize("maker", [gaussian_distribution, uniform_distribution])
    def test_rows_normalize_and_mix_back(self, cohort, maker):
        dist = maker(bin_width=0.01)
        table = order_statistic_table(dist, cohort)
        prob = np.exp(np.where(table.log_density <= LOG_FLOOR, -np.inf,
                               table.log_density)) * dist.bin_width
        np.testing.assert_allclose(prob.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(prob.mean(axis=0), dist.mass, atol=1e-6)

    def test_gaussian_rows_match_simulation(self):
        # Oracle: 10^5 simulated cohorts; per-bin agreement within 5 binomial
        # standard errors plus a small absolute floor.  Span 5 keeps the
        # clamped out-of-range mass far below the floor.
        dist = gaussian_distribution(bin_width=0.05, span=5.0)
        cohort = 25
        table = order_statistic_table(dist, cohort)
        cohorts = 100_000
        rng = np.random.default_rng(123)
        draws = np.sort(rng.standard_normal((cohorts, cohort)), axis=1)
        idx, _ = dist.axis.index(draws.ravel())
        idx = idx.reshape(cohorts, cohort)
        for k in (0, 12, 24):
            observed = np.bincount(idx[:, k], minlength=dist.axis.count) / cohorts
            expected = np.exp(table.log_density[k]) * dist.bin_width
            se = np.sqrt(expected * (1 - expected) / cohorts)
            assert np.all(np.abs(observed - expected) <= 5 * se + 1e-4)

    def test_higher_ranks_have_monotone_likelihood_ratios(self):
        dist = gaussian_distribution(bin_width=0.05)
        table = order_statistic_table(dist, 10)
        dens = np.exp(table.log_density)
        rng = np.random.default_rng(7)
        bins = rng.integers(40, 160, size=(2000, 2))
        low = np.minimum(bins[:, 0], bins[:, 1])
        high = np.maximum(bins[:, 0], bins[:, 1])
        keep = low < high
        low, high = low[keep], high[keep]
        for k in range(9):
            # p_(k+1)(low) p_(k+2)(high) >= p_(k+1)(high) p_(k+2)(low)
            lhs = dens[k, low] * dens[k + 1, high]
            rhs = dens[k, high] * dens[k + 1, low]
            assert np.all(lhs >= rhs - 1e-12)

    def test_simulated_table_converges_to_exact(self):
        dist = uniform_distribution(0.0, 1.0, 0.05)
        exact = order_statistic_table(dist, 5)
        sim = simulated_order_statistic_table(dist, 5, cohorts=200_000, seed=3)
        exact_prob = np.exp(exact.log_density) * 0.05
        sim_prob = np.exp(np.where(sim.log_density <= LOG_FLOOR, -np.inf,
                                   sim.log_density)) * 0.05
        assert np.abs(exact_prob - sim_prob).max() < 0.005

    def test_weights_for_reports_clamping(self):
        dist = uniform_distribution(0.0, 1.0, 0.1)
        table = order_statistic_table(dist, 3)
        weights, clamped = table.weights_for([0.5, 1.7])
        assert weights.shape == (2, 3)
        assert clamped == 1

    def test_rejects_cohort_below_one(self):
        dist = uniform_distribution()
        with pytest.raises(ValueError):
            order_statistic_table(dist, 0)


class TestFits:
    def test_gaussian_fit_uses_n_denominator(self):
        mean, var = fit_gaussian([1.0, 2.0, 3.0])
        assert mean == pytest.approx(2.0)
        assert var == pytest.approx(2.0 / 3.0)

    def test_gaussian_fit_refuses_single_sample(self):
        with pytest.raises(ValueError):
            fit_gaussian([4.0])

    def test_degenerate_variance_gets_jitter_and_warning(self):
        with pytest.warns(UserWarning):
            _, var = fit_gaussian([5.0, 5.0, 5.0])
        assert var > 0

    def test_mvn_fit_frozen_example(self):
        mean, cov = fit_mvn(np.array([[0.0, 0.0], [2.0, 2.0], [4.0, 2.0]]))
        np.testing.assert_allclose(mean, [2.0, 4.0 / 3.0])
        np.testing.assert_allclose(
            cov, [[8.0 / 3.0, 4.0 / 3.0], [4.0 / 3.0, 8.0 / 9.0]])

    def test_mvn_fit_recovers_generator(self):
        rng = np.random.default_rng(5)
        cov = np.array([[2.0, 0.8], [0.8, 1.0]])
        samples = rng.multivariate_normal([1.0, -1.0], cov, size=40_000)
        mean, fitted = fit_mvn(samples)
        np.testing.assert_allclose(mean, [1.0, -1.0], atol=0.05)
        np.testing.assert_allclose(fitted, cov, atol=0.05)


class TestQuantize:
    @pytest.mark.parametrize("value,step,expected", [
        (71.0, 3.0, 72.0),
        (7.5, 5.0, 10.0),
        (-4.0, 3.0, -3.0),
        (70.8, 5.0, 70.0),
        (0.0, 3.0, 0.0),
    ])
    def test_examples(self, value, step, expected):
        assert quantize(value, step) == expected

    @given(st.floats(-1e6, 1e6), st.sampled_from([0.5, 1.0, 3.0, 5.0]))
    def test_idempotent(self, value, step):
        once = quantize(value, step)
        assert quantize(once, step) == once

    @given(st.floats(-1e6, 1e6), st.sampled_from([0.5, 1.0, 3.0, 5.0]))
    def test_lands_on_multiples_within_half_step(self, value, step):
        q = quantize(value, step)
        assert abs(q - value) <= step / 2 + 1e-9
        assert q / step == pytest.approx(round(q / step), abs=1e-9)


class TestCombinedScores:
    def test_f1_ignores_instantaneous(self):
        spec = combined_score_spec("f1", 2)
        out = spec.combined([[10.0, 20.0], [1.0, 2.0]], [3.0, 4.0])
        np.testing.assert_allclose(out, [3.0, 4.0])

    def test_f2_weights(self):
        spec = combined_score_spec("f2", 2)
        out = spec.combined([[80.0, 80.0]], [80.0])
        np.testing.assert_allclose(out, [80.0])
        out = spec.combined([[70.8, 72.0]], [15.4])
        np.testing.assert_allclose(out, [43.4])

    def test_f2_needs_two_components(self):
        with pytest.raises(ValueError):
            combined_score_spec("f2", 1)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            combined_score_spec("f3", 2)


def _tiny_grid_model(mass, cohorts=200_000, seed=11):
    """Model over a 2-bin instant axis and 2-bin delayed axis."""
    instant_axis = BinAxis(0.0, 1.0, 2)
    delayed_axis = BinAxis(0.0, 1.0, 2)
    grid = JointGrid((instant_axis,), delayed_axis, mass)
    spec = combined_score_spec("f1", 1)
    model = build_rank_likelihood_model(
        GridScoreSampler(grid), spec, cohort_size=2,
        instant_axes=(instant_axis,), delayed_axis=delayed_axis,
        cohorts=cohorts, seed=seed)
    return model, grid


def _enumerated_rank_cells(mass):
    """Exact (rank, cell) distribution for cohorts of two grid draws.

    Cells are compared by delayed value (the f1 blend); equal cells tie and
    the earlier draw takes the lower rank.  Returns (2, cells) probabilities.
    """
    flat = mass.ravel()
    d_of_cell = np.array([0, 1, 0, 1], dtype=float)  # delayed bin of each cell
    out = np.zeros((2, 4))
    for first in range(4):
        for second in range(4):
            p = flat[first] * flat[second]
            if d_of_cell[first] <= d_of_cell[second]:
                low, high = first, second
            else:
                low, high = second, first
            out[0, low] += p
            out[1, high] += p
    return out


class TestRankLikelihoodModel:
    def test_matches_exact_pair_enumeration(self):
        mass = np.array([[0.1, 0.3], [0.4, 0.2]])
        model, grid = _tiny_grid_model(mass)
        expected = _enumerated_rank_cells(mass)
        volume = 1.0  # every cell is 1 x 1
        observed = np.exp(model.log_joint).reshape(2, 4) * volume
        np.testing.assert_allclose(observed, expected, atol=0.01)

    def test_conditional_sums_to_one_where_defined(self):
        mass = np.array([[0.25, 0.25], [0.25, 0.25]])
        model, _ = _tiny_grid_model(mass)
        sums = model.conditional.sum(axis=2)
        np.testing.assert_allclose(sums, 1.0, atol=1e-9)

    def test_expected_log_joint_bounded_by_best_cell(self):
        mass = np.array([[0.1, 0.2], [0.3, 0.4]])
        model, _ = _tiny_grid_model(mass)
        best = model.log_joint.max(axis=2)
        assert np.all(model.expected_log_joint <= best + 1e-9)

    def test_deterministic_delayed_score_collapses_expectation(self):
        # When the delayed bin is a function of the instant bin, the
        # expectation over the conditional is the single populated cell.
        mass = np.array([[0.5, 0.0], [0.0, 0.5]])
        model, _ = _tiny_grid_model(mass)
        for k in range(2):
            for s, d in ((0, 0), (1, 1)):
                assert model.expected_log_joint[k, s] == pytest.approx(
                    model.log_joint[k, s, d], abs=1e-3)

    def test_mvn_sampler_shapes_and_reproducibility(self):
        sampler = MvnScoreSampler(np.zeros(3), np.eye(3))
        a = sampler.sample(np.random.default_rng(0), 5)
        b = sampler.sample(np.random.default_rng(0), 5)
        assert a[0].shape == (5, 2) and a[1].shape == (5,)
        np.testing.assert_array_equal(a[0], b[0])

    def test_rejects_too_few_cohorts(self):
        instant_axis = BinAxis(0.0, 1.0, 2)
        grid = JointGrid((instant_axis,), instant_axis,
                         np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            build_rank_likelihood_model(
                GridScoreSampler(grid), combined_score_spec("f1", 1),
                cohort_size=2, instant_axes=(instant_axis,),
                delayed_axis=instant_axis, cohorts=100, seed=0)

    def test_worker_count_does_not_change_tables(self):
        mass = np.array([[0.1, 0.3], [0.4, 0.2]])
        instant_axis = BinAxis(0.0, 1.0, 2)
        grid = JointGrid((instant_axis,), instant_axis, mass)
        spec = combined_score_spec("f1", 1)
        kwargs = dict(combined=spec, cohort_size=2,
                      instant_axes=(instant_axis,), delayed_axis=instant_axis,
                      cohorts=20_000, seed=4)
        serial = build_rank_likelihood_model(GridScoreSampler(grid), workers=1, **kwargs)
        parallel = build_rank_likelihood_model(GridScoreSampler(grid), workers=4, **kwargs)
        np.testing.assert_array_equal(serial.log_joint, parallel.log_joint)


class TestDistributionValidation:
    def test_mass_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscreteDistribution(0.0, 0.5, np.array([0.5, 0.4]))

    def test_mass_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            DiscreteDistribution(0.0, 0.5, np.array([1.2, -0.2]))

    def test_mass_is_read_only(self):
        dist = uniform_distribution(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            dist.mass[0] = 0.9


@settings(deadline=None, max_examples=25)
@given(st.integers(1, 40))
def test_mixture_identity_holds_for_any_cohort_size(cohort):
    dist = uniform_distribution(0.0, 1.0, 0.05)
    table = order_statistic_table(dist, cohort)
    prob = np.exp(np.where(table.log_density <= LOG_FLOOR, -np.inf,
                           table.log_density)) * dist.bin_width
    np.testing.assert_allclose(prob.mean(axis=0), dist.mass, atol=1e-9)
