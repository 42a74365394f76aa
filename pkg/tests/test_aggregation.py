"""Gibbs weighting, substitution rules, and pathwise regret accounting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixlab.aggregation import (
    AggregatorTrace,
    build_trace,
    cumulative_losses,
    erm_select,
    feasible_interval,
    gibbs_mean_regret_batch,
    gibbs_weights,
    mix_bound,
    per_sequence_regret,
    pim_predict,
    pm_predict,
    two_expert_weight,
)
from mixlab.losses import make_loss

SQUARE = make_loss("square")


class TestCumulativeLosses:
    def test_constant_experts(self):
        y = np.array([1.0, 0.0, 1.0])
        table = cumulative_losses(SQUARE, [0.8, 0.2], y)
        expected = np.array(
            [[0.0, 0.04, 0.68, 0.72], [0.0, 0.64, 0.68, 1.32]])
        np.testing.assert_allclose(table, expected, atol=1e-15)

    def test_per_step_values(self):
        y = np.array([1.0, 0.0])
        values = np.array([[1.0, 0.0], [0.5, 0.5]])
        table = cumulative_losses(SQUARE, values, y)
        np.testing.assert_allclose(table, [[0.0, 0.0, 0.0], [0.0, 0.25, 0.5]])

    def test_infinite_losses_propagate(self):
        loss = make_loss("entropy")
        table = cumulative_losses(loss, [1.0, 0.5], np.array([0.0, 1.0]))
        assert math.isinf(table[0, 1]) and math.isinf(table[0, 2])
        assert np.isfinite(table[1]).all()

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            cumulative_losses(SQUARE, [0.5], np.zeros((2, 2)))
        with pytest.raises(ValueError):
            cumulative_losses(SQUARE, np.zeros((2, 3)), np.zeros(4))
        with pytest.raises(ValueError):
            cumulative_losses(SQUARE, np.zeros((2, 2, 2)), np.zeros(2))


class TestGibbsWeights:
    def test_two_expert_closed_form(self):
        w = gibbs_weights(np.array([1.0, 2.0]), 0.5)
        z = math.exp(-0.5 * 1.0) + math.exp(-0.5 * 2.0)
        np.testing.assert_allclose(w, [math.exp(-0.5) / z, math.exp(-1.0) / z], rtol=1e-15)

    def test_shift_invariance_is_exact(self):
        sigma = np.array([3.0, 7.0, 11.0])
        np.testing.assert_array_equal(
            gibbs_weights(sigma, 0.3), gibbs_weights(sigma + 1000.0, 0.3))

    def test_batched_rows_normalize(self):
        rng = np.random.default_rng(0)
        sigma = rng.uniform(0, 40, size=(50, 5))
        w = gibbs_weights(sigma, 1.0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        assert (w >= 0).all()

    def test_infinite_loss_gets_zero_weight(self):
        w = gibbs_weights(np.array([1.0, np.inf, 2.0]), 1.0)
        assert w[1] == 0.0
        assert w.sum() == pytest.approx(1.0)

    def test_error_cases(self):
        with pytest.raises(ValueError):
            gibbs_weights(np.array([np.inf, np.inf]), 1.0)
        with pytest.raises(ValueError):
            gibbs_weights(np.array([1.0, 2.0]), 0.0)
        with pytest.raises(ValueError):
            gibbs_weights(np.array([1.0, 2.0]), 1.0, prior=[-0.5, 1.5])
        with pytest.raises(ValueError):
            gibbs_weights(np.array([1.0, np.inf]), 1.0, prior=[0.0, 1.0])

    def test_prior_reweights(self):
        w = gibbs_weights(np.zeros(2), 1.0, prior=[3.0, 1.0])
        np.testing.assert_allclose(w, [0.75, 0.25])

    def test_two_expert_weight_matches_general_form(self):
        s = np.arange(-40, 41)
        lam, delta = 0.5, 0.6
        sigma = np.stack([np.zeros_like(s, float), delta * s], axis=-1)
        np.testing.assert_allclose(
            two_expert_weight(s, lam, delta), gibbs_weights(sigma, lam)[:, 0], atol=1e-14)

    def test_two_expert_weight_saturates_stably(self):
        assert two_expert_weight(10000, 0.5, 0.6) == 1.0
        assert two_expert_weight(-10000, 0.5, 0.6) == 0.0


class TestMixBoundAndFeasibleInterval:
    def test_gibbs_mean_meets_the_bound(self):
        """The linear mixture must satisfy the log-mixture constraint at
        the canonical temperature; this is the substitution the fast path
        relies on."""
        rng = np.random.default_rng(3)
        values = np.array([0.8, 0.2])
        for _ in range(200):
            w = rng.dirichlet([1.0, 1.0])
            pred = pim_predict(SQUARE, SQUARE.lam, w, values)
            for y in (0.0, 1.0, 0.37):
                b = mix_bound(SQUARE, SQUARE.lam, w, values, y)
                assert SQUARE.evaluate(y, pred) <= b + 1e-12

    def test_bound_is_between_min_and_mixture_loss(self):
        w = np.array([0.5, 0.5])
        values = np.array([0.9, 0.1])
        b = mix_bound(SQUARE, 0.5, w, values, 1.0)
        losses = SQUARE.evaluate(1.0, values)
        assert losses.min() <= b <= float(w @ losses)

    def test_bound_infinite_only_when_all_mass_infinite(self):
        loss = make_loss("entropy")
        b = mix_bound(loss, 1.0, np.array([1.0, 0.0]), np.array([0.0, 0.5]), 1.0)
        assert math.isinf(b)
        b = mix_bound(loss, 1.0, np.array([0.5, 0.5]), np.array([0.0, 0.5]), 1.0)
        assert np.isfinite(b)

    def test_interval_contains_gibbs_mean(self):
        w = np.array([0.7, 0.3])
        values = np.array([0.8, 0.2])
        lo, hi = feasible_interval(SQUARE, SQUARE.lam, w, values, probes=(0.0, 1.0))
        assert lo <= float(w @ values) <= hi
        assert lo < hi

    def test_interval_endpoints_are_feasible(self):
        w = np.array([0.6, 0.4])
        values = np.array([0.8, 0.2])
        probes = (0.0, 1.0)
        lo, hi = feasible_interval(SQUARE, SQUARE.lam, w, values, probes)
        for y in probes:
            b = mix_bound(SQUARE, SQUARE.lam, w, values, y)
            assert SQUARE.evaluate(y, lo) <= b + 1e-9
            assert SQUARE.evaluate(y, hi) <= b + 1e-9

    def test_interval_empty_past_the_concavity_level(self):
        """Doubling lam far beyond the admissible level leaves no single
        prediction covering both probe outputs."""
        w = np.array([0.5, 0.5])
        values = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            feasible_interval(SQUARE, 4.0, w, values, probes=(0.0, 1.0))

    def test_pim_selectors(self):
        w = np.array([0.6, 0.4])
        values = np.array([0.8, 0.2])
        probes = (0.0, 1.0)
        lo, hi = feasible_interval(SQUARE, SQUARE.lam, w, values, probes)
        assert pim_predict(SQUARE, SQUARE.lam, w, values, probes,
                           "feasible_interval", "lower") == pytest.approx(lo)
        assert pim_predict(SQUARE, SQUARE.lam, w, values, probes,
                           "feasible_interval", "upper") == pytest.approx(hi)
        assert pim_predict(SQUARE, SQUARE.lam, w, values, probes,
                           "feasible_interval", "midpoint") == pytest.approx(0.5 * (lo + hi))

    def test_pim_argument_errors(self):
        w = np.array([0.5, 0.5])
        values = np.array([0.8, 0.2])
        with pytest.raises(ValueError):
            pim_predict(SQUARE, 0.5, w, values, substitution="nearest")
        with pytest.raises(ValueError):
            pim_predict(SQUARE, 0.5, w, values, substitution="feasible_interval")
        with pytest.raises(ValueError):
            pim_predict(SQUARE, 0.5, w, values, probes=(0.0, 1.0),
                        substitution="feasible_interval", selector="best")


def test_pm_predict_averages_weight_stacks():
    values = np.array([0.8, 0.2])
    stack = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert pm_predict(stack, values) == pytest.approx(0.5)
    assert pm_predict(np.array([0.25, 0.75]), values) == pytest.approx(0.35)


def test_erm_select_prefers_first_on_ties():
    assert erm_select(np.array([0.5, 0.5])) == 0
    assert erm_select(np.array([2.0, 1.0, 1.0])) == 1
    with pytest.raises(ValueError):
        erm_select(np.zeros((2, 2)))


class TestBuildTrace:
    def test_first_step_weights_are_uniform(self):
        y = np.array([1.0, 0.0, 1.0])
        trace = build_trace(SQUARE, 0.5, [0.8, 0.2], y)
        np.testing.assert_allclose(trace.weights[0], [0.5, 0.5])

    def test_weights_are_prequential(self):
        """Step i weights must come from losses of the first i outputs only."""
        y = np.array([1.0, 1.0, 0.0, 1.0])
        values = np.array([0.8, 0.2])
        trace = build_trace(SQUARE, 0.5, values, y)
        for i in range(len(y)):
            partial = cumulative_losses(SQUARE, values, y[:i])[:, -1]
            np.testing.assert_allclose(trace.weights[i], gibbs_weights(partial, 0.5))

    def test_gibbs_mean_predictions_and_incurred(self):
        y = np.array([1.0, 0.0])
        values = np.array([0.8, 0.2])
        trace = build_trace(SQUARE, 0.5, values, y)
        np.testing.assert_allclose(trace.predictions[0], 0.5)
        np.testing.assert_allclose(trace.incurred, SQUARE.evaluate(y, trace.predictions))

    def test_regret_bound_holds_on_random_sequences(self):
        rng = np.random.default_rng(11)
        values = np.array([0.9, 0.5, 0.1])
        for _ in range(25):
            y = rng.uniform(0, 1, size=30)
            trace = build_trace(SQUARE, SQUARE.lam, values, y)
            assert trace.regret() <= trace.regret_bound() + 1e-9

    def test_feasible_interval_trace_obeys_mix_bound_pathwise(self):
        rng = np.random.default_rng(13)
        values = np.array([0.85, 0.15])
        y = rng.choice([0.0, 1.0], size=25)
        trace = build_trace(SQUARE, SQUARE.lam, values, y,
                            substitution="feasible_interval", selector="upper")
        for i, yi in enumerate(y):
            b = mix_bound(SQUARE, SQUARE.lam, trace.weights[i], values, yi)
            assert trace.incurred[i] <= b + 1e-9
        assert trace.regret() <= trace.regret_bound() + 1e-9

    def test_per_sequence_regret_agrees_with_trace(self):
        y = np.random.default_rng(17).uniform(0, 1, size=12)
        trace = build_trace(SQUARE, 0.5, [0.7, 0.3], y)
        regret, bound = per_sequence_regret(trace.incurred, trace.table, 0.5)
        assert regret == pytest.approx(trace.regret())
        assert bound == pytest.approx(trace.regret_bound())
        assert bound == pytest.approx(math.log(2.0) / 0.5)


def test_time_averaged_weights_commute_with_mixing():
    """For constant experts the average of per-step Gibbs-mean predictions
    equals the prediction of the time-averaged weights, exactly."""
    rng = np.random.default_rng(23)
    values = np.array([0.8, 0.2])
    y = rng.choice([0.0, 1.0], size=40, p=[0.45, 0.55])
    trace = build_trace(SQUARE, SQUARE.lam, values, y)
    averaged_first = pm_predict(trace.weights, values)
    mean_of_steps = float(trace.predictions.mean())
    assert averaged_first == pytest.approx(mean_of_steps, abs=1e-14)


def test_batch_regret_matches_per_sequence_traces():
    rng = np.random.default_rng(29)
    values = np.array([0.75, 0.4, 0.1])
    y_batch = rng.uniform(0, 1, size=(6, 20))
    batch_regret, bound = gibbs_mean_regret_batch(SQUARE, SQUARE.lam, values, y_batch)
    assert bound == pytest.approx(math.log(3.0) / SQUARE.lam)
    for b in range(6):
        trace = build_trace(SQUARE, SQUARE.lam, values, y_batch[b])
        assert batch_regret[b] == pytest.approx(trace.regret(), abs=1e-10)
    with pytest.raises(ValueError):
        gibbs_mean_regret_batch(SQUARE, 0.5, values, np.zeros(5))


@given(
    w1=st.floats(0.0, 1.0),
    data=st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=30),
)
@settings(max_examples=150, deadline=None)
def test_substituted_prediction_never_leaves_the_expert_bracket(w1, data):
    values = np.array([0.8, 0.2])
    w = np.array([w1, 1.0 - w1])
    pred = pim_predict(SQUARE, SQUARE.lam, w, values)
    assert 0.2 - 1e-12 <= pred <= 0.8 + 1e-12
    y = np.asarray(data)
    trace = build_trace(SQUARE, SQUARE.lam, values, y)
    assert np.all(trace.predictions >= 0.2 - 1e-12)
    assert np.all(trace.predictions <= 0.8 + 1e-12)
