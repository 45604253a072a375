import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactbayes.bayes import (Belief, ContactFilter, TransitionMatrix, bayes_step, measurement_only,
                                measurement_only_log, predict, run_filter, sigmoid, transition_model, update,
                                update_log)
from contactbayes.config import EstimatorConfig
from contactbayes.density import TorqueSample, fit_kde
from contactbayes.errors import SignalValidityError
from contactbayes.spectral import AccelWindow
from contactbayes.synth import GRAVITY, ScenarioConfig, generate_trace
from tests.oracles import hmm_forward, logistic

prob = st.floats(0.0, 1.0)


def window_of(values):
    w = AccelWindow(len(values))
    for v in values:
        w.push(v)
    return w


class TestSigmoid:
    def test_values_at_offset(self):
        assert sigmoid(8, 8, 1) == 0.5
        assert sigmoid(7.5, 7.5, 2.5) == 0.5

    def test_one_past_offset(self):
        assert sigmoid(9, 8, 1) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)
        assert sigmoid(9, 8, 1) == pytest.approx(0.7311, abs=1e-4)

    def test_saturates_without_overflow(self):
        assert sigmoid(1e6, 8, 1) == 1.0
        assert sigmoid(-1e6, 8, 1) == 0.0

    def test_rejects_non_positive_slope(self):
        with pytest.raises(ValueError):
            sigmoid(0, 0, 0)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-10, 10), st.floats(0.1, 5))
    def test_matches_logistic_and_monotone(self, a, b, off, slope):
        assert sigmoid(a, off, slope) == pytest.approx(logistic(a, off, slope), abs=1e-15)
        lo, hi = sorted((a, b))
        assert sigmoid(lo, off, slope) <= sigmoid(hi, off, slope)


class TestBeliefAndMatrix:
    def test_belief_must_normalize(self):
        with pytest.raises(ValueError):
            Belief(0.6, 0.6)

    def test_belief_range(self):
        with pytest.raises(ValueError):
            Belief(1.5, -0.5)

    def test_clamp(self):
        b = Belief(1.0, 0.0).clamped(1e-9)
        assert b.p_contact == 1 - 1e-9

    @given(prob, prob)
    def test_matrix_rows_stochastic(self, ps, pl):
        t = TransitionMatrix(ps, pl)
        m = t.matrix
        assert np.all((m >= 0) & (m <= 1))
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
        assert m[1, 0] == pytest.approx(pl * ps)
        assert m[0, 1] == pytest.approx((1 - pl) * ps)


class TestTransitionModel:
    def test_zero_signal(self):
        t = transition_model(window_of([0.0] * 32))
        assert t.p_switch == pytest.approx(1 / (1 + math.exp(8)))
        assert t.p_switch == pytest.approx(3.35e-4, rel=1e-2)
        assert t.p_land_given_switch == 0.5

    def test_quiet_gravity_is_near_identity(self):
        t = transition_model(window_of([GRAVITY] * 32))
        assert np.allclose(t.matrix, np.eye(2), atol=1e-3)

    def test_underfull_window_falls_back(self):
        w = AccelWindow(32)
        w.push(50.0)
        t = transition_model(w)
        assert t.p_switch == pytest.approx(sigmoid(0, 8, 1))

    def test_landing_waveform_points_to_contact(self):
        # free fall, then the generator's ringing impact at the newest samples
        cfg = ScenarioConfig()
        x = np.zeros(32)
        x[-2:] = GRAVITY + cfg.landing_impulse_amplitude * (-0.5) ** np.arange(2)
        t = transition_model(window_of(x))
        assert t.p_switch > 0.99
        assert t.p_land_given_switch > 0.9

    def test_single_spike_leans_to_landing(self):
        x = np.zeros(32)
        x[20] = 40.0
        t = transition_model(window_of(x))
        # a lone spike has a flat spectrum: the median sits in the upper half of the band
        assert t.p_land_given_switch > 0.5

    def test_smooth_bump_points_to_takeoff(self):
        n = 32
        x = 8.0 * np.cos(np.pi * (np.arange(n) - (n - 1) / 2) / n)  # half-cosine across the window
        t = transition_model(window_of(x))
        assert t.p_land_given_switch < 0.1

    def test_switch_feature_max_bin(self):
        x = np.r_[np.zeros(24), 6.0 * np.ones(8)]
        total = transition_model(window_of(x))
        peak = transition_model(window_of(x), EstimatorConfig(switch_feature="max_bin"))
        assert peak.p_switch < total.p_switch


class TestPredict:
    def test_identity(self):
        b = Belief(0.3, 0.7)
        assert predict(b, TransitionMatrix.identity()) == b

    def test_hand_example(self):
        prior = predict(Belief(1.0, 0.0), TransitionMatrix(0.3, 0.5))
        assert prior.p_contact == pytest.approx(0.85)
        assert prior.p_no_contact == pytest.approx(0.15)

    @given(prob, prob, prob)
    def test_normalized(self, pc, ps, pl):
        prior = predict(Belief.from_contact(pc), TransitionMatrix(ps, pl))
        assert abs(prior.p_contact + prior.p_no_contact - 1) <= 1e-12

    @given(st.floats(0.01, 0.99), st.floats(-20, 20), st.floats(-20, 20))
    def test_more_power_pulls_toward_other_state(self, pc, lo, hi):
        lo, hi = sorted((lo, hi))
        if hi - lo < 1e-3:
            return
        b = Belief.from_contact(pc)
        cfg = EstimatorConfig()
        # with an even direction split, more switching moves the prior towards 1/2
        p_lo = predict(b, TransitionMatrix(sigmoid(lo, 8, 1), 0.5))
        p_hi = predict(b, TransitionMatrix(sigmoid(hi, 8, 1), 0.5))
        if pc > 0.5:
            assert p_hi.p_no_contact >= p_lo.p_no_contact
        elif pc < 0.5:
            assert p_hi.p_contact >= p_lo.p_contact
        assert cfg.switch_sigmoid.offset == 8


class TestUpdate:
    def test_equal_likelihood_keeps_prior(self):
        prior = Belief(0.3, 0.7)
        post = update_log(prior, math.log(0.2), math.log(0.2))
        assert post.p_contact == pytest.approx(0.3, abs=1e-15)

    def test_hand_example(self):
        post = update_log(Belief(0.5, 0.5), math.log(0.3), math.log(0.1))
        assert post.p_contact == pytest.approx(0.75, abs=1e-15)

    def test_random_against_two_term_formula(self, rng):
        for _ in range(500):
            pc = rng.uniform(0.001, 0.999)
            fc, fn = rng.uniform(1e-6, 2, 2)
            post = update_log(Belief.from_contact(pc), math.log(fc), math.log(fn))
            assert post.p_contact == pytest.approx(fc * pc / (fc * pc + fn * (1 - pc)), abs=1e-12)

    @given(st.floats(0.01, 0.99), st.floats(-30, 0), st.floats(-30, 0), st.floats(-50, 50))
    def test_scale_invariance(self, pc, lc, ln, log_lam):
        a = update_log(Belief.from_contact(pc), lc, ln)
        b = update_log(Belief.from_contact(pc), lc + log_lam, ln + log_lam)
        assert a.p_contact == pytest.approx(b.p_contact, abs=1e-12)

    def test_extreme_log_likelihoods_stay_normalized(self):
        post = update_log(Belief(0.5, 0.5), -1e4, 0.0)
        assert post.p_contact == 0.0 and post.p_no_contact == 1.0


class TestMeasurementOnly:
    def test_symmetric(self):
        assert measurement_only_log(-3.0, -3.0) == 0.5

    def test_dominance(self, clean_models):
        mc, mn = clean_models
        assert measurement_only(TorqueSample(10.0, 3.0), mc, mn) == pytest.approx(1.0)

    def test_matches_flat_prior_update(self, clean_models, rng):
        mc, mn = clean_models
        for x, y in np.abs(rng.normal(0, 6, (1000, 2))):
            m = TorqueSample(x, y)
            assert measurement_only(m, mc, mn) == pytest.approx(update(Belief.flat(), m, mc, mn).p_contact, abs=1e-12)


class TestFilter:
    def test_first_step_uninformative(self, rng):
        pts = np.abs(rng.normal(5, 1, (200, 2)))
        model = fit_kde(pts, "C")
        f = ContactFilter(model, model)
        r = f.step(GRAVITY, TorqueSample(5.0, 5.0))
        assert r.belief.p_contact == pytest.approx(0.5, abs=1e-12)

    def test_converges_on_contact(self, clean_models):
        trace = generate_trace(ScenarioConfig(roll_duration=1.0))
        f = ContactFilter(*clean_models)
        for t in range(20):
            r = f.step(trace.acc_z[t], TorqueSample(*trace.torques[t]))
        assert r.belief.p_contact > 0.99

    def test_non_finite_rejected_state_unchanged(self, clean_models):
        f = ContactFilter(*clean_models)
        f.step(GRAVITY, TorqueSample(10.0, 3.0))
        before = (f.belief, f.window.values().tolist(), f.step_index)
        with pytest.raises(SignalValidityError):
            f.step(math.nan, TorqueSample(10.0, 3.0))
        assert (f.belief, f.window.values().tolist(), f.step_index) == before

    def test_run_filter_is_step_loop(self, clean_models):
        trace = generate_trace(ScenarioConfig(roll_duration=0.5, stabilization_duration=0.5, n_drops=2)
                               .with_noise(0.5, 0.5, seed=3))
        f = ContactFilter(*clean_models)
        stepped = [f.step(a, TorqueSample(*m)) for a, m in zip(trace.acc_z, trace.torques)]
        run = run_filter(trace.acc_z, trace.torques, *clean_models)
        assert np.array_equal(run.p_contact, [s.belief.p_contact for s in stepped])
        assert np.array_equal(run.p_switch, [s.transition.p_switch for s in stepped])

    def test_step_matches_forward_algorithm(self, clean_models):
        trace = generate_trace(ScenarioConfig(n_drops=3).with_noise(1.0, 1.0, seed=8))
        f = ContactFilter(*clean_models)
        res = [f.step(a, TorqueSample(*m)) for a, m in zip(trace.acc_z, trace.torques)]
        # likelihoods scaled by a common factor per step to keep the oracle in range
        lc = np.array([r.log_f_contact for r in res])
        ln = np.array([r.log_f_no_contact for r in res])
        top = np.maximum(lc, ln)
        oracle = hmm_forward([r.transition.matrix for r in res], np.exp(lc - top), np.exp(ln - top), clamp=1e-9)
        got = np.array([r.belief.p_contact for r in res])
        assert np.max(np.abs(got - oracle)) < 1e-9

    def test_deterministic(self, clean_models):
        trace = generate_trace(ScenarioConfig().with_noise(1.0, 1.0, seed=2))
        a = run_filter(trace.acc_z, trace.torques, *clean_models)
        b = run_filter(trace.acc_z, trace.torques, *clean_models)
        assert np.array_equal(a.p_contact, b.p_contact)

    def test_measurement_only_mode(self, clean_models):
        trace = generate_trace(ScenarioConfig(roll_duration=0.5, stabilization_duration=0.5))
        run = run_filter(trace.acc_z, trace.torques, *clean_models, mode="measurement-only")
        mc, mn = clean_models
        for t in range(0, len(trace), 37):
            assert run.p_contact[t] == pytest.approx(measurement_only(TorqueSample(*trace.torques[t]), mc, mn),
                                                     abs=1e-15)

    def test_run_filter_shape_checks(self, clean_models):
        with pytest.raises(ValueError):
            run_filter(np.zeros(10), np.zeros((9, 2)), *clean_models)
        with pytest.raises(SignalValidityError):
            run_filter(np.r_[np.zeros(9), np.nan], np.zeros((10, 2)), *clean_models)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(prob, prob, st.floats(-40, 5), st.floats(-40, 5)), min_size=1, max_size=40))
    def test_belief_normalized_every_step(self, steps):
        b = Belief.flat()
        for ps, pl, lc, ln in steps:
            _, b = bayes_step(b, TransitionMatrix(ps, pl), lc, ln)
            assert abs(b.p_contact + b.p_no_contact - 1) <= 1e-12
            assert 0 <= b.p_contact <= 1
