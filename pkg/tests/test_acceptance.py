"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines as they happen;
they are also collected in the "acceptance criteria" section of the
terminal summary.
"""

import math
import statistics

import numpy as np

from mssnn.cli import main
from mssnn.config import make_config
from mssnn.filters import FilterBank, TraceState
from mssnn.harness import evaluate, train
from mssnn.inference import exact_majority_error, hoeffding_bound, majority
from mssnn.learners import Learner, LearnerConfig, train_presentation
from mssnn.metrics import PredictionRecord, ece
from mssnn.network import Network, RunState, Topology, init_params, membrane_potential, \
    spike_probability
from mssnn.objectives import (DiscountedAccumulator, cross_entropy, estimate_log_loss,
                              log_marginal_estimate, softmax_weights)
from mssnn.raster import LabeledExample, SpikeRaster, synth_pattern

from conftest import oracle_for, pick, tiny_network, to_theta
import test_learners
from test_learners import finite_difference_delta, frozen_run

LN2, LN3 = math.log(2), math.log(3)


def close(got, expected, tol=1e-12):
    np.testing.assert_allclose(np.asarray(got, dtype=float), expected, rtol=0, atol=tol)


def test_criterion_1_closed_form_fidelity(criterion):
    with criterion(1, "closed-form values to 1e-12", 1.0):
        close(spike_probability(0.0), 0.5)
        close(spike_probability(LN3), 0.75)
        assert 0 < spike_probability(-50.0) < 1e-20
        close(cross_entropy(1, 0.5), LN2)
        close(cross_entropy(0, 0.5), LN2)
        close(cross_entropy(1, 0.75), math.log(4 / 3))
        for decay, stream, expected in ((0.5, [1, 0, 0], [1, 0.5, 0.25]),
                                        (0.9, [2, 3], [2, 4.8]), (0.3, [7.5], [7.5])):
            acc = DiscountedAccumulator(decay)
            close([acc.feed(f) for f in stream], expected)
        close(softmax_weights([0, 0, 0]), [1 / 3] * 3)
        close(softmax_weights([0, LN3]), [0.25, 0.75])
        close(softmax_weights([100, 100 + LN3]), [0.25, 0.75])
        close(log_marginal_estimate([-2.0]), -2.0)
        close(log_marginal_estimate([0, 0]), 0.0)
        close(log_marginal_estimate([0, LN3]), LN2)
        close(membrane_potential([1.0], [0.5], [-1.0], [0.2], 0.1), 0.4)
        close(membrane_potential([0.7, -2.0], [0, 0], [3.0], [0], -0.25), -0.25)
        trace = TraceState(FilterBank(np.array([[1.0, 0.5]])), (1,))
        values = [0.0]
        for s in (1, 0):
            values.append(float(trace.step([s])[0, 0]))
        close(values, [0.0, 1.0, 0.5])


def test_criterion_2_gradient_oracle(criterion):
    with criterion(2, "finite-difference gradient oracle for every rule", 10.0):
        # one hidden neuron with two-bump kernels, two hidden with one bump
        for net in (tiny_network(num_hidden=1), tiny_network(num_hidden=2, syn=((1.0, 0.5),))):
            params = init_params(net, seed=3, scale=0.7)
            assert len(to_theta(params, oracle_for(net))) <= 20
            for rule in ("gem", "mb", "iw"):
                cfg = LearnerConfig(rule=rule, num_samples=3, gamma=0.8, baseline=False)
                upd, _, spikes = frozen_run(net, params, cfg, seed=4)
                expected, oracle = finite_difference_delta(net, params, spikes, rule, 0.8)
                got = pick(upd.delta, oracle)
                assert np.linalg.norm(got - expected) / np.linalg.norm(expected) < 1e-4


def test_criterion_3_estimator_oracle(criterion):
    with criterion(3, "log-loss estimate within 1% of enumeration", 60.0):
        net = tiny_network(num_hidden=2)
        params = init_params(net, seed=8, scale=1.5)
        params.bias[:] = [0.4, -0.6, 0.1]
        ex = LabeledExample(synth_pattern(3, 2, 3, 0.6), SpikeRaster(np.array([[1, 0, 1]])))
        oracle = oracle_for(net)
        exact = oracle.exact_clamped_loss(to_theta(params, oracle),
                                          ex.input.spikes.astype(int).tolist(),
                                          ex.target.spikes.astype(int).tolist(), 3)
        estimate = estimate_log_loss(params, net, ex, num_realizations=100_000, seed=0)
        assert abs(estimate - exact) / exact < 0.01


def test_criterion_4_majority_oracle(criterion):
    with criterion(4, "majority vote Monte Carlo and Hoeffding bound", 10.0):
        rng = np.random.default_rng(0)
        p_error, trials = 0.25, 10_000
        for votes in (1, 3, 11):
            wrong = rng.random((trials, votes)) < p_error
            hits = sum(majority(row.astype(int), 2)[0] == 0 for row in wrong)
            assert abs(hits / trials - (1 - exact_majority_error(p_error, votes))) <= 0.02
        for votes in range(1, 51):
            assert exact_majority_error(p_error, votes) <= hoeffding_bound(p_error, votes)


def memorization(seed, **overrides):
    values = dict(task="memorize", num_inputs=16, num_hidden=8, num_visible=16, horizon=40,
                  presentations=100, seed=seed, data_seed=seed)
    values.update(overrides)
    return make_config(values)


def test_criterion_5_memorization_trend(criterion):
    with criterion(5, "more samples train better; no-hidden loss decreases", 300.0):
        seeds = range(5)
        final = {}
        for k in (1, 10):
            final[k] = statistics.median(
                train(memorization(s, num_samples=k, learning_rate=2e-2,
                                   eval_every=100))[0].rows[-1].log_loss for s in seeds)
        print(f"median final log-loss: K=1 {final[1]:.3f}, K=10 {final[10]:.3f}")
        assert final[10] < final[1]
        for s in seeds:
            report = train(memorization(s, num_hidden=0, eval_every=1))[0]
            losses = [row.log_loss for row in report.rows]
            assert len(losses) == 101
            assert all(b < a for a, b in zip(losses, losses[1:]))


def test_criterion_6_communication_load(criterion):
    with criterion(6, "communication counters match closed forms", 10.0):
        net = Network(Topology.default(2, 200, 3))
        params = init_params(net, 0)
        horizon = 12
        ex = LabeledExample(synth_pattern(0, 2, horizon, 0.5), synth_pattern(1, 3, horizon, 0.5))
        for rule, broadcast in (("gem", 1015), ("mb", 1000), ("iw", 215)):
            learner = Learner(net, LearnerConfig(rule=rule, num_samples=5))
            train_presentation(learner, RunState(net, 5, 0), params, ex, 1e-3)
            assert learner.counters.unicast_total == horizon * 15
            assert learner.counters.broadcast_total == horizon * broadcast


def test_criterion_7_thread_determinism(criterion, tmp_path):
    with criterion(7, "report.csv identical under 1 and 4 threads", 60.0):
        cfg = tmp_path / "run.toml"
        cfg.write_text('task = "memorize"\nnum_inputs = 6\nnum_hidden = 4\nnum_visible = 6\n'
                       'horizon = 20\npresentations = 10\nnum_samples = 6\n'
                       'learning_rate = 0.01\nseed = 11\n')
        for threads in ("1", "4"):
            assert main(["train", "--config", str(cfg), "--threads", threads,
                         "--out", str(tmp_path / threads)]) == 0
        one = (tmp_path / "1" / "report.csv").read_bytes()
        assert one == (tmp_path / "4" / "report.csv").read_bytes()
        assert one.count(b"\n") == 12


def test_criterion_8_calibration(criterion):
    with criterion(8, "calibration and entropy fixtures", 60.0):
        records = []
        for conf, hits, total in ((0.2, 1, 5), (0.5, 2, 4), (0.75, 3, 4), (1.0, 3, 3)):
            records += [PredictionRecord(0, 0 if i < hits else 1, conf, 0.0)
                        for i in range(total)]
        assert ece(records) < 1e-12
        single = [PredictionRecord(0, 0 if i < 5 else 1, 0.8, 0.0) for i in range(10)]
        assert ece(single) == 0.3
        cfg = make_config(dict(task="classify", num_inputs=6, num_hidden=3, num_visible=3,
                               num_classes=3, horizon=10, num_train=15, num_test=15,
                               num_votes=1, num_samples=2, eval_every=5,
                               learning_rate=0.01))
        report, params, net = train(cfg)
        for row in report.rows:
            assert row.entropy_correct in (0.0, None)
            assert row.entropy_incorrect in (0.0, None)
        assert all(ex["entropy"] == 0.0 for ex in evaluate(params, net, cfg)["examples"])


def test_criterion_9_invariances(criterion):
    with criterion(9, "softmax shift, weight normalisation, silent source", 30.0):
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = rng.normal(scale=20, size=rng.integers(1, 12))
            base = softmax_weights(v)
            assert abs(base.sum() - 1) < 1e-12
            for shift in (-500.0, 500.0):
                close(softmax_weights(v + shift), base)
        net = tiny_network()
        params = init_params(net, seed=3, scale=0.7)
        learner = Learner(net, LearnerConfig(num_samples=5))
        ex = LabeledExample(synth_pattern(0, 2, 1000, 0.5), synth_pattern(1, 1, 1000, 0.5))
        stats = train_presentation(learner, RunState(net, 5, 0), params, ex, 1e-2)
        assert stats.steps == 1000 and stats.max_weight_sum_error < 1e-12
        for rule in ("gem", "mb", "iw"):
            test_learners.TestThreeFactor().test_silent_source(rule)
