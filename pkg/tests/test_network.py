from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mssnn.network import (Network, RunState, Topology, forward_step_clamped,
                           init_params, membrane_potential, membrane_potentials,
                           run_clamped, run_free, sample_streams, spike_probability,
                           zero_params)
from mssnn.raster import LabeledExample, SpikeRaster, synth_pattern

from conftest import oracle_for, to_theta


def small_net(num_inputs=3, num_hidden=2, num_visible=2, recurrent=False):
    return Network(Topology.default(num_inputs, num_hidden, num_visible, recurrent))


class TestTopology:
    def test_default_edges(self):
        top = Topology.default(2, 2, 3)
        assert top.num_neurons == 5 and top.num_sources == 7
        assert list(top.hidden_ids) == [0, 1] and list(top.visible_ids) == [2, 3, 4]
        assert top.pre_synaptic(0) == [0, 1]
        assert top.pre_synaptic(3) == [0, 1, 2, 3]

    def test_no_visible_to_visible(self):
        top = Topology.default(4, 3, 5)
        vis_sources = [top.num_inputs + i for i in top.visible_ids]
        assert not top.connectivity[:, vis_sources].any()

    def test_recurrent_flag(self):
        top = Topology.default(1, 2, 1, recurrent_hidden=True)
        assert top.pre_synaptic(0) == [0, 1, 2]

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            Topology(1, 1, 1, np.zeros((2, 2), dtype=bool))

    def test_needs_visible(self):
        with pytest.raises(ValueError):
            Topology.default(2, 1, 0)

    def test_equality(self):
        assert Topology.default(2, 1, 1) == Topology.default(2, 1, 1)
        assert Topology.default(2, 1, 1) != Topology.default(2, 1, 1, recurrent_hidden=True)


class TestInitParams:
    def test_scale_zero(self):
        p = init_params(small_net(), seed=1, scale=0.0)
        assert all(not a.any() for a in p.arrays())

    def test_deterministic(self):
        assert init_params(small_net(), 7) == init_params(small_net(), 7)
        assert init_params(small_net(), 7) != init_params(small_net(), 8)

    def test_gaussian_moments(self):
        net = Network(Topology.default(100, 0, 50))
        p = init_params(net, seed=0, scale=0.1)
        w = p.synaptic[net.topology.connectivity].ravel()
        assert w.size == 10_000
        assert abs(w.mean()) < 0.01
        assert 0.08 <= w.std() <= 0.12

    def test_masked_and_zero_bias(self):
        net = small_net()
        p = init_params(net, seed=2)
        assert not p.synaptic[~net.topology.connectivity].any()
        assert not p.bias.any()

    def test_negative_scale(self):
        with pytest.raises(ValueError):
            init_params(small_net(), 0, scale=-1.0)

    def test_check_finite(self):
        p = zero_params(small_net())
        p.bias[0] = np.nan
        assert not p.is_finite()
        with pytest.raises(FloatingPointError):
            p.check_finite()


class TestPotential:
    def test_direct_sum(self):
        assert membrane_potential([1.0], [0.5], -1.0, 0.2, 0.1) == pytest.approx(0.4, abs=1e-15)

    def test_bias_only(self):
        assert membrane_potential([0.3, 2.0], [0.0, 0.0], 5.0, 0.0, -0.7) == -0.7

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           st.lists(st.floats(0, 3), min_size=3, max_size=3))
    def test_linear(self, w, tr):
        u = membrane_potential(w[:2], tr[:2], w[2], tr[2], 0.3)
        u2 = membrane_potential(2 * np.array(w[:2]), tr[:2], 2 * w[2], tr[2], 0.6)
        assert u2 == pytest.approx(2 * u, rel=1e-12, abs=1e-12)

    def test_batched_matches_oracle(self, tiny):
        net, params = tiny
        oracle = oracle_for(net)
        theta = to_theta(params, oracle)
        ex = LabeledExample(synth_pattern(5, 2, 8, 0.5), synth_pattern(6, 1, 8, 0.5))
        results = run_clamped(params, net, ex, 3, seed=2)
        inputs = ex.input.spikes.astype(int).tolist()
        for k in range(3):
            neurons = np.array([r.spikes[k] for r in results]).T.astype(int).tolist()
            for t, res in enumerate(results, start=1):
                for i in range(2):
                    expected = oracle.potential(theta, inputs, neurons, i, t)
                    assert res.potential[k, i] == pytest.approx(expected, abs=1e-12)

    def test_batched_matches_scalar(self, tiny):
        net, params = tiny
        rng = np.random.default_rng(1)
        syn = rng.random((4, 4, 2))
        soma = rng.random((4, 2, 1))
        u = membrane_potentials(params, syn, soma)
        for k in range(4):
            for i in range(2):
                ref = membrane_potential(params.synaptic[i], syn[k], params.somatic[i],
                                         soma[k, i], params.bias[i])
                assert u[k, i] == pytest.approx(ref, abs=1e-12)


class TestSigmoid:
    def test_values(self):
        assert spike_probability(0.0) == 0.5
        assert spike_probability(np.log(3.0)) == pytest.approx(0.75, abs=1e-15)

    def test_tails(self):
        p = spike_probability(-50.0)
        assert 0.0 < p < 1e-20
        with np.errstate(over="raise", invalid="raise"):
            assert spike_probability(np.array([-1e4, 1e4])).tolist() == [0.0, 1.0]

    @given(st.floats(-700, 700))
    def test_symmetry_and_range(self, u):
        p, q = spike_probability(u), spike_probability(-u)
        assert 0.0 <= p <= 1.0
        assert p + q == pytest.approx(1.0, abs=1e-15)

    def test_monotone(self):
        u = np.linspace(-40, 40, 2001)
        assert (np.diff(spike_probability(u)) >= 0).all()


class TestRunState:
    def test_forced_hidden_spikes(self):
        net = small_net()
        p = zero_params(net)
        p.bias[:2] = 1e4
        state = RunState(net, 3, seed=0)
        for _ in range(5):
            res = forward_step_clamped(state, p, np.zeros(3, bool), np.zeros(2, bool))
            assert res.spikes[:, :2].all()

    def test_clamping(self):
        net = small_net()
        p = init_params(net, 1, scale=2.0)
        p.bias[2:] = -1e4
        target = np.array([True, False])
        state = RunState(net, 4, seed=9)
        for _ in range(10):
            res = forward_step_clamped(state, p, np.ones(3, bool), target)
            assert (res.spikes[:, 2:] == target).all()

    def test_hidden_rate_band(self):
        net = small_net()
        p = zero_params(net)
        p.bias[:2] = 0.8  # no hidden inputs are active, so the rate is constant
        state = RunState(net, 2, seed=4)
        counts = np.zeros(2)
        steps = 10_000
        for _ in range(steps):
            res = state.advance(p, np.zeros(3, bool), np.zeros(2, bool))
            counts += res.spikes[:, 0]
        prob = 1 / (1 + np.exp(-0.8))
        band = 3 * np.sqrt(steps * prob * (1 - prob))
        np.testing.assert_array_less(np.abs(counts - steps * prob), band)

    def test_samples_differ(self):
        net = small_net()
        state = RunState(net, 2, seed=0)
        spikes = [state.advance(zero_params(net), np.zeros(3, bool)).spikes for _ in range(50)]
        s = np.array(spikes)
        assert not np.array_equal(s[:, 0], s[:, 1])

    def test_shape_errors(self):
        net = small_net()
        state = RunState(net, 1, seed=0)
        with pytest.raises(ValueError):
            state.advance(zero_params(net), np.zeros(2, bool))
        with pytest.raises(ValueError):
            state.advance(zero_params(net), np.zeros(3, bool), np.zeros(3, bool))

    def test_streams_independent_of_count(self):
        a = [g.random() for g in sample_streams(5, 3)]
        b = [g.random() for g in sample_streams(5, 6)][:3]
        assert a == b

    def test_thread_determinism(self):
        net = small_net(recurrent=True)
        p = init_params(net, 3, scale=1.0)
        ex = LabeledExample(synth_pattern(1, 3, 30, 0.4), synth_pattern(2, 2, 30, 0.4))
        serial = run_clamped(p, net, ex, 6, seed=11)
        with ThreadPoolExecutor(4) as pool:
            threaded = run_clamped(p, net, ex, 6, seed=11, executor=pool)
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.spikes, b.spikes)
            np.testing.assert_array_equal(a.syn_traces, b.syn_traces)
            np.testing.assert_array_equal(a.potential, b.potential)

    def test_causality(self):
        net = small_net()
        p = init_params(net, 3, scale=1.0)
        x = synth_pattern(1, 3, 12, 0.5)
        flipped = x.spikes.copy()
        flipped[0, 7] ^= True
        a = run_clamped(p, net, LabeledExample(x, SpikeRaster.zeros(2, 12)), 2, seed=1)
        b = run_clamped(p, net, LabeledExample(SpikeRaster(flipped), SpikeRaster.zeros(2, 12)),
                        2, seed=1)
        for t in range(8):  # potentials up to t = 8 only see spikes before t = 8
            np.testing.assert_array_equal(a[t].potential, b[t].potential)
        assert not np.array_equal(a[8].potential, b[8].potential)


class TestRunFree:
    def test_zero_params_rate(self):
        net = small_net(num_visible=4)
        outs = run_free(zero_params(net), net, SpikeRaster.zeros(3, 500), 1, seed=2)
        n = 4 * 500
        count = outs[0].spikes.sum()
        assert abs(count - n / 2) < 3 * np.sqrt(n / 4)

    def test_deterministic(self):
        net = small_net()
        p = init_params(net, 0, scale=1.0)
        x = synth_pattern(3, 3, 20, 0.3)
        assert run_free(p, net, x, 1, seed=4) == run_free(p, net, x, 1, seed=4)

    def test_silenced(self):
        net = small_net()
        p = init_params(net, 0)
        p.bias[2:] = -1e4
        outs = run_free(p, net, synth_pattern(3, 3, 20, 0.3), 5, seed=0)
        assert len(outs) == 5 and not any(o.spikes.any() for o in outs)

    def test_channel_mismatch(self):
        net = small_net()
        with pytest.raises(ValueError):
            run_free(zero_params(net), net, SpikeRaster.zeros(4, 3), 1, seed=0)
