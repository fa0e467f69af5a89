"""GLM spiking network: topology, parameters and K-sample forward dynamics.

Neurons are numbered ``0..N-1`` with hidden neurons first and visible
neurons after them.  Pre-synaptic *sources* are numbered with the exogenous
input channels first, so neuron ``n`` is source ``num_inputs + n``.

Every neuron ``i`` has one weight per (connected source, synaptic basis
kernel), one self-memory weight per somatic basis kernel, and a bias.  Its
membrane potential at time ``t`` is::

    u = sum_{j, m} w[i, j, m] * syn_trace[j, m] + sum_m w_self[i, m] * soma_trace[i, m] + bias[i]

where all traces are computed from spikes up to ``t - 1``.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from .filters import FilterBank, TraceState, raised_cosine_bank
from .raster import LabeledExample, SpikeRaster


@dataclass(frozen=True, eq=False)
class Topology:
    """Directed synaptic graph over exogenous inputs, hidden and visible neurons.

    ``connectivity[i, j]`` is true when source ``j`` is pre-synaptic to
    neuron ``i``.
    """

    num_inputs: int
    num_hidden: int
    num_visible: int
    connectivity: np.ndarray

    def __post_init__(self):
        if self.num_inputs < 0 or self.num_hidden < 0 or self.num_visible < 1:
            raise ValueError("need num_inputs >= 0, num_hidden >= 0, num_visible >= 1")
        conn = np.asarray(self.connectivity, dtype=bool)
        if conn.shape != (self.num_neurons, self.num_sources):
            raise ValueError(
                f"connectivity must have shape {(self.num_neurons, self.num_sources)}, "
                f"got {conn.shape}")
        conn = conn.copy()
        conn.setflags(write=False)
        object.__setattr__(self, "connectivity", conn)

    @classmethod
    def default(cls, num_inputs: int, num_hidden: int, num_visible: int,
                recurrent_hidden: bool = False) -> "Topology":
        """Hidden neurons read all inputs; visible neurons read inputs and hidden.

        No visible-to-visible edges.  Hidden-to-hidden edges only with
        ``recurrent_hidden``.
        """
        n = num_hidden + num_visible
        conn = np.zeros((n, num_inputs + n), dtype=bool)
        conn[:, :num_inputs] = True
        conn[num_hidden:, num_inputs:num_inputs + num_hidden] = True
        if recurrent_hidden:
            conn[:num_hidden, num_inputs:num_inputs + num_hidden] = True
        return cls(num_inputs, num_hidden, num_visible, conn)

    @property
    def num_neurons(self) -> int:
        return self.num_hidden + self.num_visible

    @property
    def num_sources(self) -> int:
        return self.num_inputs + self.num_neurons

    @property
    def hidden_ids(self) -> range:
        return range(self.num_hidden)

    @property
    def visible_ids(self) -> range:
        return range(self.num_hidden, self.num_neurons)

    def pre_synaptic(self, neuron: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.connectivity[neuron])]

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.num_inputs, self.num_hidden, self.num_visible) == (
            other.num_inputs, other.num_hidden, other.num_visible) and bool(
            np.array_equal(self.connectivity, other.connectivity))


@dataclass(frozen=True)
class Network:
    """Topology plus the synaptic and somatic kernel banks."""

    topology: Topology
    synaptic_bank: FilterBank = field(default_factory=lambda: raised_cosine_bank(2, 10))
    somatic_bank: FilterBank = field(default_factory=lambda: raised_cosine_bank(1, 10))


@dataclass(eq=False)
class ModelParams:
    """Learnable parameters of all neurons.

    ``synaptic`` has shape ``(N, S, M)`` and is zero wherever the topology
    has no edge; ``somatic`` has shape ``(N, M_soma)``; ``bias`` shape ``(N,)``.
    """

    synaptic: np.ndarray
    somatic: np.ndarray
    bias: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(self.synaptic.copy(), self.somatic.copy(), self.bias.copy())

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.synaptic, self.somatic, self.bias

    def is_finite(self) -> bool:
        return all(bool(np.isfinite(a).all()) for a in self.arrays())

    def check_finite(self) -> None:
        if not self.is_finite():
            raise FloatingPointError("non-finite model parameter")

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in zip(self.arrays(), other.arrays()))


def zero_params(net: Network) -> ModelParams:
    top = net.topology
    return ModelParams(
        synaptic=np.zeros((top.num_neurons, top.num_sources, net.synaptic_bank.num_basis)),
        somatic=np.zeros((top.num_neurons, net.somatic_bank.num_basis)),
        bias=np.zeros(top.num_neurons),
    )


def init_params(net: Network, seed: int, scale: float = 0.1) -> ModelParams:
    """I.i.d. N(0, scale^2) synaptic and self-memory weights, zero biases."""
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    params = zero_params(net)
    rng = np.random.default_rng(seed)
    syn = scale * rng.standard_normal(params.synaptic.shape)
    params.synaptic = syn * net.topology.connectivity[:, :, None]
    params.somatic = scale * rng.standard_normal(params.somatic.shape)
    return params


def membrane_potential(synaptic_weights, synaptic_traces, somatic_weight,
                       somatic_trace, bias: float) -> float:
    """Membrane potential of a single neuron from its weights and traces."""
    u = float(np.sum(np.asarray(synaptic_weights, dtype=float)
                     * np.asarray(synaptic_traces, dtype=float)))
    u += float(np.sum(np.asarray(somatic_weight, dtype=float)
                      * np.asarray(somatic_trace, dtype=float)))
    return u + float(bias)


def membrane_potentials(params: ModelParams, syn_traces: np.ndarray,
                        soma_traces: np.ndarray) -> np.ndarray:
    """Batched potentials, shape ``(K, N)``.

    ``syn_traces`` is ``(K, S, M)`` and ``soma_traces`` is ``(K, N, M_soma)``.
    """
    n, s, m = params.synaptic.shape
    k = syn_traces.shape[0]
    u = syn_traces.reshape(k, s * m) @ params.synaptic.reshape(n, s * m).T
    u += np.einsum("knm,nm->kn", soma_traces, params.somatic)
    return u + params.bias


def spike_probability(u):
    """Sigmoid firing probability; stable for large ``|u|``."""
    return expit(u)


def sample_streams(seed: int, num_samples: int) -> list[np.random.Generator]:
    """One independent generator per sample, keyed by ``(seed, sample index)``."""
    return [np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(k,)))) for k in range(num_samples)]


@dataclass
class StepResult:
    """Everything the learning rules need from one forward step at time ``t``.

    Arrays are ``(K, N)`` except the traces, which are the inputs to the
    potentials at this step: ``syn_traces`` ``(K, S, M)`` and
    ``soma_traces`` ``(K, N, M_soma)``.
    """

    potential: np.ndarray
    probability: np.ndarray
    spikes: np.ndarray
    syn_traces: np.ndarray
    soma_traces: np.ndarray


class RunState:
    """Dynamic state of ``K`` independent samples of one network.

    Each sample owns a private random stream, so spike draws do not depend
    on the order in which samples are processed.  When ``executor`` is set,
    the per-sample draws are dispatched to it.
    """

    def __init__(self, net: Network, num_samples: int, seed: int,
                 executor: Optional[Executor] = None):
        if num_samples < 1:
            raise ValueError(f"need at least one sample, got {num_samples}")
        top = net.topology
        self.net = net
        self.num_samples = num_samples
        self.syn = TraceState(net.synaptic_bank, (num_samples, top.num_sources))
        self.soma = TraceState(net.somatic_bank, (num_samples, top.num_neurons))
        self.streams = sample_streams(seed, num_samples)
        self.executor = executor
        self.t = 0

    def reset(self) -> None:
        """Clear spike histories; the random streams carry on."""
        self.syn.reset()
        self.soma.reset()
        self.t = 0

    def _draw(self) -> np.ndarray:
        n = self.net.topology.num_neurons
        if self.executor is None:
            rows = [g.random(n) for g in self.streams]
        else:
            rows = list(self.executor.map(lambda g: g.random(n), self.streams))
        return np.stack(rows)

    def advance(self, params: ModelParams, inputs_t, targets_t=None) -> StepResult:
        """Run time step ``t + 1``.

        Hidden neurons always sample.  Visible neurons emit ``targets_t`` in
        every sample when it is given (clamped), and sample otherwise.
        """
        top = self.net.topology
        inputs_t = np.asarray(inputs_t, dtype=bool)
        if inputs_t.shape != (top.num_inputs,):
            raise ValueError(f"expected {top.num_inputs} input spikes, got {inputs_t.shape}")
        syn_tr = self.syn.values
        soma_tr = self.soma.values
        u = membrane_potentials(params, syn_tr, soma_tr)
        p = spike_probability(u)
        spikes = self._draw() < p
        if targets_t is not None:
            targets_t = np.asarray(targets_t, dtype=bool)
            if targets_t.shape != (top.num_visible,):
                raise ValueError(
                    f"expected {top.num_visible} target spikes, got {targets_t.shape}")
            spikes[:, top.num_hidden:] = targets_t
        sources = np.concatenate(
            [np.broadcast_to(inputs_t, (self.num_samples, top.num_inputs)), spikes], axis=1)
        self.syn.step(sources)
        self.soma.step(spikes)
        self.t += 1
        return StepResult(u, p, spikes, syn_tr, soma_tr)


def forward_step_clamped(state: RunState, params: ModelParams, inputs_t,
                         targets_t) -> StepResult:
    """One training step: hidden neurons sample, visible neurons follow the data."""
    return state.advance(params, inputs_t, targets_t)


def run_clamped(params: ModelParams, net: Network, example: LabeledExample,
                num_samples: int, seed: int,
                executor: Optional[Executor] = None) -> list[StepResult]:
    """Clamped pass over a whole example with frozen parameters."""
    state = RunState(net, num_samples, seed, executor)
    return [state.advance(params, example.input.column(t), example.target.column(t))
            for t in range(1, example.horizon + 1)]


def run_free(params: ModelParams, net: Network, inputs: SpikeRaster, num_samples: int,
             seed: int, executor: Optional[Executor] = None) -> list[SpikeRaster]:
    """Sample ``num_samples`` independent visible responses to ``inputs``."""
    top = net.topology
    if inputs.num_neurons != top.num_inputs:
        raise ValueError(
            f"input raster has {inputs.num_neurons} channels, network expects {top.num_inputs}")
    state = RunState(net, num_samples, seed, executor)
    out = np.zeros((num_samples, top.num_visible, inputs.horizon), dtype=bool)
    for t in range(1, inputs.horizon + 1):
        res = state.advance(params, inputs.column(t))
        out[:, :, t - 1] = res.spikes[:, top.num_hidden:]
    return [SpikeRaster(out[k]) for k in range(num_samples)]

