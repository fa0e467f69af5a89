"""Multi-sample online learning rules for the GLM network.

All rules share the same per-sample eligibility traces, the gamma-discounted
running sums of the negative cross-entropy gradient of each neuron::

    e_bias  <- gamma * e_bias  + (s - sigma(u))
    e_syn   <- gamma * e_syn   + (s - sigma(u)) * syn_trace
    e_soma  <- gamma * e_soma  + (s - sigma(u)) * soma_trace

where ``s`` is the clamped target for visible neurons and the sampled spike
for hidden neurons.  A central processor (CP) collects the per-sample
visible cross-entropies, keeps the discounted log-weights
``v_k <- gamma * v_k - CE_k`` and broadcasts learning signals:

``gem``     softmax(v) to every neuron; ``delta = sum_k softmax(v)_k e_k``.
``mb``      visible ``mean_k e_k``; hidden ``mean_k (v_k - b_k) e_k``.
``iw``      visible ``sum_k softmax(v)_k e_k``; hidden
            ``(log R - b) sum_k e_k`` with ``log R = logsumexp(v) - log K``.
``single``  ``mb`` with one sample.

Parameters move as ``theta <- theta + eta * delta``, which descends the
log-loss bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import ModelParams, Network, RunState, StepResult, zero_params
from .objectives import (cross_entropy, log_marginal_estimate, softmax_weights,
                         update_log_weights)
from .raster import LabeledExample

RULES = ("gem", "mb", "iw", "single")


@dataclass(frozen=True)
class LearnerConfig:
    rule: str = "gem"
    num_samples: int = 1
    learning_rate: float = 5e-4
    gamma: float = 0.9
    kappa_b: float = 0.9
    lr_decay: float = 1.2
    # Presentations between learning-rate decays; None keeps the rate constant.
    lr_period: Optional[int] = 40
    baseline: bool = True

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}, expected one of {RULES}")
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.rule == "single" and self.num_samples != 1:
            raise ValueError("the single-sample rule needs num_samples == 1")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("gamma", "kappa_b"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.lr_decay <= 0:
            raise ValueError(f"lr_decay must be > 0, got {self.lr_decay}")
        if self.lr_period is not None and self.lr_period < 1:
            raise ValueError(f"lr_period must be >= 1 or None, got {self.lr_period}")


def comm_load(rule: str, num_samples: int, size_x: int, size_h: int) -> tuple[int, int]:
    """Reals sent per time step as ``(neurons -> CP unicast, CP -> neurons broadcast)``."""
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    k = num_samples
    unicast = k * size_x
    if rule == "gem":
        return unicast, k * (size_x + size_h)
    if rule in ("mb", "single"):
        return unicast, k * size_h
    if rule == "iw":
        return unicast, k * size_x + size_h
    raise ValueError(f"unknown rule {rule!r}")


def apply_lr_schedule(eta0: float, presentations: int, config: LearnerConfig) -> float:
    """Learning rate after ``presentations`` full presentations of the data."""
    if config.lr_period is None:
        return eta0
    return eta0 / config.lr_decay ** (presentations // config.lr_period)


@dataclass
class CommLoadCounters:
    unicast_step: int = 0
    broadcast_step: int = 0
    unicast_total: int = 0
    broadcast_total: int = 0

    def record(self, unicast: int, broadcast: int) -> None:
        self.unicast_step = unicast
        self.broadcast_step = broadcast
        self.unicast_total += unicast
        self.broadcast_total += broadcast


class EligibilityTraces:
    """Per-sample discounted gradient terms, laid out like :class:`ModelParams`
    with a leading sample axis."""

    def __init__(self, net: Network, num_samples: int, gamma: float):
        shape = zero_params(net)
        self.gamma = gamma
        self.mask = net.topology.connectivity.astype(float)
        self.bias = np.zeros((num_samples,) + shape.bias.shape)
        self.synaptic = np.zeros((num_samples,) + shape.synaptic.shape)
        self.somatic = np.zeros((num_samples,) + shape.somatic.shape)

    def reset(self) -> None:
        for a in (self.bias, self.synaptic, self.somatic):
            a.fill(0.0)

    def update(self, result: StepResult) -> None:
        err = result.spikes.astype(float) - result.probability
        g = self.gamma
        self.bias = g * self.bias + err
        self.synaptic = g * self.synaptic + (
            err[:, :, None, None] * result.syn_traces[:, None, :, :] * self.mask[None, :, :, None])
        self.somatic = g * self.somatic + err[:, :, None] * result.soma_traces

    def components(self):
        return self.synaptic, self.somatic, self.bias


class BaselineState:
    """Discounted numerator and denominator of ``<signal e^2> / <e^2>``."""

    def __init__(self, shape: tuple[int, ...], kappa_b: float):
        self.kappa_b = kappa_b
        self.num = np.zeros(shape)
        self.den = np.zeros(shape)

    def update(self, signal, e) -> np.ndarray:
        e2 = np.square(e)
        self.num = self.kappa_b * self.num + signal * e2
        self.den = self.kappa_b * self.den + e2
        return self.value()

    def value(self) -> np.ndarray:
        out = np.zeros_like(self.num)
        np.divide(self.num, self.den, out=out, where=self.den != 0)
        return out


def baseline_update(state: BaselineState, signal, e, kappa_b: Optional[float] = None):
    """Advance the baseline accumulators; returns ``(state, baseline)``."""
    if kappa_b is not None:
        state.kappa_b = kappa_b
    return state, state.update(signal, e)


@dataclass
class StepUpdate:
    """Outcome of one learning step before scaling by the learning rate."""

    delta: ModelParams
    log_weights: np.ndarray
    importance: Optional[np.ndarray]
    visible_ce: np.ndarray
    unicast: int
    broadcast: int


class Learner:
    """Online multi-sample learner for one network.

    Call :meth:`step` once per time step, right after the K-sample clamped
    forward pass, and add ``eta * delta`` to the parameters.
    """

    def __init__(self, net: Network, config: LearnerConfig):
        self.net = net
        self.config = config
        top = net.topology
        k = config.num_samples
        self.elig = EligibilityTraces(net, k, config.gamma)
        self.log_weights = np.zeros(k)
        self.counters = CommLoadCounters()
        self.loads = comm_load(config.rule, k, top.num_visible, top.num_hidden)
        h = top.num_hidden
        # MB keeps one baseline per sample, IW one shared across samples.
        lead = (k,) if config.rule in ("mb", "single") else ()
        self.baselines = tuple(BaselineState(lead + (h,) + a.shape[2:], config.kappa_b)
                               for a in self.elig.components())

    def reset(self) -> None:
        """Start of a new presentation: clear eligibilities and log-weights."""
        self.elig.reset()
        self.log_weights = np.zeros(self.config.num_samples)

    def step(self, result: StepResult, targets_t) -> StepUpdate:
        cfg = self.config
        h = self.net.topology.num_hidden
        x_t = np.asarray(targets_t, dtype=float)
        visible_ce = cross_entropy(x_t, result.probability[:, h:]).sum(axis=1)
        self.log_weights = update_log_weights(self.log_weights, visible_ce, cfg.gamma)
        self.elig.update(result)
        v = self.log_weights

        importance = None
        deltas = []
        if cfg.rule == "gem":
            importance = softmax_weights(v)
            for e in self.elig.components():
                deltas.append(np.tensordot(importance, e, axes=1))
        elif cfg.rule in ("mb", "single"):
            for e, base in zip(self.elig.components(), self.baselines):
                d = e.mean(axis=0)
                eh = e[:, :h]
                signal = v.reshape((-1,) + (1,) * (eh.ndim - 1))
                b = base.update(signal, eh) if cfg.baseline else 0.0
                d[:h] = ((signal - b) * eh).mean(axis=0)
                deltas.append(d)
        else:
            importance = softmax_weights(v)
            log_r = log_marginal_estimate(v)
            for e, base in zip(self.elig.components(), self.baselines):
                d = np.tensordot(importance, e, axes=1)
                eh = e[:, :h].sum(axis=0)
                b = base.update(log_r, eh) if cfg.baseline else 0.0
                d[:h] = (log_r - b) * eh
                deltas.append(d)

        self.counters.record(*self.loads)
        return StepUpdate(ModelParams(*deltas), v.copy(), importance, visible_ce, *self.loads)


def apply_update(params: ModelParams, delta: ModelParams, eta: float) -> None:
    """``params += eta * delta`` in place, refusing non-finite results."""
    for p, d in zip(params.arrays(), delta.arrays()):
        p += eta * d
    params.check_finite()


@dataclass
class PresentationStats:
    steps: int
    hidden_spikes: int
    max_weight_sum_error: float


def train_presentation(learner: Learner, state: RunState, params: ModelParams,
                       example: LabeledExample, eta: float) -> PresentationStats:
    """Stream one example through the network, updating ``params`` every step."""
    h = learner.net.topology.num_hidden
    state.reset()
    learner.reset()
    hidden_spikes = 0
    worst = 0.0
    for t in range(1, example.horizon + 1):
        x_t = example.target.column(t)
        res = state.advance(params, example.input.column(t), x_t)
        upd = learner.step(res, x_t)
        apply_update(params, upd.delta, eta)
        hidden_spikes += int(res.spikes[:, :h].sum())
        if upd.importance is not None:
            worst = max(worst, abs(float(upd.importance.sum()) - 1.0))
    return PresentationStats(example.horizon, hidden_spikes, worst)
