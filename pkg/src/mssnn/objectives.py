"""Losses, discounted sums and sample weights shared by the learning rules."""

from __future__ import annotations

from concurrent.futures import Executor
from typing import Optional

import numpy as np
from scipy.special import logsumexp, softmax

from .network import ModelParams, Network, run_clamped
from .raster import LabeledExample

PROB_CLIP = 1e-7


def cross_entropy(s, p):
    """Binary cross-entropy ``-s log p - (1 - s) log(1 - p)``.

    ``p`` is clipped to ``[1e-7, 1 - 1e-7]`` first, so the loss is finite
    even when the sigmoid saturates.
    """
    s = np.asarray(s, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), PROB_CLIP, 1.0 - PROB_CLIP)
    return -(s * np.log(p) + (1.0 - s) * np.log1p(-p))


class DiscountedAccumulator:
    """Running value of ``acc_t = decay * acc_{t-1} + f_t`` with ``acc_0 = 0``.

    Works elementwise on arrays as well as on scalars.
    """

    def __init__(self, decay: float, value=0.0):
        if not 0.0 <= decay <= 1.0:
            raise ValueError(f"decay must lie in [0, 1], got {decay}")
        self.decay = decay
        self.value = value

    def feed(self, f):
        self.value = self.decay * self.value + f
        return self.value

    def reset(self) -> None:
        self.value = 0.0 * self.value


def accumulate(acc: DiscountedAccumulator, f) -> DiscountedAccumulator:
    acc.feed(f)
    return acc


def update_log_weights(v, visible_ce, gamma: float) -> np.ndarray:
    """Discounted per-sample log-likelihood of the visible targets.

    ``visible_ce[k]`` is the summed visible cross-entropy of sample ``k`` at
    the current step; the result is ``gamma * v - visible_ce``.
    """
    return gamma * np.asarray(v, dtype=float) - np.asarray(visible_ce, dtype=float)


def softmax_weights(v) -> np.ndarray:
    """Normalised importance weights ``exp(v_k) / sum_k' exp(v_k')``."""
    return softmax(np.asarray(v, dtype=float))


def log_marginal_estimate(v) -> float:
    """``log((1/K) sum_k exp(v_k))``, the log of the importance-weighted marginal."""
    v = np.asarray(v, dtype=float)
    return float(logsumexp(v) - np.log(v.size))


def estimate_log_loss(params: ModelParams, net: Network, example: LabeledExample,
                      num_realizations: int = 20, seed: int = 0,
                      executor: Optional[Executor] = None) -> float:
    """Monte Carlo log-loss of the visible targets.

    Averages the total clamped visible cross-entropy over ``num_realizations``
    independent hidden trajectories.  By Jensen's inequality its expectation
    upper-bounds the marginal log-loss; with no hidden neurons it is exact.
    """
    if num_realizations < 1:
        raise ValueError(f"need at least one realization, got {num_realizations}")
    hidden = net.topology.num_hidden
    total = np.zeros(num_realizations)
    for t, res in enumerate(run_clamped(params, net, example, num_realizations, seed,
                                        executor), start=1):
        x_t = example.target.column(t)
        total += cross_entropy(x_t, res.probability[:, hidden:]).sum(axis=1)
    return float(total.mean())
