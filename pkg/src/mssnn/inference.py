"""Decisions from several independent network runs.

Ties in every argmax go to the lowest class index.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom

from .network import ModelParams, Network, run_free
from .raster import SpikeRaster


@dataclass(frozen=True, eq=False)
class VoteTally:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1 or (counts < 0).any():
            raise ValueError("vote counts must be a non-empty vector of non-negative ints")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def num_classes(self) -> int:
        return self.counts.size

    def winner(self) -> int:
        return int(np.argmax(self.counts))


def rate_decode(visible: SpikeRaster) -> int:
    """Class of the visible neuron with the most spikes."""
    return int(np.argmax(visible.spikes.sum(axis=1)))


def majority(decisions: Sequence[int], num_classes: int) -> tuple[int, VoteTally]:
    decisions = np.asarray(decisions, dtype=np.int64)
    if decisions.size == 0:
        raise ValueError("need at least one decision")
    if decisions.min() < 0 or decisions.max() >= num_classes:
        raise ValueError(f"decisions must lie in [0, {num_classes})")
    tally = VoteTally(np.bincount(decisions, minlength=num_classes))
    return tally.winner(), tally


def class_probs(tally: VoteTally) -> np.ndarray:
    """Empirical class frequencies among the votes."""
    if tally.total < 1:
        raise ValueError("empty tally")
    return tally.counts / tally.total


def decision_entropy(probs) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(probs, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def hoeffding_bound(p_error: float, num_votes: int) -> float:
    """``exp(-2 K (1/2 - P_e)^2)``, bounding the binary majority error."""
    if not 0.0 <= p_error < 0.5:
        raise ValueError(f"p_error must lie in [0, 0.5), got {p_error}")
    return math.exp(-2.0 * num_votes * (0.5 - p_error) ** 2)


def exact_majority_error(p_error: float, num_votes: int) -> float:
    """Probability that at least ``ceil(K/2)`` of ``K`` binary votes are wrong."""
    if not 0.0 <= p_error <= 1.0:
        raise ValueError(f"p_error must lie in [0, 1], got {p_error}")
    if num_votes < 1:
        raise ValueError(f"num_votes must be >= 1, got {num_votes}")
    first = math.ceil(num_votes / 2)
    return float(binom.sf(first - 1, num_votes, p_error))


@dataclass(frozen=True)
class Classification:
    label: int
    tally: VoteTally
    probs: np.ndarray
    entropy: float


def classify(params: ModelParams, net: Network, inputs: SpikeRaster, num_votes: int,
             seed: int, executor: Optional[Executor] = None) -> Classification:
    """Majority vote over ``num_votes`` free runs with rate decoding."""
    outputs = run_free(params, net, inputs, num_votes, seed, executor)
    label, tally = majority([rate_decode(o) for o in outputs], net.topology.num_visible)
    probs = class_probs(tally)
    return Classification(label, tally, probs, decision_entropy(probs))
