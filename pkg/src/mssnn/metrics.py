"""Accuracy, confidence and calibration summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import softmax

from .inference import VoteTally, class_probs, decision_entropy


def confidence(tally: VoteTally) -> float:
    """Softmax over the raw vote counts, read at the winning class."""
    if tally.total < 1:
        raise ValueError("empty tally")
    return float(softmax(tally.counts.astype(float))[tally.winner()])


@dataclass(frozen=True)
class PredictionRecord:
    predicted: int
    target: int
    confidence: float
    entropy: float

    @property
    def correct(self) -> bool:
        return self.predicted == self.target

    @classmethod
    def from_tally(cls, tally: VoteTally, target: int) -> "PredictionRecord":
        return cls(tally.winner(), target, confidence(tally),
                   decision_entropy(class_probs(tally)))


def ece(records: Sequence[PredictionRecord], num_bins: int = 10) -> float:
    """Binned expected calibration error.

    Bin ``b`` (1-based) collects confidences in ``((b - 1)/B, b/B]``; the
    result is the record-weighted mean of ``|accuracy - mean confidence|``.
    """
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    if not records:
        raise ValueError("ece needs at least one record")
    conf = np.array([r.confidence for r in records], dtype=float)
    hit = np.array([r.correct for r in records], dtype=float)
    # searchsorted against b/B, since ceil(conf * B) misplaces e.g. 0.3 * 10
    edges = np.arange(1, num_bins + 1) / num_bins
    bins = np.minimum(np.searchsorted(edges, conf, side="left"), num_bins - 1)
    # (n_b / n) |acc_b - conf_b| == |hits_b - sum conf_b| / n; fsum keeps it exact
    # for fixtures such as ten records at 0.8.
    gaps = [abs(math.fsum(hit[bins == b]) - math.fsum(conf[bins == b]))
            for b in np.unique(bins)]
    return math.fsum(gaps) / conf.size


def accuracy(records: Sequence[PredictionRecord]) -> float:
    if not records:
        raise ValueError("accuracy needs at least one record")
    return sum(r.correct for r in records) / len(records)


def hidden_spike_rate(hidden_spikes: int, steps: int) -> float:
    """Hidden spikes summed over all samples, per processed time step."""
    return hidden_spikes / steps if steps else 0.0


def grouped_entropy(records: Sequence[PredictionRecord]
                    ) -> tuple[Optional[float], Optional[float]]:
    """Mean entropy over correct and over incorrect decisions.

    A group without records is reported as ``None``.
    """
    if not records:
        raise ValueError("grouped_entropy needs at least one record")
    right = [r.entropy for r in records if r.correct]
    wrong = [r.entropy for r in records if not r.correct]
    return (math.fsum(right) / len(right) if right else None,
            math.fsum(wrong) / len(wrong) if wrong else None)


def confusion_matrix(records: Sequence[PredictionRecord], num_classes: int) -> np.ndarray:
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    for r in records:
        out[r.target, r.predicted] += 1
    return out
