"""Spike rasters, the SRAS text format, and task encodings.

A raster is a boolean matrix of shape ``(num_neurons, horizon)``.  Column
``t - 1`` holds the spikes emitted at discrete time ``t``, so that time is
1-indexed everywhere it is exposed (file format, event lists) while neuron
indices are 0-based.

SRAS v1 is line oriented ASCII::

    sras 1 <T> <N>
    <t> <neuron>
    ...

Events are unique, ``1 <= t <= T`` and ``0 <= neuron < N``.  The writer emits
events sorted by ``(t, neuron)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

SRAS_MAGIC = "sras"
SRAS_VERSION = 1


class RasterFormatError(ValueError):
    """Malformed SRAS input.  ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class SpikeRaster:
    """Immutable binary spike matrix indexed ``(neuron, time - 1)``."""

    spikes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.spikes)
        if arr.ndim != 2:
            raise ValueError(f"spike matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("raster needs at least one neuron and one time step")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("spikes must be binary")
            arr = arr.astype(bool)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "spikes", arr)

    @property
    def num_neurons(self) -> int:
        return self.spikes.shape[0]

    @property
    def horizon(self) -> int:
        return self.spikes.shape[1]

    @classmethod
    def zeros(cls, num_neurons: int, horizon: int) -> "SpikeRaster":
        return cls(np.zeros((num_neurons, horizon), dtype=bool))

    @classmethod
    def from_events(cls, events: Iterable[tuple[int, int]], num_neurons: int,
                    horizon: int) -> "SpikeRaster":
        """Build from ``(t, neuron)`` pairs with 1-based ``t``."""
        arr = np.zeros((num_neurons, horizon), dtype=bool)
        for t, n in events:
            if not (1 <= t <= horizon and 0 <= n < num_neurons):
                raise ValueError(f"event out of range: t={t}, neuron={n}")
            arr[n, t - 1] = True
        return cls(arr)

    def events(self) -> list[tuple[int, int]]:
        """Events as ``(t, neuron)`` pairs in lexicographic order."""
        cols, neurons = np.nonzero(self.spikes.T)
        return [(int(c) + 1, int(n)) for c, n in zip(cols, neurons)]

    def column(self, t: int) -> np.ndarray:
        """Spike vector at 1-based time ``t``."""
        return self.spikes[:, t - 1]

    def __eq__(self, other):
        if not isinstance(other, SpikeRaster):
            return NotImplemented
        return self.spikes.shape == other.spikes.shape and bool(
            np.array_equal(self.spikes, other.spikes))

    def __hash__(self):
        return hash((self.spikes.shape, self.spikes.tobytes()))

    def __repr__(self):
        return (f"SpikeRaster(num_neurons={self.num_neurons}, "
                f"horizon={self.horizon}, events={int(self.spikes.sum())})")


@dataclass(frozen=True)
class LabeledExample:
    """Exogenous input channels paired with visible-neuron targets."""

    input: SpikeRaster
    target: SpikeRaster
    label: Optional[int] = None

    def __post_init__(self):
        if self.input.horizon != self.target.horizon:
            raise ValueError(
                f"input horizon {self.input.horizon} != target horizon "
                f"{self.target.horizon}")

    @property
    def horizon(self) -> int:
        return self.input.horizon


def _parse_int(token: str, what: str, lineno: int) -> int:
    try:
        return int(token, 10)
    except ValueError:
        raise RasterFormatError(f"malformed {what}: {token!r}", lineno) from None


def parse_raster(text: Union[bytes, str]) -> SpikeRaster:
    """Parse an SRAS v1 document.

    Raises
    ------
    RasterFormatError
        On a malformed header, an event out of range, or a duplicate event.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise RasterFormatError(f"non-ASCII content ({exc.reason})", 1) from None
    lines = text.split("\n")
    header = lines[0].split()
    if len(header) != 4 or header[0] != SRAS_MAGIC:
        raise RasterFormatError("malformed header, expected 'sras 1 <T> <N>'", 1)
    version = _parse_int(header[1], "header version", 1)
    if version != SRAS_VERSION:
        raise RasterFormatError(f"malformed header, unsupported version {version}", 1)
    horizon = _parse_int(header[2], "header horizon", 1)
    num_neurons = _parse_int(header[3], "header neuron count", 1)
    if horizon < 1 or num_neurons < 1:
        raise RasterFormatError("malformed header, T and N must be positive", 1)

    arr = np.zeros((num_neurons, horizon), dtype=bool)
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 2:
            raise RasterFormatError(f"malformed event line {line!r}", lineno)
        t = _parse_int(fields[0], "event time", lineno)
        n = _parse_int(fields[1], "event neuron", lineno)
        if not (1 <= t <= horizon and 0 <= n < num_neurons):
            raise RasterFormatError(
                f"event out of range: t={t}, neuron={n} (T={horizon}, N={num_neurons})",
                lineno)
        if arr[n, t - 1]:
            raise RasterFormatError(f"duplicate event: t={t}, neuron={n}", lineno)
        arr[n, t - 1] = True
    return SpikeRaster(arr)


def write_raster(raster: SpikeRaster) -> bytes:
    lines = [f"{SRAS_MAGIC} {SRAS_VERSION} {raster.horizon} {raster.num_neurons}"]
    lines.extend(f"{t} {n}" for t, n in raster.events())
    return ("\n".join(lines) + "\n").encode("ascii")


def load_raster(path: Union[str, Path]) -> SpikeRaster:
    return parse_raster(Path(path).read_bytes())


def save_raster(raster: SpikeRaster, path: Union[str, Path]) -> None:
    Path(path).write_bytes(write_raster(raster))


def split_memorization(raster: SpikeRaster, boundary: int) -> LabeledExample:
    """Rows ``[0, boundary)`` become inputs, the remaining rows targets."""
    if not 0 < boundary < raster.num_neurons:
        raise ValueError(
            f"boundary must lie in (0, {raster.num_neurons}), got {boundary}")
    return LabeledExample(
        input=SpikeRaster(raster.spikes[:boundary]),
        target=SpikeRaster(raster.spikes[boundary:]),
    )


def encode_labels(label: int, num_classes: int, horizon: int) -> SpikeRaster:
    """One visible row per class; the row of ``label`` spikes at every step."""
    if not 0 <= label < num_classes:
        raise ValueError(f"label {label} out of range for {num_classes} classes")
    arr = np.zeros((num_classes, horizon), dtype=bool)
    arr[label] = True
    return SpikeRaster(arr)


def synth_pattern(seed: int, num_neurons: int, horizon: int, rate: float) -> SpikeRaster:
    """I.i.d. Bernoulli(``rate``) raster.

    Uses numpy's PCG64 generator, whose stream is specified bit-for-bit and
    therefore reproducible across platforms for a given seed.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    return SpikeRaster(rng.random((num_neurons, horizon)) < rate)


def synth_classification(seed: int, num_classes: int, num_examples: int,
                         num_inputs: int, horizon: int, rate: float = 0.3,
                         flip: float = 0.1) -> list[LabeledExample]:
    """Noisy copies of one random prototype raster per class.

    Each example picks its class uniformly, starts from that class prototype
    and flips every cell independently with probability ``flip``.  Targets
    follow :func:`encode_labels`.
    """
    if not 0.0 <= flip <= 1.0:
        raise ValueError(f"flip must lie in [0, 1], got {flip}")
    rng = np.random.default_rng(seed)
    prototypes = rng.random((num_classes, num_inputs, horizon)) < rate
    examples = []
    for _ in range(num_examples):
        label = int(rng.integers(num_classes))
        noise = rng.random((num_inputs, horizon)) < flip
        examples.append(LabeledExample(
            input=SpikeRaster(prototypes[label] ^ noise),
            target=encode_labels(label, num_classes, horizon),
            label=label,
        ))
    return examples


def load_manifest(path: Union[str, Path],
                  num_classes: Optional[int] = None) -> list[LabeledExample]:
    """Read a labelled dataset manifest.

    Each non-empty, non-``#`` line is ``<label> <input.sras>`` with paths
    relative to the manifest.  Unless given, the number of classes is one
    more than the largest label seen; targets are label encoded.
    """
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(maxsplit=1)
        if len(fields) != 2:
            raise RasterFormatError(f"manifest line must be '<label> <path>': {line!r}",
                                    lineno)
        label = _parse_int(fields[0], "label", lineno)
        if label < 0:
            raise RasterFormatError(f"negative label {label}", lineno)
        rows.append((label, load_raster(path.parent / fields[1])))
    if not rows:
        raise RasterFormatError("manifest lists no examples", 1)
    if num_classes is None:
        num_classes = max(label for label, _ in rows) + 1
    return [LabeledExample(r, encode_labels(label, num_classes, r.horizon), label)
            for label, r in rows]
