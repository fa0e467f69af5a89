"""Raised-cosine kernel banks and causal filtered traces.

A kernel is a vector ``a`` indexed by delay ``delta = 1..D`` (stored at
position ``delta - 1``).  The trace used for the membrane potential at time
``t`` is strictly causal::

    trace(t) = sum_{delta=1..D} a[delta] * s[t - delta]

with spikes at non-positive times taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FilterBank:
    """``M`` kernels over a window of ``D`` delays, shape ``(M, D)``."""

    kernels: np.ndarray

    def __post_init__(self):
        k = np.array(self.kernels, dtype=float, ndmin=2)
        if k.ndim != 2 or k.shape[1] < 1:
            raise ValueError(f"kernels must have shape (M, D), got {k.shape}")
        if np.any(k < 0.0) or np.any(k > 1.0):
            raise ValueError("kernel values must lie in [0, 1]")
        if not np.all(k.max(axis=1) > 0.0):
            raise ValueError("every kernel needs a strictly positive entry")
        k.setflags(write=False)
        object.__setattr__(self, "kernels", k)

    @property
    def num_basis(self) -> int:
        return self.kernels.shape[0]

    @property
    def duration(self) -> int:
        return self.kernels.shape[1]


def raised_cosine_bank(num_basis: int, duration: int) -> FilterBank:
    """Bank of ``num_basis`` raised-cosine bumps over delays ``1..duration``.

    Kernel ``m`` is ``0.5 * (1 + cos(pi * (delta - c_m) / w))`` where
    ``|delta - c_m| <= w`` and zero elsewhere.  Centers ``c_m`` are evenly
    spaced over ``[1, duration]`` (a single kernel sits at delay 1) and the
    half-width is ``w = (duration - 1) / max(num_basis, 2)``.
    """
    if num_basis < 1:
        raise ValueError(f"num_basis must be >= 1, got {num_basis}")
    if duration < 2:
        raise ValueError(f"duration must be >= 2, got {duration}")
    if num_basis > duration:
        # narrower bumps can fall between integer delays and vanish entirely
        raise ValueError(f"num_basis {num_basis} exceeds duration {duration}")
    delays = np.arange(1, duration + 1, dtype=float)
    centers = np.linspace(1.0, float(duration), num_basis)
    width = (duration - 1) / max(num_basis, 2)
    offset = delays[None, :] - centers[:, None]
    kernels = np.where(np.abs(offset) <= width,
                       0.5 * (1.0 + np.cos(np.pi * offset / width)), 0.0)
    return FilterBank(kernels)


class TraceState:
    """Delay line of the last ``D`` spikes for a block of channels.

    ``history[..., c, 0]`` is the most recent spike of channel ``c``.  The
    leading axes are free, so one object can carry ``(K, channels)`` spike
    histories for ``K`` parallel samples.  ``values`` holds the trace for
    the *next* time step, shape ``(..., channels, M)``.
    """

    def __init__(self, bank: FilterBank, shape: tuple[int, ...]):
        self.bank = bank
        self.shape = tuple(shape)
        self.history = np.zeros(self.shape + (bank.duration,))
        self.values = np.zeros(self.shape + (bank.num_basis,))

    def reset(self) -> None:
        self.history.fill(0.0)
        self.values.fill(0.0)

    def step(self, new_spikes) -> np.ndarray:
        """Push spikes at time ``t``; return the traces for time ``t + 1``."""
        s = np.asarray(new_spikes, dtype=float)
        if s.shape != self.shape:
            raise ValueError(f"expected spike block of shape {self.shape}, got {s.shape}")
        self.history[..., 1:] = self.history[..., :-1]
        self.history[..., 0] = s
        # Accumulate in delay order rather than via BLAS so the result does
        # not depend on batch shape and matches a direct summation bit for bit.
        kernels = self.bank.kernels
        values = self.history[..., 0, None] * kernels[:, 0]
        for d in range(1, self.bank.duration):
            values = values + self.history[..., d, None] * kernels[:, d]
        self.values = values
        return self.values


def trace_step(state: TraceState, new_spikes) -> TraceState:
    """Advance ``state`` by one time step in place and return it."""
    state.step(new_spikes)
    return state

