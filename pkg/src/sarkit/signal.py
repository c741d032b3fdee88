"""Sampled complex signals and physical constants shared by every stage."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

C0 = 299_792_458.0  # m/s, exact


@dataclass(frozen=True)
class ComplexSignal:
    """Uniformly sampled complex time series.

    Sample ``k`` sits at time ``t0 + k / fs``. ``fc`` records the carrier that
    has been applied to the samples (0 for baseband), so that delays and
    resampling can act on the envelope and the carrier consistently.
    """

    samples: np.ndarray
    fs: float
    t0: float = 0.0
    fc: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.complex128)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not self.fs > 0:
            raise ValueError("fs must be positive")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    def with_samples(self, samples, **changes) -> "ComplexSignal":
        return replace(self, samples=samples, **changes)

    def slice(self, start: int, length: int) -> "ComplexSignal":
        if start < 0 or length < 0 or start + length > self.samples.size:
            raise IndexError(
                f"window [{start}, {start + length}) outside signal of {self.samples.size} samples"
            )
        return replace(
            self, samples=self.samples[start : start + length].copy(), t0=self.t0 + start / self.fs
        )


def carrier(fc: float, times: np.ndarray) -> np.ndarray:
    """exp(+j 2 pi fc t), with the phase reduced modulo one cycle first."""
    cycles = np.mod(fc * times, 1.0)
    return np.exp(2j * np.pi * cycles)


def wrap_phase(phi):
    """Wrap to (-pi, pi]."""
    w = np.angle(np.exp(1j * np.asarray(phi, dtype=float)))
    return np.where(w == -np.pi, np.pi, w)
