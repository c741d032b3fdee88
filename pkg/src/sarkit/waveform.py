"""OFDM transmit waveform, signal frame layout and system budgets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .signal import C0, ComplexSignal, carrier

_GRID_TOL = 1e-6


def _as_count(value: float, what: str) -> int:
    n = int(round(value))
    if abs(value - n) > _GRID_TOL * max(1.0, abs(value)):
        raise ValueError(f"{what} = {value!r} is not an integer number of samples")
    return n


@dataclass(frozen=True)
class OfdmParams:
    """Waveform configuration; every other module derives its timing from here.

    Besides the physical invariants, the sample grid must hold an integer
    number of samples per subcarrier period (``fs / delta_f``) so that one
    period of the symbol maps onto an exact DFT.
    """

    fc: float = 1.2e9
    N: int = 4096
    delta_f: float = 100e3
    T: float = 12.5e-6
    T_cp: float = 3.125e-6
    fs: float = 1.024e9
    nu: int = 14
    f_prf: float = 100.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.delta_f > 0:
            raise ValueError("delta_f must be positive")
        if not self.fs > 0 or not self.T > 0:
            raise ValueError("fs and T must be positive")
        if self.B > self.fs * (1 + 1e-12):
            raise ValueError(f"bandwidth B = N*delta_f = {self.B:g} Hz exceeds fs = {self.fs:g}")
        if self.T_cp < 0:
            raise ValueError("T_cp must be non-negative")
        if not self.f_prf > 0 or self.f_prf * (self.T + self.T_cp) > 1 + 1e-12:
            raise ValueError("f_prf * (T + T_cp) must not exceed 1")
        _as_count(self.fs / self.delta_f, "fs/delta_f")
        _as_count(self.T * self.fs, "T*fs")
        _as_count(self.T_cp * self.fs, "T_cp*fs")
        if self.n_body < self.K:
            raise ValueError("symbol duration T shorter than one subcarrier period 1/delta_f")

    @property
    def B(self) -> float:
        return self.N * self.delta_f

    @property
    def K(self) -> int:
        """Samples per subcarrier period 1/delta_f (the demodulation window)."""
        return int(round(self.fs / self.delta_f))

    @property
    def n_body(self) -> int:
        return int(round(self.T * self.fs))

    @property
    def n_cp(self) -> int:
        return int(round(self.T_cp * self.fs))

    @property
    def n_symbol(self) -> int:
        return self.n_body + self.n_cp

    @property
    def T_pri(self) -> float:
        return 1.0 / self.f_prf

    @property
    def wavelength(self) -> float:
        return C0 / self.fc

    @property
    def subcarrier_freqs(self) -> np.ndarray:
        return np.arange(self.N) * self.delta_f


@dataclass(frozen=True)
class CodeSymbols:
    d: np.ndarray
    seed: int

    def __len__(self):
        return self.d.size


@dataclass(frozen=True)
class SignalFrame:
    """One PRI worth of transmit samples: trigger, radar, payload, then silence."""

    trigger: ComplexSignal
    radar: ComplexSignal
    payload: ComplexSignal
    T_pri: float
    boundaries: dict = field(default_factory=dict)

    @property
    def fs(self) -> float:
        return self.radar.fs

    @property
    def n_pri(self) -> int:
        return int(round(self.T_pri * self.fs))

    @property
    def n_active(self) -> int:
        return len(self.trigger) + len(self.radar) + len(self.payload)

    @property
    def active_fraction(self) -> float:
        return self.n_active / self.n_pri

    def samples(self) -> np.ndarray:
        out = np.zeros(self.n_pri, dtype=np.complex128)
        for name in ("trigger", "radar", "payload"):
            a, b = self.boundaries[name]
            out[a:b] = getattr(self, name).samples
        return out

    def stream(self, repeats: int) -> ComplexSignal:
        return ComplexSignal(np.tile(self.samples(), repeats), self.fs)


def generate_code(params: OfdmParams, seed: int) -> CodeSymbols:
    """Seeded QPSK code symbols from the alphabet (+-1 +-j)/sqrt(2)."""
    rng = np.random.default_rng(seed)
    quadrant = rng.integers(0, 4, size=params.N)
    d = np.exp(1j * (np.pi / 4 + np.pi / 2 * quadrant))
    return CodeSymbols(d=d, seed=int(seed))


def symbol_period(params: OfdmParams, coeffs: np.ndarray) -> np.ndarray:
    """One period (K samples) of sum_n c_n exp(j 2 pi n delta_f k / fs)."""
    spectrum = np.zeros(params.K, dtype=np.complex128)
    spectrum[: params.N] = coeffs
    return params.K * np.fft.ifft(spectrum)


def generate_symbol(params: OfdmParams, code: CodeSymbols) -> ComplexSignal:
    """Baseband OFDM symbol with cyclic prefix, sampled at ``fs``.

    The result covers ``t in [-T_cp, T)``. Each sample is the multicarrier sum
    evaluated at its instant, so the prefix is the cyclic continuation of the
    body and the body starts at t = 0.
    """
    if params.B > params.fs:
        raise ValueError("B > fs: synthesis would alias")
    if len(code) != params.N:
        raise ValueError(f"code length {len(code)} != N = {params.N}")
    period = symbol_period(params, code.d)
    k = np.arange(-params.n_cp, params.n_body)
    return ComplexSignal(period[k % params.K], params.fs, t0=-params.n_cp / params.fs)


def upconvert(x: ComplexSignal, fc: float) -> ComplexSignal:
    """Multiply by exp(+j 2 pi fc t) on the signal's own time axis."""
    if not np.isfinite(fc):
        raise ValueError("carrier must be finite")
    if fc == 0:
        return x
    return x.with_samples(x.samples * carrier(fc, x.times), fc=x.fc + fc)


def _segment(x, fs: float) -> ComplexSignal:
    if x is None:
        return ComplexSignal(np.zeros(0), fs)
    if isinstance(x, (bytes, bytearray)):
        # opaque payload rides as BPSK, one sample per bit
        bits = np.unpackbits(np.frombuffer(bytes(x), dtype=np.uint8))
        return ComplexSignal(1.0 - 2.0 * bits, fs)
    if not isinstance(x, ComplexSignal):
        raise TypeError(f"unsupported frame segment {type(x).__name__}")
    if x.fs != fs:
        raise ValueError("all frame segments must share one sample rate")
    return x


class FrameOverflow(ValueError):
    pass


def assemble_frame(trigger, radar: ComplexSignal, payload, T_pri: float) -> SignalFrame:
    """Lay out trigger, radar and payload back to back inside one PRI."""
    fs = radar.fs
    segs = {"trigger": _segment(trigger, fs), "radar": radar, "payload": _segment(payload, fs)}
    n_pri = int(round(T_pri * fs))
    bounds, pos = {}, 0
    for name, seg in segs.items():
        bounds[name] = (pos, pos + len(seg))
        pos += len(seg)
    if pos > n_pri:
        raise FrameOverflow(
            f"frame segments need {pos / fs:.6g} s but the PRI is only {T_pri:.6g} s"
        )
    return SignalFrame(T_pri=T_pri, boundaries=bounds, **segs)


def duty_cycle(T_active: float, T_pri: float) -> float:
    if not T_pri > 0 or not 0 <= T_active <= T_pri:
        raise ValueError("duty cycle needs 0 <= T_active <= T_pri")
    return T_active / T_pri


def mean_data_rate(fs: float, nu: float, gamma: float, streams: int = 2) -> float:
    """Average recorded bit rate; ``streams`` counts the stored IQ channels."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    return fs * nu * gamma * streams


def effective_bandwidth_chirp(T: float, dt_max: float, B: float) -> float:
    if not 0 <= dt_max <= T:
        raise ValueError("need 0 <= dt_max <= T")
    return (T - dt_max) / T * B


class TimingBudget(NamedTuple):
    dt_sync: float
    dt_pri: float
    dt_loc: float


def timing_budget(dR_max: float, T_pri: float, v_max: float) -> TimingBudget:
    """Allowed timing offsets: conventional sync, PRI alignment, and localization."""
    if min(dR_max, T_pri, v_max) <= 0:
        raise ValueError("budget inputs must be positive")
    return TimingBudget(2 * dR_max / C0, T_pri, 2 * dR_max / v_max)
