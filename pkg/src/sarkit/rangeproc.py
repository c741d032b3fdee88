"""Per-measurement receiver chain: downconversion through range compression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .signal import C0, ComplexSignal, carrier
from .waveform import CodeSymbols, OfdmParams

KINDS = ("raw", "mono-calibrated", "bistatic-corrected", "sidelink")
DOMAINS = ("monostatic", "bistatic")


@dataclass(frozen=True)
class SubcarrierData:
    D: np.ndarray
    kind: str = "raw"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown subcarrier data kind {self.kind!r}")
        D = np.asarray(self.D, dtype=np.complex128)
        if D.ndim != 1 or not np.all(np.isfinite(D)):
            raise ValueError("subcarrier data must be a finite vector")
        object.__setattr__(self, "D", D)

    def __len__(self):
        return self.D.size


@dataclass(frozen=True)
class RangeProfile:
    """Complex range-compressed vector of one measurement.

    Cell ``rho`` corresponds to a delay of ``rho / (B * oversample)``; for the
    monostatic domain that is a one-way range of ``rho * cell_size``, for the
    bistatic domain the path length beyond the sidelink.
    """

    r: np.ndarray
    cell_size: float
    domain: str
    m: int
    oversample: int
    bandwidth: float
    gain: float

    @property
    def delay_per_cell(self) -> float:
        return 1.0 / (self.bandwidth * self.oversample)

    def value_at(self, cell: float) -> complex:
        """Band-limited (exact) interpolation of the profile at a fractional cell."""
        return complex(_interpolant(self.r)(cell))


def _interpolant(r: np.ndarray):
    """Trigonometric interpolant of ``r`` over its cell index, without wrapping the band."""
    L = r.size
    spec = np.fft.fft(r) / L
    k = np.arange(L)
    return lambda cell: np.sum(spec * np.exp(2j * np.pi * k * cell / L))


class Peak(NamedTuple):
    index: int
    value: complex
    refined: float


class SidelinkDropout(ValueError):
    pass


def downconvert(y: ComplexSignal, fc: float | None = None) -> ComplexSignal:
    """Remove the carrier: multiply by exp(-j 2 pi fc t)."""
    fc = y.fc if fc is None else fc
    if fc == 0:
        return y
    return y.with_samples(y.samples * np.conj(carrier(fc, y.times)), fc=y.fc - fc)


def strip_cp(y: ComplexSignal, params: OfdmParams) -> ComplexSignal:
    """Symbol body of a captured radar segment that starts with the cyclic prefix."""
    if len(y) < params.n_symbol:
        raise ValueError(f"capture holds {len(y)} samples, need {params.n_symbol}")
    return y.slice(params.n_cp, params.n_body)


def demodulate(y_b: ComplexSignal, params: OfdmParams) -> SubcarrierData:
    """Per-subcarrier amplitudes of the symbol body.

    The first fs/delta_f samples of the body are one subcarrier period; their
    DFT, normalised by the window length, yields the code symbols for an
    undistorted input. This is the fs-grid equivalent of resampling the body
    to N samples and applying an N-point DFT.
    """
    if len(y_b) != params.n_body:
        raise ValueError(f"body length {len(y_b)} != round(T*fs) = {params.n_body}")
    K = params.K
    D = np.fft.fft(y_b.samples[:K])[: params.N] / K
    return SubcarrierData(D, "raw")


def spectral_divide(D_rx: SubcarrierData, code: CodeSymbols) -> SubcarrierData:
    if len(D_rx) != len(code):
        raise ValueError("subcarrier data and code differ in length")
    return SubcarrierData(D_rx.D * np.conj(code.d), D_rx.kind)


def calibrate_mono(D: SubcarrierData, R_cal_hat: float, params: OfdmParams) -> SubcarrierData:
    """Remove the internal delay R_cal_hat / c0 from monostatic data."""
    if R_cal_hat < 0:
        raise ValueError("R_cal_hat must be non-negative")
    f = params.subcarrier_freqs + params.fc
    return SubcarrierData(D.D * np.exp(2j * np.pi * f * (R_cal_hat / C0)), "mono-calibrated")


def correct_bistatic(D_rad: SubcarrierData, D_sl: SubcarrierData, eps: float = 1e-9) -> SubcarrierData:
    """Divide radar by sidelink data; every error common to both channels cancels."""
    if len(D_rad) != len(D_sl):
        raise ValueError("radar and sidelink data differ in length")
    mag = np.abs(D_sl.D)
    floor = eps * np.median(mag)
    if floor == 0 or np.any(mag <= floor):
        raise SidelinkDropout(f"{int(np.sum(mag <= floor))} sidelink subcarriers below {eps:g} x median")
    return SubcarrierData(D_rad.D / D_sl.D, "bistatic-corrected")


def window_weights(name: str, N: int) -> np.ndarray:
    if name in (None, "none", "rect"):
        return np.ones(N)
    if name == "hann":
        # symmetric Hann over the occupied subcarriers
        return np.hanning(N) if N > 1 else np.ones(1)
    raise ValueError(f"unknown window {name!r}")


def range_compress(D: SubcarrierData, params: OfdmParams, window: str = "none",
                   oversample: int = 8, m: int = 0) -> RangeProfile:
    """Zero-padded, unnormalised IDFT of the window-weighted subcarrier data."""
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    N = len(D)
    w = window_weights(window, N)
    L = N * oversample
    r = L * np.fft.ifft(D.D * w, L)
    domain = "bistatic" if D.kind in ("bistatic-corrected", "sidelink") else "monostatic"
    scale = 2.0 if domain == "monostatic" else 1.0
    B = N * params.delta_f
    return RangeProfile(r, C0 / (scale * B * oversample), domain, int(m), int(oversample), B, float(w.sum()))


def peak_cell(profile: RangeProfile) -> Peak:
    """Strongest cell (ties to the lower index) plus a parabolic sub-cell estimate."""
    mag = np.abs(profile.r)
    if mag.size == 0 or not np.any(mag > 0):
        raise ValueError("profile is identically zero")
    i = int(np.argmax(mag))
    L = mag.size
    a, b, c = mag[(i - 1) % L], mag[i], mag[(i + 1) % L]
    den = a - 2 * b + c
    delta = 0.5 * (a - c) / den if den != 0 else 0.0
    return Peak(i, complex(profile.r[i]), i + float(np.clip(delta, -0.5, 0.5)))


def refine_peak(profile: RangeProfile, tol: float = 1e-6) -> Peak:
    """Sub-cell peak by golden-section search on the band-limited interpolant.

    ``value`` is the interpolated complex value at ``refined``; unlike the
    parabolic estimate it carries the exact peak phase.
    """
    start = peak_cell(profile)
    value = _interpolant(profile.r)
    g = (np.sqrt(5) - 1) / 2
    a, b = start.index - 1.0, start.index + 1.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc_, fd = abs(value(c)), abs(value(d))
    while b - a > tol:
        if fc_ > fd:
            b, d, fd = d, c, fc_
            c = b - g * (b - a)
            fc_ = abs(value(c))
        else:
            a, c, fc_ = c, d, fd
            d = a + g * (b - a)
            fd = abs(value(d))
    x = 0.5 * (a + b)
    return Peak(start.index, complex(value(x)), float(x))


def process_measurement(meas, params: OfdmParams, code: CodeSymbols, mode: str = "auto",
                        R_cal_hat: float = 0.0, window: str = "none", oversample: int = 8) -> RangeProfile:
    """Run one captured measurement through the full chain.

    ``mode`` is ``mono`` (code division and internal-delay calibration),
    ``bistatic`` (division by the sidelink), ``raw`` (code division only) or
    ``auto`` (mono for monostatic captures, bistatic otherwise).
    """
    if mode == "auto":
        mode = "mono" if meas.rx_sidelink is None else "bistatic"

    def subcarriers(sig):
        return spectral_divide(demodulate(strip_cp(downconvert(sig), params), params), code)

    D = subcarriers(meas.rx_radar)
    if mode == "mono":
        D = calibrate_mono(D, R_cal_hat, params)
    elif mode == "bistatic":
        if meas.rx_sidelink is None:
            raise ValueError("bistatic processing needs a sidelink capture")
        D = correct_bistatic(D, subcarriers(meas.rx_sidelink))
    elif mode != "raw":
        raise ValueError(f"unknown processing mode {mode!r}")
    return range_compress(D, params, window, oversample, m=meas.m)
