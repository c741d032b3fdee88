"""Dual-path propagation and injection of clock/localization errors."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .scene import Scene, Trajectory, position_at, tof_bistatic, tof_sidelink
from .signal import C0, ComplexSignal, carrier
from .waveform import CodeSymbols, OfdmParams, generate_code, generate_symbol, upconvert

log = logging.getLogger(__name__)

# draw kinds for hierarchical seeding: (seed, receiver stream, measurement, kind)
_KIND_CPE, _KIND_TO, _KIND_NOISE, _KIND_LOC = 1, 2, 3, 4


def spawn_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one (seed, keys...) leaf of the seed tree."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


@dataclass(frozen=True)
class ErrorConfig:
    """Incoherency errors of a receiver that does not share the transmitter clock."""

    delta_s: float = 1.0
    delta_c: float = 1.0
    cpe_max: float = 0.0
    to_max: float = 0.0
    loc_sigma: float = 0.0
    loc_window: int = 1
    seed: int = 0
    noise_std: float = 0.0

    def __post_init__(self):
        if not (self.delta_s > 0 and self.delta_c > 0):
            raise ValueError("delta_s and delta_c must be positive")
        if min(self.cpe_max, self.to_max, self.loc_sigma, self.noise_std) < 0:
            raise ValueError("cpe_max, to_max, loc_sigma and noise_std must be >= 0")
        if int(self.loc_window) != self.loc_window or self.loc_window < 1 or self.loc_window % 2 == 0:
            raise ValueError("loc_window must be an odd integer >= 1")

    def f_sfo(self, params: OfdmParams) -> float:
        return (1.0 - self.delta_s) * params.fs

    def f_cfo(self, params: OfdmParams) -> float:
        return (1.0 - self.delta_c) * params.fc

    @property
    def ideal_clock(self) -> bool:
        return self.delta_s == 1 and self.delta_c == 1 and self.cpe_max == 0 and self.to_max == 0


def sfo_limit(params: OfdmParams) -> float:
    """Largest SFO (Hz) for which delta_s > 1 / (1 + 1/(B T)) still holds."""
    return params.fs / (params.B * params.T + 1.0)


def cfo_limit(params: OfdmParams) -> float:
    """Largest CFO (Hz) for which delta_c > 1 - delta_f / (10 fc) still holds."""
    return params.delta_f / 10.0


@dataclass
class Measurement:
    m: int
    t_m: float
    rx_id: str
    rx_radar: ComplexSignal
    rx_sidelink: Optional[ComplexSignal] = None
    truth: dict = field(default_factory=dict)

    @property
    def monostatic(self) -> bool:
        return self.rx_sidelink is None


class GuardViolation(ValueError):
    pass


def _bin_freqs(n: int, fs: float, f_lo: Optional[float]) -> np.ndarray:
    """Frequencies of the n FFT bins, unwrapped into [f_lo, f_lo + fs)."""
    f = np.arange(n) * (fs / n)
    if f_lo is None:
        f_lo = -fs / 2
    return f_lo + np.mod(f - f_lo, fs)


def _envelope(x: ComplexSignal) -> np.ndarray:
    if x.fc == 0:
        return x.samples
    return x.samples * np.conj(carrier(x.fc, x.times))


def _with_envelope(x: ComplexSignal, env: np.ndarray) -> ComplexSignal:
    if x.fc != 0:
        env = env * carrier(x.fc, x.times)
    return x.with_samples(env)


def _delay_sum(x: ComplexSignal, tofs, amps, period: Optional[int], f_lo: Optional[float]) -> ComplexSignal:
    tofs = np.atleast_1d(np.asarray(tofs, dtype=float))
    amps = np.atleast_1d(np.asarray(amps, dtype=np.complex128))
    env = _envelope(x)
    n = env.size
    if period is not None:
        if n < period:
            raise ValueError(f"signal shorter than its period ({n} < {period})")
        spec = np.fft.fft(env[:period])
        f = _bin_freqs(period, x.fs, f_lo) + x.fc
        ramp = np.exp(-2j * np.pi * np.outer(tofs, f)).T @ amps if tofs.size > 1 else (
            amps[0] * np.exp(-2j * np.pi * f * tofs[0])
        )
        one = np.fft.ifft(spec * ramp)
        out = one[np.arange(n) % period]
    else:
        shift = int(np.ceil(np.max(np.abs(tofs)) * x.fs)) if tofs.size else 0
        nfft = 1 << int(np.ceil(np.log2(2 * n + shift + 64)))
        spec = np.fft.fft(env, nfft)
        f = _bin_freqs(nfft, x.fs, f_lo) + x.fc
        ramp = np.zeros(nfft, dtype=np.complex128)
        for tau, a in zip(tofs, amps):
            ramp += a * np.exp(-2j * np.pi * f * tau)
        out = np.fft.ifft(spec * ramp)[:n]
    return _with_envelope(x, out)


def propagate(x: ComplexSignal, tof: float, amplitude: complex = 1.0, *,
              period: Optional[int] = None, f_lo: Optional[float] = None) -> ComplexSignal:
    """Delayed, scaled replica ``amplitude * x(t - tof)`` on the same time axis.

    The delay is a phase ramp exp(-j 2 pi (f + fc) tof) over the frequency
    bins of the envelope, so the carrier phase is delayed with it. With
    ``period`` the signal is treated as periodic (an OFDM symbol inside its
    cyclic-prefix guard) and the delay is exact for every sample; otherwise
    the signal is zero-padded and the delay is band-limited. ``f_lo`` selects
    the frequency interval [f_lo, f_lo + fs) the bins are unwrapped into,
    default centred on DC.
    """
    if tof < 0 and period is None:
        log.debug("negative delay on a non-periodic signal advances it")
    return _delay_sum(x, [tof], [amplitude], period, f_lo)


def propagate_sum(x: ComplexSignal, tofs, amplitudes, *, period=None, f_lo=None) -> ComplexSignal:
    """Superposition of several delayed replicas, one transform for all paths."""
    if len(tofs) == 0:
        return x.with_samples(np.zeros(len(x), dtype=np.complex128))
    return _delay_sum(x, tofs, amplitudes, period, f_lo)


def free_space_amplitude(tof_tx_leg: float, tof_rx_leg: float, reflectivity: complex = 1.0) -> complex:
    r1, r2 = C0 * np.asarray(tof_tx_leg, dtype=float), C0 * np.asarray(tof_rx_leg, dtype=float)
    if np.any(r1 <= 0) or np.any(r2 <= 0):
        raise ZeroDivisionError("free-space amplitude needs positive leg lengths")
    return reflectivity / (r1 * r2)


def _sinc_kernel(x: np.ndarray, half_width: int) -> np.ndarray:
    w = np.i0(8.0 * np.sqrt(np.clip(1.0 - (x / half_width) ** 2, 0.0, None))) / np.i0(8.0)
    return np.sinc(x) * w


@lru_cache(maxsize=8)
def _sfo_taps(n: int, delta_s: float, half_width: int):
    """Sample positions, tap indices and weights of one resampling grid (cached per delta_s)."""
    pos = np.arange(n) / delta_s
    base = np.floor(pos).astype(np.int64)
    offs = np.arange(-half_width + 1, half_width + 1)
    idx = base[:, None] + offs[None, :]
    w = _sinc_kernel(offs[None, :] - (pos - base)[:, None], half_width)
    outside = (idx < 0) | (idx >= n)
    w[outside] = 0.0
    idx[outside] = 0
    for a in (pos, idx, w):
        a.setflags(write=False)
    return pos, idx, w


def resample_sfo(y: ComplexSignal, delta_s: float, *, center: float = 0.0,
                 half_width: int = 32) -> ComplexSignal:
    """Re-sample ``y`` as a receiver running at ``delta_s * fs`` would see it.

    Output sample k is the envelope at t0 + k / (delta_s fs) (Kaiser-windowed
    sinc interpolation), re-labelled onto the nominal grid. Only the envelope
    is stretched; the carrier stays on the nominal time axis so that a
    sampling offset does not masquerade as a carrier offset. ``center`` is the
    middle of the occupied band, shifted to DC before interpolating.
    """
    if not delta_s > 0:
        raise ValueError("delta_s must be positive")
    env = _envelope(y)
    if delta_s == 1.0:
        return y.with_samples(y.samples.copy())
    n = env.size
    times = y.times
    if center:
        env = env * np.conj(carrier(center, times))
    pos, idx, w = _sfo_taps(n, float(delta_s), int(half_width))
    out = np.einsum("ij,ij->i", env[idx], w)
    if center:
        out = out * carrier(center, y.t0 + pos / y.fs)
    return _with_envelope(y, out)


def apply_cfo(y: ComplexSignal, f_cfo: float) -> ComplexSignal:
    """Residual carrier: multiply sample k by exp(j 2 pi f_cfo k / fs)."""
    if f_cfo == 0:
        return y
    k = np.arange(len(y))
    return y.with_samples(y.samples * np.exp(2j * np.pi * np.mod(f_cfo * k / y.fs, 1.0)))


class SlowTimeErrors(NamedTuple):
    cpe: np.ndarray
    to: np.ndarray

    def pairs(self) -> list:
        return list(zip(self.cpe.tolist(), self.to.tolist()))


def draw_slow_time_errors(cfg: ErrorConfig, M: int, stream: int = 0) -> SlowTimeErrors:
    """Per-measurement CPE (rad) and TO (s), uniform in +-cpe_max and +-to_max.

    Every measurement draws from its own seed leaf, so the values do not
    depend on the order in which measurements are simulated.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    cpe = np.empty(M)
    to = np.empty(M)
    for m in range(M):
        cpe[m] = spawn_rng(cfg.seed, stream, m, _KIND_CPE).uniform(-1.0, 1.0) * cfg.cpe_max
        to[m] = spawn_rng(cfg.seed, stream, m, _KIND_TO).uniform(-1.0, 1.0) * cfg.to_max
    return SlowTimeErrors(cpe, to)


def apply_timing_offset(y: ComplexSignal, T_to: float, *, period: Optional[int] = None,
                        f_lo: Optional[float] = None, guard: Optional[float] = None) -> ComplexSignal:
    """Open the sampling window ``T_to`` late: returns y(t + T_to)."""
    if guard is not None and abs(T_to) > guard:
        raise GuardViolation(
            f"timing offset {T_to:.3e} s exceeds the remaining cyclic-prefix guard {guard:.3e} s"
        )
    if T_to == 0:
        return y
    return propagate(y, -T_to, 1.0, period=period, f_lo=f_lo)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average along axis 0, averaging only the samples that exist at the edges."""
    if window == 1:
        return np.array(x, dtype=float)
    h = window // 2
    x = np.asarray(x, dtype=float)
    c = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    n = x.shape[0]
    lo = np.clip(np.arange(n) - h, 0, n)
    hi = np.clip(np.arange(n) + h + 1, 0, n)
    counts = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (c[hi] - c[lo]) / counts


def perturb_localization(traj: Trajectory, loc_sigma: float, loc_window: int, seed: int,
                         stream: int = 0) -> Trajectory:
    """Reported trajectory: truth plus smoothed Gaussian position errors."""
    if loc_window < 1 or loc_window % 2 == 0:
        raise ValueError("loc_window must be odd and >= 1")
    if loc_sigma == 0:
        return traj
    rng = spawn_rng(seed, stream, 0, _KIND_LOC)
    raw = rng.normal(0.0, loc_sigma, size=traj.pos.shape)
    return Trajectory(traj.t, traj.pos + moving_average(raw, loc_window), traj.node_id)


def transmit_signal(params: OfdmParams, code: CodeSymbols) -> ComplexSignal:
    """RF-band radar segment (cyclic prefix + symbol) as it leaves the transmitter."""
    return upconvert(generate_symbol(params, code), params.fc)


def _awgn(n: int, std: float, rng: np.random.Generator) -> np.ndarray:
    return std / np.sqrt(2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


class _Campaign:
    def __init__(self, scene: Scene, params: OfdmParams, cfg: ErrorConfig, M: int, code: CodeSymbols):
        self.scene, self.params, self.cfg, self.M = scene, params, cfg, M
        t = np.arange(M) / params.f_prf
        lo, hi = scene.common_span()
        if t[-1] > hi + 1e-9 or t[0] < lo - 1e-9:
            raise ValueError(f"trajectories cover [{lo}, {hi}] s but the campaign needs [0, {t[-1]}] s")
        self.t = t
        self.x = transmit_signal(params, code)
        self.f_lo = params.B / 2 - params.fs / 2
        self.tx_pos = position_at(scene.tx, t)
        self.rx_pos = [position_at(r, t) for r in scene.rx]
        self.errors = [draw_slow_time_errors(cfg, M, stream=i) for i in range(len(scene.rx))]
        self.tpos = np.array([q.pos for q in scene.targets]).reshape(-1, 3)
        self.refl = np.array([q.reflectivity for q in scene.targets], dtype=np.complex128)

    def _paths(self, tx, rx):
        d_tx = np.linalg.norm(self.tpos - tx, axis=1)
        d_rx = np.linalg.norm(self.tpos - rx, axis=1)
        tofs = tof_bistatic(tx[None, :], rx[None, :], self.tpos)
        amps = free_space_amplitude(d_tx / C0, d_rx / C0, self.refl) if self.tpos.size else self.refl
        return tofs, amps

    def measure(self, m: int, i: int) -> Measurement:
        p, cfg = self.params, self.cfg
        rx_traj = self.scene.rx[i]
        tx, rx = self.tx_pos[m], self.rx_pos[i][m]
        tofs, amps = self._paths(tx, rx)
        noise_rng = spawn_rng(cfg.seed, i, m, _KIND_NOISE) if cfg.noise_std else None
        K = p.K
        if self.scene.is_monostatic(rx_traj):
            radar = propagate_sum(self.x, tofs + self.scene.R_cal / C0, amps, period=K, f_lo=self.f_lo)
            if noise_rng is not None:
                radar = radar.with_samples(radar.samples + _awgn(len(radar), cfg.noise_std, noise_rng))
            return Measurement(m, self.t[m], rx_traj.node_id, radar, None,
                               {"target_tofs": tofs, "sidelink_tof": None, "cpe": 0.0, "to": 0.0})

        tof_sl = float(tof_sidelink(tx, rx))
        amp_sl = 1.0 / max(C0 * tof_sl, 1.0)
        cpe, T_to = self.errors[i].cpe[m], self.errors[i].to[m]
        all_tofs = np.append(tofs, tof_sl)
        guard = min(p.T_cp - all_tofs.max(), (p.n_body - K) / p.fs + all_tofs.min())
        channels = []
        for sig in (propagate_sum(self.x, tofs, amps, period=K, f_lo=self.f_lo),
                    propagate(self.x, tof_sl, amp_sl, period=K, f_lo=self.f_lo)):
            sig = apply_timing_offset(sig, T_to, period=K, f_lo=self.f_lo, guard=guard)
            if cfg.delta_s != 1:
                sig = resample_sfo(sig, cfg.delta_s, center=p.B / 2)
            sig = apply_cfo(sig, cfg.f_cfo(p))
            if cpe:
                sig = sig.with_samples(sig.samples * np.exp(1j * cpe))
            if noise_rng is not None:
                sig = sig.with_samples(sig.samples + _awgn(len(sig), cfg.noise_std, noise_rng))
            channels.append(sig)
        return Measurement(m, self.t[m], rx_traj.node_id, channels[0], channels[1],
                           {"target_tofs": tofs, "sidelink_tof": tof_sl, "cpe": cpe, "to": T_to})


def iter_campaign(scene: Scene, params: OfdmParams, cfg: ErrorConfig, M: int, *,
                  code: Optional[CodeSymbols] = None, threads: int = 1,
                  receivers: Optional[list] = None) -> Iterator[Measurement]:
    """Yield measurements in (m, receiver) order; ``threads`` only changes speed."""
    code = code if code is not None else generate_code(params, cfg.seed)
    camp = _Campaign(scene, params, cfg, M, code)
    ids = [r.node_id for r in scene.rx]
    which = [ids.index(r) for r in receivers] if receivers else list(range(len(ids)))
    jobs = [(m, i) for m in range(M) for i in which]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            # bounded look-ahead keeps memory flat for long campaigns
            chunk = 4 * threads
            for s in range(0, len(jobs), chunk):
                yield from pool.map(lambda j: camp.measure(*j), jobs[s : s + chunk])
    else:
        for m, i in jobs:
            yield camp.measure(m, i)


def simulate_campaign(scene: Scene, params: OfdmParams, cfg: ErrorConfig, M: int, *,
                      code: Optional[CodeSymbols] = None, threads: int = 1,
                      receivers: Optional[list] = None) -> list:
    return list(iter_campaign(scene, params, cfg, M, code=code, threads=threads, receivers=receivers))
