"""PN preamble generation, correlation-based frame detection and window extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .signal import ComplexSignal

# feedback taps (1-based) of one primitive polynomial per register length
PRIMITIVE_TAPS = {
    3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6), 8: (8, 6, 5, 4),
    9: (9, 5), 10: (10, 7), 11: (11, 9), 12: (12, 11, 10, 4), 13: (13, 12, 11, 8),
    14: (14, 13, 12, 2), 15: (15, 14), 16: (16, 15, 13, 4), 17: (17, 14),
    18: (18, 11), 19: (19, 18, 17, 14), 20: (20, 17),
}


@dataclass(frozen=True)
class PnSequence:
    chips: np.ndarray
    order: int
    seed: int
    taps: tuple

    def __len__(self):
        return self.chips.size

    def signal(self, fs: float) -> ComplexSignal:
        """The chips as a BPSK preamble, one chip per sample."""
        return ComplexSignal(self.chips.astype(np.complex128), fs)


class TriggerEvent(NamedTuple):
    index: int
    score: float


def generate_pn(order: int, seed: int = 1) -> PnSequence:
    """Maximal-length sequence of 2**order - 1 chips in {+1, -1}.

    The seed picks the non-zero initial register state, i.e. the cyclic shift.
    """
    if order not in PRIMITIVE_TAPS:
        raise ValueError(f"PN order must be in 3..20, got {order}")
    n = (1 << order) - 1
    taps = PRIMITIVE_TAPS[order]
    state = int(seed) % n + 1
    mask = 0
    for t in taps:
        mask |= 1 << (order - t)
    bits = np.empty(n, dtype=np.int8)
    for k in range(n):
        bits[k] = state & 1
        fb = bin(state & mask).count("1") & 1
        state = (state >> 1) | (fb << (order - 1))
    return PnSequence(1.0 - 2.0 * bits, order, int(seed), taps)


class StreamingCorrelator:
    """Normalised sliding correlation against a PN reference, fed block by block.

    Input is re-cut into fixed chunks aligned on the absolute sample index, so
    scores and events do not depend on how the caller splits the stream. A
    window start ``k`` becomes an event when its score reaches the threshold
    and is the largest within ``len(pn) - 1`` samples on either side (ties go
    to the earlier index).
    """

    def __init__(self, pn: PnSequence, threshold: float = 0.6, chunk: int = 1 << 16):
        if not 0 < threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        self.L = len(pn)
        self.threshold = float(threshold)
        self.chunk = max(int(chunk), self.L)
        self.nfft = 1 << int(np.ceil(np.log2(self.chunk + self.L - 1)))
        self._ref = np.conj(np.fft.fft(pn.chips, self.nfft))
        self._buf = np.zeros(0, dtype=np.complex128)
        self._scores = np.zeros(0)
        self._scores_start = 0  # absolute index of _scores[0]
        self._next = 0  # absolute index of the next window to score
        self._pending: list = []
        self._done = False

    def _score(self, seg: np.ndarray, count: int) -> np.ndarray:
        L = self.L
        c = np.fft.ifft(np.fft.fft(seg, self.nfft) * self._ref)[:count]
        cs = np.concatenate(([0.0], np.cumsum(np.abs(seg) ** 2)))
        e = cs[L : L + count] - cs[:count]
        out = np.zeros(count)
        ok = e > 0
        out[ok] = np.abs(c[ok]) / np.sqrt(L * e[ok])
        return np.minimum(out, 1.0)

    def _append(self, scores: np.ndarray):
        start = self._next
        self._scores = np.concatenate((self._scores, scores))
        self._next += scores.size
        hits = np.flatnonzero(scores >= self.threshold)
        self._pending.extend((start + hits).tolist())

    def _decide(self, final: bool) -> list:
        L, end = self.L, self._next
        events, keep = [], []
        for k in self._pending:
            if not final and k + L - 1 >= end:
                keep.append(k)
                continue
            lo = max(k - L + 1, self._scores_start)
            hi = min(k + L, end)
            w = self._scores[lo - self._scores_start : hi - self._scores_start]
            s = self._scores[k - self._scores_start]
            if s >= w.max() and not np.any(w[: k - lo] == s):
                events.append(TriggerEvent(int(k), float(s)))
        self._pending = keep
        floor = min([end - 2 * L] + [k - L for k in keep])
        if floor > self._scores_start:
            self._scores = self._scores[floor - self._scores_start :]
            self._scores_start = floor
        return events

    def feed(self, samples) -> list:
        if self._done:
            raise RuntimeError("correlator already finished")
        x = np.asarray(samples, dtype=np.complex128).ravel()
        self._buf = np.concatenate((self._buf, x))
        span = self.chunk + self.L - 1
        while self._buf.size >= span:
            self._append(self._score(self._buf[:span], self.chunk))
            self._buf = self._buf[self.chunk :]
        return self._decide(final=False)

    def finish(self) -> list:
        if self._done:
            return []
        self._done = True
        count = self._buf.size - self.L + 1
        if count > 0:
            self._append(self._score(self._buf, count))
        self._buf = self._buf[:0]
        return self._decide(final=True)


def correlate_detect(stream: ComplexSignal, pn: PnSequence, threshold: float = 0.6,
                     block_size: int | None = None) -> list:
    """Trigger events of a whole stream, in index order."""
    x = stream.samples if isinstance(stream, ComplexSignal) else np.asarray(stream)
    corr = StreamingCorrelator(pn, threshold)
    return detect_blocks(corr, [x] if block_size is None else
                         (x[i : i + block_size] for i in range(0, x.size, block_size)))


def detect_blocks(corr: StreamingCorrelator, blocks: Iterable) -> list:
    events = []
    for b in blocks:
        events.extend(corr.feed(b))
    events.extend(corr.finish())
    return events


def extract_window(stream: ComplexSignal, event: TriggerEvent, offset: int, length: int) -> ComplexSignal:
    """Slice ``length`` samples starting ``offset`` samples after the event."""
    return stream.slice(event.index + int(offset), int(length))
