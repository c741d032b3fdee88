import numpy as np
import pytest
from hypothesis import given, strategies as st

from sarkit.signal import ComplexSignal
from sarkit.trigger import (PRIMITIVE_TAPS, StreamingCorrelator, TriggerEvent, correlate_detect,
                            detect_blocks, extract_window, generate_pn)


@pytest.mark.parametrize("order", sorted(PRIMITIVE_TAPS))
def test_m_sequence_autocorrelation(order):
    pn = generate_pn(order, seed=3)
    n = (1 << order) - 1
    assert len(pn) == n
    c = np.fft.ifft(np.fft.fft(pn.chips) * np.conj(np.fft.fft(pn.chips))).real
    assert c[0] == pytest.approx(n)
    assert np.allclose(c[1:], -1.0)


def test_balance_property():
    # an m-sequence has exactly one more 1 bit (chip -1) than 0 bits
    for order in (5, 12, 20):
        chips = generate_pn(order).chips
        assert np.sum(chips < 0) - np.sum(chips > 0) == 1


def test_pn_examples():
    assert len(generate_pn(3)) == 7
    assert len(generate_pn(10)) == 1023
    assert np.array_equal(generate_pn(10, 4).chips, generate_pn(10, 4).chips)
    with pytest.raises(ValueError):
        generate_pn(2)
    with pytest.raises(ValueError):
        generate_pn(21)


def test_clean_pn_and_zero_stream():
    pn = generate_pn(8, 1)
    x = np.zeros(3000, complex)
    x[700 : 700 + len(pn)] = pn.chips
    ev = correlate_detect(ComplexSignal(x, 1.0), pn)
    assert [e.index for e in ev] == [700]
    assert ev[0].score >= 0.99
    assert correlate_detect(np.zeros(5000), pn) == []


def _stream(seed, n=6000):
    pn = generate_pn(7, 2)
    rng = np.random.default_rng(seed)
    x = 0.5 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    ks = sorted(rng.choice(np.arange(0, n - len(pn), 400), size=4, replace=False))
    for k in ks:
        x[k : k + len(pn)] += pn.chips
    return pn, x, ks


@given(st.integers(0, 500), st.integers(1, 700))
def test_shift_covariance(seed, d):
    pn, x, _ = _stream(seed)
    a = correlate_detect(x, pn)
    shifted = np.concatenate([np.zeros(d, complex), x])
    b = correlate_detect(shifted, pn)
    assert [e.index + d for e in a] == [e.index for e in b]


@given(st.integers(0, 500), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3,
                                                 allow_nan=False, allow_infinity=False))
def test_scale_invariance(seed, c):
    pn, x, _ = _stream(seed)
    corr = StreamingCorrelator(pn)
    s1 = corr._score(x, x.size - len(pn) + 1)
    s2 = corr._score(c * x, x.size - len(pn) + 1)
    assert np.allclose(s1, s2, atol=1e-9)
    assert [e.index for e in correlate_detect(x, pn)] == [e.index for e in correlate_detect(c * x, pn)]


@given(st.integers(0, 500), st.integers(1, 2500))
def test_block_size_independence(seed, block):
    pn, x, ks = _stream(seed)
    whole = correlate_detect(x, pn)
    corr = StreamingCorrelator(pn, chunk=512)
    blocks = detect_blocks(corr, (x[i : i + block] for i in range(0, x.size, block)))
    ref = detect_blocks(StreamingCorrelator(pn, chunk=512), [x])
    assert [e.index for e in blocks] == [e.index for e in ref]
    assert np.allclose([e.score for e in blocks], [e.score for e in ref])
    assert [e.index for e in whole] == ks


def test_feed_after_finish():
    pn = generate_pn(5)
    corr = StreamingCorrelator(pn)
    corr.finish()
    with pytest.raises(RuntimeError):
        corr.feed(np.zeros(4))
    assert corr.finish() == []


def test_threshold_validation():
    with pytest.raises(ValueError):
        StreamingCorrelator(generate_pn(5), threshold=0.0)


def test_extract_window():
    s = ComplexSignal(np.arange(100, dtype=complex), 10.0)
    ev = TriggerEvent(20, 1.0)
    w = extract_window(s, ev, 7, 15)
    assert np.array_equal(w.samples, np.arange(27, 42))
    assert w.t0 == pytest.approx(2.7)
    assert len(extract_window(s, ev, 0, 0)) == 0
    with pytest.raises(IndexError):
        extract_window(s, ev, 70, 20)


def test_window_is_radar_segment(small):
    from sarkit.waveform import assemble_frame, generate_code, generate_symbol
    pn = generate_pn(6, 1)
    radar = generate_symbol(small, generate_code(small, 0))
    frame = assemble_frame(pn.signal(small.fs), radar, None, 5e-6)
    stream = frame.stream(3)
    events = correlate_detect(stream, pn)
    assert [e.index for e in events] == [m * frame.n_pri for m in range(3)]
    for e in events:
        w = extract_window(stream, e, len(pn), small.n_symbol)
        assert np.array_equal(w.samples, radar.samples)
