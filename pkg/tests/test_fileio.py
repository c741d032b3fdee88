import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sarkit.fileio import (MAGIC, FormatError, image_db, pgm_levels, read_array, read_jsonl,
                           read_pgm, write_array, write_csv, write_jsonl, write_pgm)
from sarkit.imaging import SarImage, ground_grid


@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(0, 1000))
def test_binary_round_trip(shape, seed):
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)
    with tempfile.TemporaryDirectory() as d:
        path = write_array(Path(d) / "x.bin", a, axis_scale=1.5e8, t0=-2e-7, meta={"m": 3, "z": [1, 2]})
        b, head = read_array(path)
    assert b.dtype == np.complex64 and np.array_equal(a, b)
    assert head["dims"] == tuple(shape)
    assert head["axis_scale"] == 1.5e8 and head["t0"] == -2e-7
    assert head["meta"] == {"m": 3, "z": [1, 2]}


def test_header_layout(tmp_path):
    path = write_array(tmp_path / "x.bin", np.array([1 + 2j, 3 - 4j]), axis_scale=2.0)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack_from("<HBB", raw, 8) == (1, 1, 1)
    assert struct.unpack_from("<Q", raw, 12) == (2,)
    assert struct.unpack_from("<ddI", raw, 20) == (2.0, 0.0, 2)
    assert raw[40:42] == b"{}"
    assert np.array_equal(np.frombuffer(raw[42:], "<f4"), [1, 2, 3, -4])


def test_format_errors(tmp_path):
    path = write_array(tmp_path / "x.bin", np.ones(4))
    raw = bytearray(path.read_bytes())
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(FormatError):
        read_array(bad)
    raw[8] = 9
    bad.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_array(bad)
    bad.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FormatError):
        read_array(bad)


def _image():
    grid = ground_grid((0, 0.3), (1, 1.2), 0.1)
    A = np.zeros(grid.shape, complex)
    A[1, 1] = 10.0
    A[2, 0] = 10 ** (-30 / 20) * 10
    A[0, 2] = 1j * 10 ** (-15 / 20) * 10
    return SarImage(A, grid, "mono", 1)


def test_pgm_levels_and_layout(tmp_path):
    assert list(pgm_levels(np.array([0.0, -30.0, -60.0, -15.0]))) == [255, 0, 0, 128]
    im = _image()
    levels = read_pgm(write_pgm(tmp_path / "x.pgm", im))
    assert levels.shape == (im.grid.Nv, im.grid.Nu)
    # far ground range on the top row
    assert levels[1, 1] == 255
    assert levels[-1, 2] == 0
    assert levels[0, 0] == 128
    with pytest.raises(FormatError):
        read_pgm(write_csv(tmp_path / "y.pgm", im))


def test_csv(tmp_path):
    im = _image()
    lines = write_csv(tmp_path / "x.csv", im).read_text().splitlines()
    assert lines[0].startswith("v_m/u_m,0.000000,0.100000")
    assert len(lines) == 1 + im.grid.Nv
    row = lines[2].split(",")
    assert float(row[0]) == pytest.approx(1.1)
    assert float(row[2]) == 0.0


def test_image_db_zero():
    with pytest.raises(ValueError):
        image_db(np.zeros((2, 2)))


def test_jsonl(tmp_path):
    recs = [{"b": np.float64(1.5), "a": np.arange(3)}, {"z": 1 + 2j, "n": np.int64(4)}]
    path = write_jsonl(tmp_path / "r.jsonl", recs)
    assert path.read_text().splitlines()[0] == '{"a":[0,1,2],"b":1.5}'
    assert read_jsonl(path)[1] == {"n": 4, "z": [1.0, 2.0]}
