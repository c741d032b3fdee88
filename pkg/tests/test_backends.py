import os
import subprocess
import sys

import numpy as np
import pytest

from sarkit import imaging
from sarkit.imaging import backproject, ground_grid
from sarkit.rangeproc import RangeProfile
from sarkit.scene import Trajectory, linear_trajectory
from sarkit.waveform import OfdmParams

needs_ext = pytest.mark.skipif(imaging.BACKEND != "cython", reason="compiled kernel not built")


def _random_profiles(domain, M=12, N=64, os_=8, seed=0):
    rng = np.random.default_rng(seed)
    B = 64e6
    return [RangeProfile(rng.standard_normal(N * os_) + 1j * rng.standard_normal(N * os_),
                         299792458.0 / (2 * B * os_), domain, m, os_, B, float(N))
            for m in range(M)]


@needs_ext
@pytest.mark.parametrize("mode, spreading", [("mono", True), ("mono", False), ("bistatic", True)])
def test_backends_agree(mode, spreading):
    p = OfdmParams(fc=1e9, N=64, delta_f=1e6, T=1.25e-6, T_cp=0.25e-6, fs=128e6, f_prf=1e3)
    prof = _random_profiles("monostatic" if mode == "mono" else "bistatic")
    tx = linear_trajectory([-1, 0, 10], [30, 0, 0], p.f_prf, 12, "tx")
    rx = Trajectory(tx.t, tx.pos + [0, -2, 0], "rx") if mode == "bistatic" else None
    grid = ground_grid((-3, 3), (5, 200), 0.5)
    a = backproject(prof, tx, rx, grid, p, mode, spreading=spreading, backend="cython", threads=2)
    b = backproject(prof, tx, rx, grid, p, mode, spreading=spreading, backend="python")
    scale = np.abs(b.A).max()
    assert np.max(np.abs(a.A - b.A)) <= 1e-10 * scale
    assert a.n_outside == b.n_outside > 0


def test_unknown_backend():
    p = OfdmParams()
    tx = linear_trajectory([0, 0, 10], [0, 0, 0], p.f_prf, 1)
    with pytest.raises(ValueError):
        backproject(_random_profiles("monostatic", M=1, N=4096, os_=1), tx, None,
                    ground_grid((0, 1), (0, 1), 0.5), p, backend="fortran")


def test_pure_python_switch():
    env = dict(os.environ, SARKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sarkit.imaging as i; print(i.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
