import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarkit.channel import ErrorConfig, simulate_campaign
from sarkit.imaging import (PixelGrid, SarImage, aligned_samples, backproject, combine_absolute,
                            combine_coherent, ground_grid, image_cut)
from sarkit.metrics import cross_range_resolution, ground_range_resolution, image_peak
from sarkit.rangeproc import process_measurement
from sarkit.scene import PointTarget, Scene, Trajectory, linear_trajectory
from sarkit.waveform import OfdmParams, generate_code

SMALL = OfdmParams(fc=1e9, N=64, delta_f=1e6, T=1.25e-6, T_cp=0.25e-6, fs=128e6, nu=14, f_prf=1e3)
CODE = generate_code(SMALL, 0)


def _campaign(M, target, speed=50.0, cfg=None, colocated=False, mode="auto"):
    tx = linear_trajectory([-1.0, 0.0, 10.0], [speed, 0.0, 0.0], SMALL.f_prf, M, "tx")
    rx = [Trajectory(tx.t, tx.pos, "rx")] if colocated else [tx]
    scene = Scene(tx, rx, [PointTarget(target)])
    meas = simulate_campaign(scene, SMALL, cfg or ErrorConfig(), M, code=CODE)
    return tx, [process_measurement(m, SMALL, CODE, mode) for m in meas]


targets = st.tuples(st.floats(-2.0, 2.0), st.floats(8.0, 20.0)).map(lambda t: np.array([t[0], t[1], 0.0]))


@settings(max_examples=15)
@given(targets)
def test_single_measurement_identity(target):
    tx, prof = _campaign(1, target)
    s = aligned_samples(prof, tx, None, target, SMALL)
    assert abs(np.angle(s[0])) < 1e-3
    # linear interpolation on an 8x profile loses at most sinc(1/16)
    assert 0.99 <= abs(s[0]) <= 1 + 1e-9


@settings(max_examples=10)
@given(targets)
def test_coherent_gain_moving_platform(target):
    M = 30
    tx, prof = _campaign(M, target)
    s = aligned_samples(prof, tx, None, target, SMALL)
    assert np.max(np.abs(np.angle(s))) < 1e-3
    assert 0.99 <= abs(s.sum()) / M <= 1 + 1e-9


@pytest.mark.parametrize("M", [1, 4, 17])
def test_coherent_gain_static_platform(M):
    target = np.array([0.3, 14.2, 0.0])
    tx, prof = _campaign(M, target, speed=0.0)
    one = aligned_samples(prof[:1], tx, None, target, SMALL).sum()
    allm = aligned_samples(prof, tx, None, target, SMALL).sum()
    assert abs(allm) == pytest.approx(M * abs(one), rel=1e-9)


def test_aligned_samples_sum_is_pixel_value():
    target = np.array([0.2, 15.0, 0.0])
    tx, prof = _campaign(12, target)
    grid = ground_grid((-1, 1), (14, 16), 0.05)
    image = backproject(prof, tx, None, grid, SMALL)
    i, j = 17, 23
    point = grid.point(i, j)
    assert aligned_samples(prof, tx, None, point, SMALL).sum() == pytest.approx(image.A[i, j], rel=1e-9)


def test_focus_at_target():
    target = np.array([0.0, 15.0, 0.0])
    tx, prof = _campaign(40, target)
    grid = ground_grid((-2, 2), (13, 17), 0.05)
    image = backproject(prof, tx, None, grid, SMALL)
    point, mag = image_peak(image)
    gr = ground_range_resolution(SMALL.B, 10.0, 15.0)
    cr = cross_range_resolution(SMALL.wavelength, tx.pos, target)
    # the mainlobe is flat enough that interpolation ripple moves the argmax slightly
    assert abs(point[0]) < 0.1 * cr
    assert abs(point[1] - 15.0) < 0.1 * gr
    assert mag == pytest.approx(40, rel=0.01)
    assert image.M_used == 40 and image.n_outside == 0


def test_uncorrected_cpe_defocuses():
    target = np.array([0.0, 15.0, 0.0])
    cfg = ErrorConfig(cpe_max=np.pi, seed=2)
    tx, raw = _campaign(40, target, cfg=cfg, colocated=True, mode="raw")
    _, fixed = _campaign(40, target, cfg=cfg, colocated=True, mode="bistatic")
    grid = ground_grid((-1, 1), (14, 16), 0.05)
    a = np.abs(backproject(raw, tx, tx, grid, SMALL).A).max()
    b = np.abs(backproject(fixed, tx, tx, grid, SMALL, "bistatic").A).max()
    assert 20 * np.log10(b / a) >= 10.0


def test_profiles_outside_grid_are_counted():
    tx, prof = _campaign(3, np.array([0.0, 15.0, 0.0]))
    far = ground_grid((-1, 1), (500, 502), 1.0)
    image = backproject(prof, tx, None, far, SMALL)
    assert image.n_outside == 3 * far.Nu * far.Nv
    assert not np.any(image.A)


def test_threads_do_not_change_the_image():
    target = np.array([0.5, 16.0, 0.0])
    tx, prof = _campaign(10, target)
    grid = ground_grid((-1, 1), (15, 17), 0.04)
    a = backproject(prof, tx, None, grid, SMALL, threads=1).A
    b = backproject(prof, tx, None, grid, SMALL, threads=4).A
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_domain_and_mode_checks():
    tx, prof = _campaign(2, np.array([0.0, 15.0, 0.0]))
    grid = ground_grid((-1, 1), (14, 16), 0.5)
    with pytest.raises(ValueError):
        backproject(prof, tx, None, grid, SMALL, "bistatic")
    with pytest.raises(ValueError):
        backproject(prof, tx, None, grid, SMALL, "fancy")
    with pytest.raises(ValueError):
        backproject([], tx, None, grid, SMALL)


def test_pixel_grid_validation():
    with pytest.raises(ValueError):
        PixelGrid([0, 0, 0], [1, 0, 0], [1, 0, 0], 1.0, 1.0, 2, 2)
    with pytest.raises(ValueError):
        PixelGrid([0, 0, 0], [1, 0, 0], [0, 1, 0], 0.0, 1.0, 2, 2)
    with pytest.raises(ValueError):
        PixelGrid([0, 0, 0], [1, 0, 0], [0, 1, 0], 1.0, 1.0, 0, 2)
    g = ground_grid((-1, 1), (2, 3), 0.5)
    assert g.shape == (5, 3)
    assert np.allclose(g.point(4, 2), [1, 3, 0])


def _image(A, grid=None):
    grid = grid or ground_grid((0, 1), (0, 1), 0.25)
    return SarImage(np.asarray(A, dtype=complex), grid, "mono", 1)


@given(st.integers(0, 1000))
def test_combine_properties(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    x, y = _image(A), _image(B)
    same = combine_coherent([x, x])
    assert np.allclose(same.A, 2 * A / np.abs(A).max())
    assert np.argmax(np.abs(same.A)) == np.argmax(np.abs(A))
    co, ab = combine_coherent([x, y]), combine_absolute([x, y])
    assert np.all(np.abs(ab.A) >= np.abs(co.A) - 1e-12)
    assert co.provenance == "combined-coherent" and co.M_used == 2


def test_combine_rejects_mismatch_and_zero():
    x = _image(np.ones((5, 5)))
    other = _image(np.ones((5, 5)), ground_grid((0.1, 1.1), (0, 1), 0.25))
    with pytest.raises(ValueError):
        combine_coherent([x, other])
    with pytest.raises(ValueError):
        combine_absolute([x, _image(np.zeros((5, 5)))])
    with pytest.raises(ValueError):
        combine_coherent([])


def test_cuts():
    grid = ground_grid((-1, 1), (-1, 1), 0.1)
    pos = grid.positions()
    A = np.sinc(4 * pos[..., 0]) * np.sinc(2 * pos[..., 1])
    image = _image(A, grid)
    cr = image_cut(image, "cross-range", [0, 0, 0])
    gr = image_cut(image, "ground-range", [0, 0, 0])
    assert cr.db.max() == pytest.approx(0.0)
    assert np.allclose(cr.db, cr.db[::-1], atol=1e-9)
    assert np.allclose(gr.db, gr.db[::-1], atol=1e-9)
    assert cr.axis == "cross-range" and gr.axis == "ground-range"
    with pytest.raises(ValueError):
        image_cut(_image(np.zeros(grid.shape), grid), "u", [0, 0, 0])
    with pytest.raises(ValueError):
        image_cut(image, "u", [5, 0, 0])
    with pytest.raises(ValueError):
        image_cut(image, "w", [0, 0, 0])
