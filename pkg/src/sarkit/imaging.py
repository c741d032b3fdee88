"""Time-domain backprojection, image combination and 1-D cuts."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scene import Trajectory, position_at
from .signal import C0
from .waveform import OfdmParams

log = logging.getLogger(__name__)

if os.environ.get("SARKIT_PURE_PYTHON"):
    from . import _bpfallback as _kernel
    BACKEND = "python"
else:
    try:
        from . import _bpcore as _kernel
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _bpfallback as _kernel
        BACKEND = "python"

PROVENANCE = ("mono", "bistatic", "combined-coherent", "combined-absolute")


def _kernel_for(backend: Optional[str]):
    if backend is None:
        return _kernel
    if backend == "python":
        from . import _bpfallback
        return _bpfallback
    if backend == "cython":
        from . import _bpcore
        return _bpcore
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class PixelGrid:
    """Planar pixel grid; pixel (i, j) sits at ``origin + i*du*u_axis + j*dv*v_axis``."""

    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    du: float
    dv: float
    Nu: int
    Nv: int

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        u = np.asarray(self.u_axis, dtype=float)
        v = np.asarray(self.v_axis, dtype=float)
        if o.shape != (3,) or u.shape != (3,) or v.shape != (3,):
            raise ValueError("origin and axes must be 3-vectors")
        if abs(u @ u - 1) > 1e-9 or abs(v @ v - 1) > 1e-9 or abs(u @ v) > 1e-9:
            raise ValueError("grid axes must be orthonormal")
        if not (self.du > 0 and self.dv > 0):
            raise ValueError("pixel pitches must be positive")
        if int(self.Nu) < 1 or int(self.Nv) < 1:
            raise ValueError("grid needs at least one pixel per axis")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)
        object.__setattr__(self, "Nu", int(self.Nu))
        object.__setattr__(self, "Nv", int(self.Nv))

    @property
    def shape(self) -> tuple[int, int]:
        return self.Nu, self.Nv

    @property
    def u(self) -> np.ndarray:
        return np.arange(self.Nu) * self.du

    @property
    def v(self) -> np.ndarray:
        return np.arange(self.Nv) * self.dv

    def positions(self) -> np.ndarray:
        """Pixel centres as an (Nu, Nv, 3) array."""
        return (self.origin
                + self.u[:, None, None] * self.u_axis
                + self.v[None, :, None] * self.v_axis)

    def fractional_index(self, point) -> tuple[float, float]:
        d = np.asarray(point, dtype=float) - self.origin
        return float(d @ self.u_axis) / self.du, float(d @ self.v_axis) / self.dv

    def contains(self, point) -> bool:
        a, b = self.fractional_index(point)
        eps = 1e-9
        return -eps <= a <= self.Nu - 1 + eps and -eps <= b <= self.Nv - 1 + eps

    def point(self, a: float, b: float) -> np.ndarray:
        return self.origin + a * self.du * self.u_axis + b * self.dv * self.v_axis

    def matches(self, other: "PixelGrid") -> bool:
        return (self.shape == other.shape
                and np.allclose([self.du, self.dv], [other.du, other.dv], rtol=1e-12, atol=0)
                and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12)
                and np.allclose(self.u_axis, other.u_axis, atol=1e-12)
                and np.allclose(self.v_axis, other.v_axis, atol=1e-12))


def ground_grid(u_range, v_range, du: float, dv: Optional[float] = None, z: float = 0.0) -> PixelGrid:
    """Ground-plane grid with u along x (cross-range) and v along y (ground-range)."""
    dv = du if dv is None else dv
    Nu = int(np.floor((u_range[1] - u_range[0]) / du + 1e-9)) + 1
    Nv = int(np.floor((v_range[1] - v_range[0]) / dv + 1e-9)) + 1
    return PixelGrid([u_range[0], v_range[0], z], [1.0, 0, 0], [0, 1.0, 0], du, dv, Nu, Nv)


@dataclass(frozen=True)
class SarImage:
    A: np.ndarray
    grid: PixelGrid
    provenance: str
    M_used: int
    n_outside: int = 0

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.A.shape != self.grid.shape:
            raise ValueError(f"image shape {self.A.shape} does not match grid {self.grid.shape}")

    def magnitude_db(self, floor_db: float = -300.0) -> np.ndarray:
        mag = np.abs(self.A)
        peak = mag.max()
        if peak == 0:
            raise ValueError("image is identically zero")
        return np.maximum(20 * np.log10(np.maximum(mag / peak, 1e-300)), floor_db)


@dataclass(frozen=True)
class Profile1D:
    """Peak-normalised magnitude cut; ``s`` is the grid coordinate along the cut axis."""

    s: np.ndarray
    db: np.ndarray
    axis: str


def _band_centre(profile, fc: float, n: Optional[int] = None):
    """Profile with its band-offset phase ramp removed, and the matching carrier.

    Subcarriers occupy fc .. fc + B, so a profile carries a linear phase of
    pi (N - 1) / L per cell. Removing it before linear interpolation and
    restoring it through the phase hypothesis at the band centre is exact for
    on-cell samples and keeps the interpolation from biasing the phase.
    """
    L = profile.r.size
    N = L // profile.oversample
    n_c = (N - 1) / 2
    k = np.arange(L if n is None else n)
    r = profile.r[: k.size] * np.exp(-2j * np.pi * n_c * k / L)
    return r, fc + n_c * profile.bandwidth / N


def backproject(profiles: Sequence, tx_traj: Trajectory, rx_traj: Optional[Trajectory],
                grid: PixelGrid, params: OfdmParams, mode: str = "mono", *,
                times=None, spreading: bool = True, threads: int = 1,
                backend: Optional[str] = None) -> SarImage:
    """Form an image by phase-corrected summation of range profiles.

    ``mono`` looks profiles up at the absolute delay over the tx and rx legs
    (rx defaults to tx). ``bistatic`` expects sidelink-relative profiles and
    looks them up at the delay minus the sidelink delay; the phase hypothesis
    uses the same relative delay, which equals re-adding the sidelink delay to
    both data and hypothesis.

    Each profile is divided by its window gain. With ``spreading`` the sample
    is also multiplied by the two leg lengths (and the sidelink length for
    bistatic data), so an ideal unit target focuses to a magnitude of M.
    """
    if mode not in ("mono", "bistatic"):
        raise ValueError(f"unknown backprojection mode {mode!r}")
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no profiles to backproject")
    want = "monostatic" if mode == "mono" else "bistatic"
    for p in profiles:
        if p.domain != want:
            raise ValueError(f"{mode} backprojection got a {p.domain} profile (m={p.m})")
    lengths = {p.r.size for p in profiles}
    cps = {p.bandwidth * p.oversample for p in profiles}
    if len(lengths) != 1 or len(cps) != 1:
        raise ValueError("profiles differ in length or cell size")
    if mode == "bistatic" and rx_traj is None:
        raise ValueError("bistatic backprojection needs the receiver trajectory")

    if times is None:
        times = np.array([p.m for p in profiles], dtype=float) / params.f_prf
    times = np.asarray(times, dtype=float)
    tx = np.ascontiguousarray(position_at(tx_traj, times))
    rx = tx if rx_traj is None else np.ascontiguousarray(position_at(rx_traj, times))
    weight = 1.0 / np.array([p.gain for p in profiles], dtype=float)
    if mode == "bistatic":
        r_sl = np.linalg.norm(tx - rx, axis=1)
        offset = r_sl / C0
        if spreading:
            weight = weight / np.maximum(r_sl, 1.0)
    else:
        offset = np.zeros(len(profiles))

    cps = float(cps.pop())
    # the delay is convex over the pixel plane, so its maximum sits at a corner;
    # cells beyond that are never read and need not be copied
    corners = np.array([grid.point(a, b) for a in (0, grid.Nu - 1) for b in (0, grid.Nv - 1)])
    far = (np.linalg.norm(tx[:, None] - corners, axis=-1)
           + np.linalg.norm(rx[:, None] - corners, axis=-1)).max(axis=1) / C0 - offset
    L = lengths.pop()
    L_use = int(min(L, max(2, np.ceil(far.max() * cps) + 2)))
    R = np.empty((len(profiles), L_use), dtype=np.complex128)
    f_ref = set()
    for k, p in enumerate(profiles):
        R[k], f = _band_centre(p, params.fc, L_use)
        f_ref.add(f)
    if len(f_ref) != 1:
        raise ValueError("profiles differ in subcarrier count")
    px = np.ascontiguousarray(grid.positions().reshape(-1, 3))
    out = np.zeros(px.shape[0], dtype=np.complex128)
    missed = _kernel_for(backend).accumulate(
        px, tx, rx, np.ascontiguousarray(offset), np.ascontiguousarray(weight), R,
        cps, float(f_ref.pop()), out, bool(spreading), int(threads))
    if missed:
        log.info("%d pixel/measurement pairs fell outside the range profiles", missed)
    return SarImage(out.reshape(grid.shape), grid, mode, len(profiles), int(missed))


def aligned_samples(profiles: Sequence, tx_traj: Trajectory, rx_traj: Optional[Trajectory],
                    point, params: OfdmParams, mode: str = "mono", *, times=None,
                    spreading: bool = True) -> np.ndarray:
    """Per-measurement terms that backprojection sums into the pixel at ``point``.

    Their sum equals the image value at that point; their phases are the
    measurement phases at the target range after removing the expected phase.
    Delays outside a profile give zero.
    """
    profiles = list(profiles)
    if times is None:
        times = np.array([p.m for p in profiles], dtype=float) / params.f_prf
    tx = position_at(tx_traj, np.asarray(times, dtype=float))
    rx = tx if rx_traj is None else position_at(rx_traj, np.asarray(times, dtype=float))
    x = np.asarray(point, dtype=float)
    r1 = np.linalg.norm(tx - x, axis=1)
    r2 = np.linalg.norm(rx - x, axis=1)
    offset = np.zeros(len(profiles))
    weight = 1.0 / np.array([p.gain for p in profiles], dtype=float)
    if mode == "bistatic":
        r_sl = np.linalg.norm(tx - rx, axis=1)
        offset = r_sl / C0
        if spreading:
            weight = weight / np.maximum(r_sl, 1.0)
    delay = (r1 + r2) / C0 - offset
    out = np.zeros(len(profiles), dtype=np.complex128)
    for k, p in enumerate(profiles):
        pos = delay[k] * p.bandwidth * p.oversample
        L = p.r.size
        if not 0.0 <= pos <= L - 1:
            continue
        i = min(int(np.floor(pos)), L - 2)
        fr = pos - i
        g = weight[k] * (r1[k] * r2[k] if spreading else 1.0)
        r, f_ref = _band_centre(p, params.fc, i + 2)
        v = g * (r[i] * (1.0 - fr) + r[i + 1] * fr)
        out[k] = v * np.exp(2j * np.pi * np.fmod(f_ref * delay[k], 1.0))
    return out


def _check_grids(images):
    if not images:
        raise ValueError("nothing to combine")
    g = images[0].grid
    for im in images[1:]:
        if not g.matches(im.grid):
            raise ValueError("images are on different grids")
    return g


def _peak(image: SarImage) -> float:
    peak = np.abs(image.A).max()
    if peak == 0:
        raise ValueError("cannot normalise an all-zero image")
    return peak


def combine_coherent(images: Sequence[SarImage]) -> SarImage:
    """Complex sum of the images, each scaled to unit peak magnitude."""
    g = _check_grids(images)
    A = sum(im.A / _peak(im) for im in images)
    return SarImage(A, g, "combined-coherent", sum(im.M_used for im in images))


def combine_absolute(images: Sequence[SarImage]) -> SarImage:
    """Sum of peak-normalised magnitudes; no phase is kept."""
    g = _check_grids(images)
    A = sum(np.abs(im.A) / _peak(im) for im in images).astype(np.complex128)
    return SarImage(A, g, "combined-absolute", sum(im.M_used for im in images))


def image_cut(image: SarImage, axis: str, through) -> Profile1D:
    """Magnitude cut through ``through`` along the cross-range (u) or ground-range (v) axis.

    The point need not lie on a pixel centre; the two neighbouring pixel rows
    are linearly interpolated.
    """
    g = image.grid
    if not g.contains(through):
        raise ValueError("cut point lies outside the grid")
    a, b = g.fractional_index(through)
    mag = np.abs(image.A)
    if axis in ("cross-range", "u"):
        frac, n, lines, s = b, g.Nv, mag, g.u
    elif axis in ("ground-range", "v"):
        frac, n, lines, s = a, g.Nu, mag.T, g.v
    else:
        raise ValueError(f"unknown cut axis {axis!r}")
    j0 = min(int(np.floor(frac)), n - 2) if n > 1 else 0
    f = frac - j0
    cut = lines[:, j0] if n == 1 else lines[:, j0] * (1 - f) + lines[:, j0 + 1] * f
    peak = cut.max()
    if peak == 0:
        raise ValueError("cut is identically zero")
    db = 20 * np.log10(np.maximum(cut / peak, 1e-300))
    return Profile1D(s.copy(), db, "cross-range" if axis in ("cross-range", "u") else "ground-range")
