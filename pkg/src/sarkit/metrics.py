"""Coherence and image-quality figures of merit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .imaging import Profile1D, SarImage
from .signal import C0, wrap_phase

SINC_3DB = 0.886


@dataclass(frozen=True)
class CoherenceReport:
    gamma_cf: float
    M: int
    phases: np.ndarray
    peak_values: np.ndarray
    cell: int

    def as_dict(self) -> dict:
        return {"gamma_cf": self.gamma_cf, "M": self.M, "cell": self.cell,
                "phase_spread": float(np.ptp(self.phases)) if self.M else 0.0}


def coherence_factor(peak_values) -> float:
    """|sum s|^2 / (M sum |s|^2); 1 for identical phasors, about 1/M for random phases."""
    s = np.asarray(peak_values, dtype=np.complex128).ravel()
    if s.size == 0:
        raise ValueError("need at least one value")
    power = np.sum(np.abs(s) ** 2)
    if power == 0:
        raise ValueError("all peak values are zero")
    if np.all(s == s[0]):
        # equality case of Cauchy-Schwarz, exact rather than rounded
        return 1.0
    g = float(np.abs(np.sum(s)) ** 2 / (s.size * power))
    return min(g, 1.0)


def locate_cell(profiles: Sequence) -> int:
    """Peak cell of the coherently averaged profile."""
    acc = np.sum([p.r for p in profiles], axis=0)
    return int(np.argmax(np.abs(acc)))


def phase_series(profiles: Sequence, target_cell: Optional[int] = None) -> np.ndarray:
    """Phase at one fixed cell for every measurement, wrapped to (-pi, pi]."""
    profiles = list(profiles)
    cell = locate_cell(profiles) if target_cell is None else int(target_cell)
    L = profiles[0].r.size
    if not 0 <= cell < L:
        raise IndexError(f"cell {cell} outside profiles of length {L}")
    return wrap_phase(np.angle([p.r[cell] for p in profiles]))


def coherence_report(profiles: Sequence, target_cell: Optional[int] = None) -> CoherenceReport:
    profiles = list(profiles)
    cell = locate_cell(profiles) if target_cell is None else int(target_cell)
    values = np.array([p.r[cell] for p in profiles], dtype=np.complex128)
    return CoherenceReport(coherence_factor(values), len(values), wrap_phase(np.angle(values)), values, cell)


def _crossing(s, db, i, step, level):
    j = i
    while 0 <= j + step < db.size:
        if db[j + step] <= level:
            y0, y1 = db[j], db[j + step]
            return s[j] + (s[j + step] - s[j]) * (y0 - level) / (y0 - y1)
        j += step
    raise ValueError("no -3 dB crossing inside the cut")


def resolution_3db(cut: Profile1D, level: float = -3.0) -> float:
    """Mainlobe width between the level crossings either side of the peak."""
    db = np.asarray(cut.db, dtype=float)
    i = int(np.argmax(db))
    return float(_crossing(cut.s, db, i, 1, level) - _crossing(cut.s, db, i, -1, level))


def _parabolic(a, b, c):
    den = a - 2 * b + c
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5)) if den != 0 else 0.0


def image_peak(image: SarImage, center=None, radius: Optional[float] = None):
    """Sub-pixel argmax of |A|, optionally restricted to a disc around ``center``.

    Returns ``(point, magnitude)`` where magnitude is the pixel maximum.
    """
    g = image.grid
    mag = np.abs(image.A)
    if center is not None and radius is not None:
        pos = g.positions()
        mask = np.linalg.norm(pos - np.asarray(center, dtype=float), axis=-1) <= radius
        if not mask.any():
            raise ValueError("search disc contains no pixels")
        mag = np.where(mask, mag, -np.inf)
    i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
    m = np.abs(image.A)
    da = _parabolic(m[i - 1, j], m[i, j], m[i + 1, j]) if 0 < i < g.Nu - 1 else 0.0
    db = _parabolic(m[i, j - 1], m[i, j], m[i, j + 1]) if 0 < j < g.Nv - 1 else 0.0
    return g.point(i + da, j + db), float(m[i, j])


def peak_position_error(image: SarImage, truth, search_radius: Optional[float] = None) -> float:
    """In-plane distance between the (sub-pixel) image peak and ``truth``."""
    g = image.grid
    if not g.contains(truth):
        raise ValueError("truth lies outside the image grid")
    point, _ = image_peak(image, truth if search_radius else None, search_radius)
    d = point - np.asarray(truth, dtype=float)
    return float(np.hypot(d @ g.u_axis, d @ g.v_axis))


def peak_loss_db(image: SarImage, reference: SarImage, center, radius: float) -> float:
    """Peak magnitude near ``center`` relative to the reference image, in dB (negative = loss)."""
    _, a = image_peak(image, center, radius)
    _, b = image_peak(reference, center, radius)
    return float(20 * np.log10(a / b))


def ground_range_resolution(bandwidth: float, height: float, ground_range: float,
                            factor: float = SINC_3DB) -> float:
    """3 dB ground-range resolution of a monostatic system."""
    slant = np.hypot(height, ground_range)
    return float(factor * C0 / (2 * bandwidth) * slant / ground_range)


def aperture_angle(positions, target) -> float:
    """Angle subtended at ``target`` by the first and last aperture positions."""
    p = np.asarray(positions, dtype=float)
    a, b = p[0] - target, p[-1] - target
    c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def cross_range_resolution(wavelength: float, positions, target, factor: float = SINC_3DB) -> float:
    """3 dB cross-range resolution of a monostatic linear aperture."""
    dtheta = aperture_angle(positions, np.asarray(target, dtype=float))
    return float(factor * wavelength / (4 * np.sin(dtheta / 2)))
