# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backprojection accumulation (pixel-parallel)."""

from cython.parallel import prange
from libc.math cimport sqrt, cos, sin, floor, fmod

cdef double TWO_PI = 6.283185307179586
cdef double C0 = 299792458.0


def accumulate(const double[:, ::1] px,
               const double[:, ::1] tx,
               const double[:, ::1] rx,
               const double[::1] offset,
               const double[::1] weight,
               const double complex[:, ::1] profiles,
               double cells_per_second,
               double fc,
               double complex[::1] out,
               bint spreading=False,
               int num_threads=1):
    """Add every measurement's phase-corrected profile sample to each pixel.

    Each sample is scaled by ``weight[m]`` and, with ``spreading``, by the
    product of the two leg lengths. Returns the number of (pixel, measurement) pairs whose delay fell outside
    the profile.
    """
    cdef Py_ssize_t P = px.shape[0]
    cdef Py_ssize_t M = tx.shape[0]
    cdef Py_ssize_t L = profiles.shape[1]
    cdef Py_ssize_t p, m, i
    cdef double x, y, z, dx, dy, dz, r1, r2, delay, pos, fr, cyc, c, s, g
    cdef double ar, ai, vr, vi
    cdef double complex v0, v1
    cdef long missed = 0
    for p in prange(P, nogil=True, num_threads=num_threads, schedule="static"):
        x = px[p, 0]
        y = px[p, 1]
        z = px[p, 2]
        ar = 0.0
        ai = 0.0
        for m in range(M):
            dx = tx[m, 0] - x
            dy = tx[m, 1] - y
            dz = tx[m, 2] - z
            r1 = sqrt(dx * dx + dy * dy + dz * dz)
            dx = rx[m, 0] - x
            dy = rx[m, 1] - y
            dz = rx[m, 2] - z
            r2 = sqrt(dx * dx + dy * dy + dz * dz)
            delay = (r1 + r2) / C0 - offset[m]
            pos = delay * cells_per_second
            if pos < 0.0 or pos > L - 1:
                missed += 1
                continue
            i = <Py_ssize_t> floor(pos)
            if i >= L - 1:
                i = L - 2
            fr = pos - i
            v0 = profiles[m, i]
            v1 = profiles[m, i + 1]
            g = weight[m]
            if spreading:
                g = g * r1 * r2
            vr = g * (v0.real * (1.0 - fr) + v1.real * fr)
            vi = g * (v0.imag * (1.0 - fr) + v1.imag * fr)
            cyc = fmod(fc * delay, 1.0)
            c = cos(TWO_PI * cyc)
            s = sin(TWO_PI * cyc)
            ar = ar + vr * c - vi * s
            ai = ai + vr * s + vi * c
        out[p] = out[p] + (ar + 1j * ai)
    return missed
