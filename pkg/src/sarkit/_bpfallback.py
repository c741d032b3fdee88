"""Pure-numpy twin of the compiled backprojection kernel."""

import numpy as np

C0 = 299792458.0


def accumulate(px, tx, rx, offset, weight, profiles, cells_per_second, fc, out,
               spreading=False, num_threads=1):
    P = px.shape[0]
    L = profiles.shape[1]
    missed = 0
    acc = np.zeros(P, dtype=np.complex128)
    for m in range(tx.shape[0]):
        r1 = np.sqrt(np.sum((tx[m] - px) ** 2, axis=1))
        r2 = np.sqrt(np.sum((rx[m] - px) ** 2, axis=1))
        delay = (r1 + r2) / C0 - offset[m]
        pos = delay * cells_per_second
        ok = (pos >= 0.0) & (pos <= L - 1)
        missed += int(P - np.count_nonzero(ok))
        pos_ok = pos[ok]
        i = np.minimum(np.floor(pos_ok).astype(np.int64), L - 2)
        fr = pos_ok - i
        row = profiles[m]
        g = weight[m] * (r1[ok] * r2[ok] if spreading else 1.0)
        v = g * (row[i] * (1.0 - fr) + row[i + 1] * fr)
        cyc = np.fmod(fc * delay[ok], 1.0)
        acc[ok] += v * np.exp(2j * np.pi * cyc)
    out += acc
    return missed
