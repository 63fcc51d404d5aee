"""Numpy implementations of the inner-loop kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``RSENF_PURE_PYTHON`` is set.  Signatures and results match the extension.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

#: Windows whose variance is below this fraction of the typical one count as flat.
_FLAT_WINDOW_RTOL = 1e-10


def demodulate_frames(samples, cycles_per_sample, block):
    """Mean of ``samples[n] * exp(-2j*pi*c*n)`` over consecutive blocks."""
    x = np.ascontiguousarray(samples, dtype=np.float64)
    n_blocks = x.size // block
    n = np.arange(n_blocks * block, dtype=np.float64)
    # reduce the phase to one cycle before scaling; keeps precision for long series
    phase = np.mod(n * cycles_per_sample, 1.0)
    z = x[: n_blocks * block] * np.exp(-2j * np.pi * phase)
    return z.reshape(n_blocks, block).mean(axis=1)


def fill_idle_gaps(frames, out_rows):
    """Extend each frame to ``out_rows`` samples.

    The gap of frame k is filled with the mean of the last kept sample of
    frames k-1 and k+1; the first and last frames use their only neighbour.
    """
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    n_frames, rows = frames.shape
    out = np.empty((n_frames, out_rows), dtype=np.float64)
    out[:, :rows] = frames
    if out_rows == rows:
        return out
    last = frames[:, rows - 1]
    fill = np.empty(n_frames, dtype=np.float64)
    fill[1:-1] = 0.5 * (last[:-2] + last[2:])
    fill[0] = last[1]
    fill[-1] = last[-2]
    out[:, rows:] = fill[:, None]
    return out


def sliding_ncc(query, reference):
    """Zero-normalised correlation of ``query`` against every full-overlap
    window of ``reference``.  Windows with zero variance give NaN."""
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    m = q.size
    q = q - q.mean()
    q_norm = np.sqrt(np.dot(q, q))
    r = r - r.mean()
    windows = sliding_window_view(r, m)
    num = windows @ q
    s1 = windows.sum(axis=1)
    s2 = np.einsum("ij,ij->i", windows, windows)
    var = s2 - s1 * s1 / m
    # running sums leave roundoff where a window is flat
    tiny = _FLAT_WINDOW_RTOL * m * max(float(np.mean(r * r)), np.finfo(float).tiny)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / (q_norm * np.sqrt(var))
    out[var <= tiny] = np.nan
    return out


def single_bin_dft(rows, cycles_per_sample):
    """``sum_n rows[i, n] * exp(-2j*pi*c*n)`` for every row ``i``."""
    x = np.ascontiguousarray(rows, dtype=np.float64)
    n = np.arange(x.shape[1], dtype=np.float64)
    basis = np.exp(-2j * np.pi * np.mod(n * cycles_per_sample, 1.0))
    return x @ basis
