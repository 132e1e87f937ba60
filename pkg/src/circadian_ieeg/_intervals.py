"""Run-length helpers for thresholded envelopes."""

from __future__ import annotations

import numpy as np


def runs(mask: np.ndarray) -> np.ndarray:
    """Half-open ``[start, stop)`` sample ranges where ``mask`` is true, shape (n, 2)."""
    m = np.asarray(mask, dtype=np.int8)
    d = np.diff(np.concatenate(([0], m, [0])))
    return np.column_stack((np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def merge_close(spans: np.ndarray, min_gap: int) -> np.ndarray:
    """Join consecutive spans separated by fewer than ``min_gap`` samples."""
    if len(spans) == 0:
        return spans.reshape(0, 2)
    out = [list(spans[0])]
    for start, stop in spans[1:]:
        if start - out[-1][1] < min_gap:
            out[-1][1] = stop
        else:
            out.append([start, stop])
    return np.asarray(out, dtype=int)


def edge_samples(n: int, fs: float, fraction: float, max_s: float | None) -> int:
    edge = int(np.floor(fraction * n))
    if max_s is not None:
        edge = min(edge, int(round(max_s * fs)))
    return edge
