"""Time-of-day binning of events and circular statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DAY_S",
    "CircadianHistogram",
    "time_of_day",
    "tod_angles",
    "bin_by_time_of_day",
    "circular_stats",
    "RayleighResult",
    "rayleigh_test",
]

DAY_S = 86400.0


def time_of_day(t_s, start_tod_s: float):
    """Local seconds after midnight for recording-relative times."""
    return np.mod(np.asarray(t_s, dtype=float) + start_tod_s, DAY_S)


def tod_angles(t_s, start_tod_s: float):
    return 2 * np.pi * time_of_day(t_s, start_tod_s) / DAY_S


@dataclass
class CircadianHistogram:
    counts: np.ndarray
    exposure_min: np.ndarray
    n_channels: int
    bin_s: float = 600.0

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def tod_start_s(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_s

    @property
    def rates(self) -> np.ndarray:
        """Events per channel per analyzed minute; 0 where a bin has no exposure."""
        denom = self.exposure_min * self.n_channels
        out = np.zeros(self.n_bins)
        np.divide(self.counts, denom, out=out, where=denom > 0)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_index", "tod_start_s", "count", "rate"])
            for i, (t, c, r) in enumerate(zip(self.tod_start_s, self.counts, self.rates)):
                w.writerow([i, repr(float(t)), int(c), repr(float(r))])


def _exposure(intervals: Iterable[tuple[float, float]], start_tod_s: float, n_bins: int,
              bin_s: float) -> np.ndarray:
    exposure = np.zeros(n_bins)
    for a, b in intervals:
        t = a
        while t < b:
            tod = (t + start_tod_s) % DAY_S
            k = int(tod // bin_s) % n_bins
            step = min(b - t, (k + 1) * bin_s - tod)
            if step <= 0:  # floating point landed exactly on a boundary
                step = min(b - t, bin_s)
            exposure[k] += step
            t += step
    return exposure / 60.0


def bin_by_time_of_day(event_times: Sequence[float], start_tod_s: float,
                       analyzed_intervals: Iterable[tuple[float, float]] = (),
                       n_channels: int = 1, n_bins: int = 144) -> CircadianHistogram:
    """Count events per time-of-day bin with per-bin analyzed exposure."""
    bin_s = DAY_S / n_bins
    tod = time_of_day(event_times, start_tod_s)
    idx = np.minimum((tod // bin_s).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(int)
    exposure = _exposure(analyzed_intervals, start_tod_s, n_bins, bin_s)
    return CircadianHistogram(counts, exposure, int(n_channels), bin_s)


def circular_stats(angles) -> tuple[float, float]:
    """Mean resultant length and circular mean of ``angles`` (radians)."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise ValueError("circular statistics need at least one angle")
    c, s = np.cos(a).sum(), np.sin(a).sum()
    r = float(np.hypot(c, s) / a.size)
    return min(r, 1.0), float(np.arctan2(s, c))


@dataclass(frozen=True)
class RayleighResult:
    n: int
    R: float
    z: float
    p: float
    circular_mean_rad: float


def rayleigh_test(angles) -> RayleighResult:
    """Rayleigh test of circular uniformity.

    ``z = n R^2``; p uses the large-sample approximation
    ``exp(sqrt(1 + 4n + 4(n^2 - (nR)^2)) - (1 + 2n))`` (Zar).
    """
    a = np.asarray(angles, dtype=float)
    n = a.size
    if n < 2:
        raise ValueError("Rayleigh test needs at least 2 angles")
    r, mean = circular_stats(a)
    z = n * r ** 2
    rn = n * r
    p = float(np.exp(np.sqrt(1 + 4 * n + 4 * (n ** 2 - rn ** 2)) - (1 + 2 * n)))
    p = min(max(p, np.finfo(float).tiny), 1.0)
    return RayleighResult(n=n, R=r, z=float(z), p=p, circular_mean_rad=mean)
