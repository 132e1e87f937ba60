"""Bad-channel screening, common average reference and seizure-block removal."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dsp import band_power_from_psd, welch_psd
from .model import AnnotationSet, Block, Recording

__all__ = [
    "BadChannelThresholds",
    "BadChannelReport",
    "robust_z",
    "detect_bad_channels",
    "mark_bad_channels",
    "apply_car",
    "car_array",
    "exclude_intervals",
]

MAD_SCALE = 1.4826


@dataclass(frozen=True)
class BadChannelThresholds:
    median_z: float = 3.0
    var_z: float = 3.0
    std_z: float = 3.0
    line_ratio: float = 0.25
    line_band_hz: tuple[float, float] = (58.0, 62.0)
    # Floor on the robust spread, as a fraction of the cross-channel median
    # (variance, SD) or of the median channel SD (median offset).
    rel_spread_floor: float = 0.1


@dataclass
class BadChannelReport:
    channels: list[str]
    median_z: np.ndarray
    var_z: np.ndarray
    line_ratio: np.ndarray
    std_z: np.ndarray
    thresholds: BadChannelThresholds = field(default_factory=BadChannelThresholds)

    @property
    def verdict(self) -> np.ndarray:
        th = self.thresholds
        return ((np.abs(self.median_z) > th.median_z) | (self.var_z > th.var_z)
                | (self.std_z > th.std_z) | (self.line_ratio > th.line_ratio))

    @property
    def bad_channels(self) -> list[str]:
        return [c for c, bad in zip(self.channels, self.verdict) if bad]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["channel", "median_z", "var_z", "line_ratio", "std_z", "bad"])
            for row in zip(self.channels, self.median_z, self.var_z, self.line_ratio,
                           self.std_z, self.verdict):
                w.writerow([row[0], *(repr(float(v)) for v in row[1:5]), int(row[5])])


def robust_z(values, floor: float = 0.0) -> np.ndarray:
    """``(v - median) / (1.4826 * MAD)`` with the spread bounded below by ``floor``."""
    v = np.asarray(values, dtype=float)
    med = np.median(v)
    spread = max(MAD_SCALE * np.median(np.abs(v - med)), floor)
    dev = v - med
    if spread == 0:
        return np.where(dev == 0, 0.0, np.copysign(np.inf, dev))
    return dev / spread


def detect_bad_channels(rec: Recording, thresholds: BadChannelThresholds | None = None,
                        ) -> BadChannelReport:
    """Screen channels for baseline offset, variance, 60 Hz contamination and SD."""
    th = thresholds or BadChannelThresholds()
    if rec.n_channels < 3:
        raise ValueError("bad-channel detection needs at least 3 channels")
    x = np.asarray(rec.samples, dtype=float)
    medians = np.median(x, axis=1)
    variances = np.var(x, axis=1)
    sds = np.sqrt(variances)

    median_z = robust_z(medians, th.rel_spread_floor * np.median(sds))
    var_z = robust_z(variances, th.rel_spread_floor * np.median(variances))
    std_z = robust_z(sds, th.rel_spread_floor * np.median(sds))

    lo, hi = th.line_band_hz
    if hi < rec.fs / 2:
        seg = min(int(round(2.0 * rec.fs)), rec.n_samples)
        freqs, psd = welch_psd(x - medians[:, None], rec.fs, seg)
        total = band_power_from_psd(freqs, psd, 0.0, freqs[-1])
        line = band_power_from_psd(freqs, psd, lo, hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            line_ratio = np.where(total > 0, line / total, 0.0)
    else:
        line_ratio = np.zeros(rec.n_channels)
    return BadChannelReport(rec.channel_names, median_z, var_z, line_ratio, std_z, th)


def mark_bad_channels(rec: Recording, report: BadChannelReport) -> Recording:
    bad = set(report.bad_channels)
    return rec.with_channels(
        type(c)(c.name, c.coord_mm, c.is_soz, c.is_bad or c.name in bad) for c in rec.channels)


def car_array(x: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Subtract the per-sample mean of the ``good`` rows from those rows."""
    x = np.asarray(x, dtype=float)
    good = np.asarray(good, dtype=bool)
    if good.sum() < 2:
        raise ValueError("common average reference needs at least 2 good channels")
    out = x.copy()
    out[good] -= x[good].mean(axis=0, keepdims=True)
    return out


def apply_car(rec: Recording) -> Recording:
    """Common average reference over good channels; bad channels pass through."""
    return rec.with_samples(car_array(rec.samples, rec.good_mask))


def exclude_intervals(blocks: list[Block], ann: AnnotationSet) -> list[Block]:
    """Drop every block that overlaps a seizure interval."""
    return [b for b in blocks
            if not any(b.overlaps(t0, t1) for t0, t1 in ann.seizure_intervals)]
