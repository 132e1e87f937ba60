"""Alpha/delta ratio sleep-wake classification and ROC evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .dsp import band_power_from_psd, welch_psd
from .model import Recording

__all__ = [
    "SleepConfig",
    "AdrSeries",
    "SleepCall",
    "segment_intervals",
    "compute_adr",
    "classify_sleep",
    "roc_curve",
    "auc_trapezoid",
    "roc_auc",
    "youden_threshold",
    "write_adr_csv",
    "write_roc_csv",
]

ALPHA_HZ = (8.0, 13.0)
DELTA_HZ = (1.0, 4.0)


@dataclass(frozen=True)
class SleepConfig:
    segment_s: float = 60.0
    welch_seg_s: float = 2.0
    welch_overlap: float = 0.5
    normalization: str = "minmax"
    # None selects the Youden-optimal threshold when labels are available.
    threshold: float | None = None
    adr_cap: float = 1e6
    zero_delta_rel: float = 1e-12


@dataclass
class AdrSeries:
    t0: np.ndarray
    t1: np.ndarray
    raw_adr: np.ndarray
    normalized_adr: np.ndarray
    norm_params: tuple[float, float]
    normalization: str = "minmax"

    def __len__(self):
        return len(self.raw_adr)


@dataclass(frozen=True)
class SleepCall:
    t0: float
    t1: float
    predicted: str
    threshold: float


def segment_intervals(intervals: Iterable[tuple[float, float]], segment_s: float,
                      ) -> list[tuple[float, float]]:
    """Whole ``segment_s`` pieces of each interval; remainders are dropped."""
    out = []
    for a, b in intervals:
        n = int(np.floor((b - a) / segment_s + 1e-9))
        out.extend((a + i * segment_s, a + (i + 1) * segment_s) for i in range(n))
    return out


def _normalize(raw: np.ndarray, mode: str):
    if mode == "minmax":
        lo, hi = float(raw.min()), float(raw.max())
        if hi > lo:
            return (raw - lo) / (hi - lo), (lo, hi)
        return np.zeros_like(raw), (lo, hi)
    if mode == "zscore":
        mu, sd = float(raw.mean()), float(raw.std())
        return ((raw - mu) / sd if sd > 0 else np.zeros_like(raw)), (mu, sd)
    raise ValueError(f"unknown normalization {mode!r}")


def compute_adr(rec: Recording, cfg: SleepConfig | None = None,
                intervals: Sequence[tuple[float, float]] | None = None) -> AdrSeries:
    """Channel-averaged alpha/delta power ratio per segment, then normalized.

    ``intervals`` restricts segmentation to analyzed spans (defaults to the
    whole recording). Only good channels contribute.
    """
    cfg = cfg or SleepConfig()
    good = rec.good_mask
    if not good.any():
        raise ValueError("no good channels for ADR")
    if intervals is None:
        intervals = [(0.0, rec.duration_s)]
    segs = segment_intervals(intervals, cfg.segment_s)
    if not segs:
        raise ValueError("recording shorter than one ADR segment")
    x = rec.samples[good]
    seg_len = int(round(cfg.welch_seg_s * rec.fs))
    raw = np.empty(len(segs))
    for i, (a, b) in enumerate(segs):
        sa, sb = int(round(a * rec.fs)), int(round(b * rec.fs))
        freqs, psd = welch_psd(x[:, sa:sb], rec.fs, min(seg_len, sb - sa), cfg.welch_overlap)
        alpha = band_power_from_psd(freqs, psd, *ALPHA_HZ)
        delta = band_power_from_psd(freqs, psd, *DELTA_HZ)
        total = band_power_from_psd(freqs, psd, 0.0, freqs[-1])
        ratio = np.full(alpha.shape, cfg.adr_cap)
        ok = delta >= cfg.zero_delta_rel * np.maximum(total, np.finfo(float).tiny)
        ratio[ok] = np.minimum(alpha[ok] / delta[ok], cfg.adr_cap)
        raw[i] = ratio.mean()
    norm, params = _normalize(raw, cfg.normalization)
    t0 = np.array([s[0] for s in segs])
    t1 = np.array([s[1] for s in segs])
    return AdrSeries(t0, t1, raw, norm, params, cfg.normalization)


def classify_sleep(adr: AdrSeries, threshold: float) -> list[SleepCall]:
    """Sleep where the normalized ADR is strictly below ``threshold``."""
    if adr.normalization == "minmax" and not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return [SleepCall(float(a), float(b), "sleep" if v < threshold else "wake", float(threshold))
            for a, b, v in zip(adr.t0, adr.t1, adr.normalized_adr)]


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("ROC needs both classes present")
    return s, y


def roc_curve(scores, labels):
    """ROC points ``(fpr, tpr, thresholds)`` sweeping unique scores downward.

    A sample is called positive when its score is >= the threshold; the first
    point uses ``+inf`` and sits at the origin.
    """
    s, y = _check_binary(scores, labels)
    thr = np.unique(s)[::-1]
    n_pos, n_neg = y.sum(), (1 - y).sum()
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    # last index of each distinct score in descending order
    last = np.searchsorted(-s_sorted, -thr, side="right") - 1
    tpr = np.concatenate(([0.0], tp[last] / n_pos))
    fpr = np.concatenate(([0.0], fp[last] / n_neg))
    return fpr, tpr, np.concatenate(([np.inf], thr))


def auc_trapezoid(fpr, tpr) -> float:
    fpr = np.asarray(fpr, float)
    tpr = np.asarray(tpr, float)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def roc_auc(scores, labels):
    """ROC points and the Mann-Whitney AUC (ties count one half)."""
    s, y = _check_binary(scores, labels)
    n_pos, n_neg = int(y.sum()), int((1 - y).sum())
    ranks = rankdata(s)
    auc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    return roc_curve(s, y), float(auc)


def youden_threshold(scores, labels) -> float:
    """Score threshold maximizing ``tpr - fpr`` (earliest on ties)."""
    fpr, tpr, thr = roc_curve(scores, labels)
    j = tpr - fpr
    best = int(np.argmax(j[1:])) + 1
    return float(thr[best])


def write_adr_csv(path, adr: AdrSeries, calls: Sequence[SleepCall]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t0_s", "t1_s", "raw_adr", "norm_adr", "predicted"])
        for a, b, r, n, c in zip(adr.t0, adr.t1, adr.raw_adr, adr.normalized_adr, calls):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(r)), repr(float(n)), c.predicted])


def write_roc_csv(path, fpr, tpr, thresholds) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for f, t, h in zip(fpr, tpr, thresholds):
            w.writerow([repr(float(f)), repr(float(t)), repr(float(h))])
