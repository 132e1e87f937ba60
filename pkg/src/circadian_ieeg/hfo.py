"""Ripple-band HFO detection with the Hilbert envelope detector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._intervals import edge_samples, merge_close, runs
from .dsp import bandpass, hilbert_envelope

__all__ = ["HfoConfig", "HfoEvent", "ripple_envelope", "envelope_baseline_sd", "detect_hfos"]


@dataclass(frozen=True)
class HfoConfig:
    band_hz: tuple[float, float] = (80.0, 250.0)
    filter_order: int = 8
    stopband_atten_db: float = 40.0
    threshold_sd: float = 5.0
    peak_sd: float = 5.0
    min_duration_ms: float = 10.0
    merge_gap_ms: float = 10.0
    baseline_scope: str = "per-block"
    # When set, event bounds extend outward to this lower SD multiple.
    boundary_sd: float | None = None
    edge_fraction: float = 0.1
    edge_max_s: float | None = 1.0
    min_fs: float = 500.0


@dataclass(frozen=True)
class HfoEvent:
    channel: str
    t_on: float
    t_off: float
    t_peak: float
    peak_envelope: float
    envelope_sd_used: float
    pathological: bool = False

    @property
    def duration_s(self) -> float:
        return self.t_off - self.t_on


def ripple_envelope(x, fs: float, cfg: HfoConfig | None = None) -> np.ndarray:
    cfg = cfg or HfoConfig()
    if fs < cfg.min_fs:
        raise ValueError(f"fs {fs} Hz too low for ripple-band detection (need >= {cfg.min_fs})")
    lo, hi = cfg.band_hz
    y = bandpass(x, fs, lo, hi, cfg.filter_order, cfg.stopband_atten_db)
    return hilbert_envelope(y)


def envelope_baseline_sd(env) -> float:
    """Population SD of the envelope samples in scope."""
    env = np.asarray(env, dtype=float)
    if env.size == 0:
        raise ValueError("empty envelope scope")
    return float(np.std(env))


def detect_hfos(channel_signal, fs: float, cfg: HfoConfig | None = None, channel: str = "",
                t_offset: float = 0.0, baseline_sd: float | None = None) -> list[HfoEvent]:
    """Detect ripple HFOs in a raw (native-rate) channel signal.

    ``baseline_sd`` supplies a whole-recording envelope SD; without it the SD
    of this signal's own envelope is used.
    """
    cfg = cfg or HfoConfig()
    x = np.asarray(channel_signal, dtype=float)
    if fs < cfg.min_fs:
        raise ValueError(f"fs {fs} Hz too low for ripple-band detection (need >= {cfg.min_fs})")
    if not np.any(x):
        return []
    env = ripple_envelope(x, fs, cfg)
    sd = envelope_baseline_sd(env) if baseline_sd is None else float(baseline_sd)
    if sd <= 0:
        return []

    spans = runs(env > cfg.threshold_sd * sd)
    spans = merge_close(spans, int(round(cfg.merge_gap_ms * 1e-3 * fs)))
    if cfg.boundary_sd is not None and len(spans):
        outer = runs(env > cfg.boundary_sd * sd)
        idx = np.searchsorted(outer[:, 0], spans[:, 0], side="right") - 1
        spans = np.unique(outer[idx], axis=0)

    edge = edge_samples(env.size, fs, cfg.edge_fraction, cfg.edge_max_s)
    min_len = cfg.min_duration_ms * 1e-3 * fs
    events = []
    for start, stop in spans:
        peak = start + int(np.argmax(env[start:stop]))
        if env[peak] <= cfg.peak_sd * sd or (stop - start) < min_len - 1e-9:
            continue
        if peak < edge or peak >= env.size - edge:
            continue
        events.append(HfoEvent(
            channel=channel,
            t_on=t_offset + start / fs,
            t_off=t_offset + stop / fs,
            t_peak=t_offset + peak / fs,
            peak_envelope=float(env[peak]),
            envelope_sd_used=sd,
        ))
    return events
