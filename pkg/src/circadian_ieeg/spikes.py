"""Interictal spike detection by log-normal modelling of the 10-60 Hz envelope."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._intervals import edge_samples, runs
from .dsp import bandpass, decimate_to, hilbert_envelope

__all__ = [
    "SpikeConfig",
    "EnvelopeModel",
    "SpikeEvent",
    "fit_envelope_model",
    "spike_threshold",
    "spike_band",
    "detect_spikes",
]


@dataclass(frozen=True)
class SpikeConfig:
    fs_target: float = 200.0
    band_hz: tuple[float, float] = (10.0, 60.0)
    filter_order: int = 8
    stopband_atten_db: float = 40.0
    k: float = 5.5
    epoch_s: float = 5.0
    refractory_ms: float = 120.0
    edge_fraction: float = 0.1
    edge_max_s: float | None = 1.0
    min_epoch_samples: int = 100


@dataclass(frozen=True)
class EnvelopeModel:
    """Log-normal fit of one epoch of envelope samples."""

    mu: float
    sigma: float
    epoch: tuple[float, float] = (0.0, 0.0)
    degenerate: bool = False

    @property
    def mode(self) -> float:
        return float(np.exp(self.mu - self.sigma ** 2))

    @property
    def median(self) -> float:
        return float(np.exp(self.mu))


@dataclass(frozen=True)
class SpikeEvent:
    channel: str
    t_peak: float
    t_on: float
    t_off: float
    peak_envelope: float
    threshold: float = 0.0


def fit_envelope_model(env, epoch: tuple[float, float] = (0.0, 0.0),
                       min_samples: int = 100, rel_tol: float = 1e-9) -> EnvelopeModel:
    """Maximum-likelihood log-normal fit: mean and SD of ``ln`` of the positive samples.

    Raises ValueError when the epoch is too short or carries no energy.
    """
    env = np.asarray(env, dtype=float)
    if env.size < min_samples:
        raise ValueError(f"epoch has {env.size} samples, need at least {min_samples}")
    pos = env[env > 0]
    if pos.size == 0:
        raise ValueError("epoch envelope is identically zero")
    logs = np.log(pos)
    mu = float(logs.mean())
    sigma = float(logs.std())
    degenerate = sigma <= rel_tol * max(1.0, abs(mu))
    if degenerate:
        sigma = 0.0
    return EnvelopeModel(mu=mu, sigma=sigma, epoch=tuple(epoch), degenerate=degenerate)


def spike_threshold(model: EnvelopeModel, k: float) -> float:
    """Detection threshold ``k * (mode + median) / 2``."""
    if not k > 0:
        raise ValueError("k must be positive")
    m = model.mode + model.median
    if m <= 0:
        raise ValueError("degenerate model with zero mode and median")
    return k * m / 2


def spike_band(x, fs: float, cfg: SpikeConfig | None = None) -> np.ndarray:
    """Resample to the spike-path rate and apply the HP->LP Chebyshev-II cascade."""
    cfg = cfg or SpikeConfig()
    y = decimate_to(x, fs, cfg.fs_target, cfg.filter_order, cfg.stopband_atten_db)
    lo, hi = cfg.band_hz
    return bandpass(y, cfg.fs_target, lo, hi, cfg.filter_order, cfg.stopband_atten_db)


def _threshold_trace(env: np.ndarray, fs: float, cfg: SpikeConfig) -> np.ndarray:
    n = env.size
    step = max(int(round(cfg.epoch_s * fs)), 1)
    bounds = list(range(0, n, step)) + [n]
    # a short tail epoch is folded into its predecessor
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < cfg.min_epoch_samples:
        del bounds[-2]
    thr = np.full(n, np.inf)
    for a, b in zip(bounds[:-1], bounds[1:]):
        try:
            model = fit_envelope_model(env[a:b], (a / fs, b / fs), cfg.min_epoch_samples)
        except ValueError:
            continue
        if model.degenerate:
            continue
        thr[a:b] = spike_threshold(model, cfg.k)
    return thr


def detect_spikes(channel_signal, fs: float, cfg: SpikeConfig | None = None,
                  channel: str = "", t_offset: float = 0.0) -> list[SpikeEvent]:
    """Detect spikes in a signal already band-limited by :func:`spike_band`.

    Events are maximal runs of envelope above the epoch threshold, merged when
    their peaks fall within the refractory window. Peaks inside the envelope
    edge region are dropped. Times are ``t_offset`` plus seconds from the
    first sample.
    """
    cfg = cfg or SpikeConfig()
    x = np.asarray(channel_signal, dtype=float)
    if x.size < cfg.min_epoch_samples:
        raise ValueError(f"signal too short for spike detection: {x.size} samples")
    if not np.any(x):
        return []
    env = hilbert_envelope(x)
    thr = _threshold_trace(env, fs, cfg)
    spans = runs(env > thr)
    if len(spans) == 0:
        return []

    refractory = cfg.refractory_ms * 1e-3 * fs
    merged: list[list[int]] = []  # [start, stop, peak_idx]
    for start, stop in spans:
        peak = start + int(np.argmax(env[start:stop]))
        if merged and peak - merged[-1][2] < refractory:
            prev = merged[-1]
            prev[1] = stop
            if env[peak] > env[prev[2]]:
                prev[2] = peak
        else:
            merged.append([start, stop, peak])

    edge = edge_samples(env.size, fs, cfg.edge_fraction, cfg.edge_max_s)
    events = []
    for start, stop, peak in merged:
        if peak < edge or peak >= env.size - edge:
            continue
        events.append(SpikeEvent(
            channel=channel,
            t_peak=t_offset + peak / fs,
            t_on=t_offset + start / fs,
            t_off=t_offset + (stop - 1) / fs,
            peak_envelope=float(env[peak]),
            threshold=float(thr[peak]),
        ))
    return events
