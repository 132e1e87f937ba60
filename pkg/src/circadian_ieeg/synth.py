"""Seeded synthetic iEEG with a ground-truth manifest, and detection scoring.

Draw order on the single ``numpy.random.Generator`` stream:

1. per channel: background white noise, delta-band noise, alpha-band noise
2. sequences: renewal times, then per sequence its size, leader, member
   channels and lags
3. per channel and state interval: transient renewal times and their kinds
4. with ``n_spikes`` set: per placement attempt a channel, then a time
5. per rendered HFO or pHFO (by channel, then time): duration and phase
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from .dsp import hilbert_envelope
from .hfo import HfoConfig, ripple_envelope
from .model import AnnotationSet, ChannelMeta, Recording
from .spikes import SpikeConfig, spike_band

__all__ = [
    "SynthConfig",
    "TruthEvent",
    "TruthManifest",
    "generate_recording",
    "spike_template",
    "Score",
    "score_detections",
]


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 600.0
    fs: float = 1000.0
    n_channels: int = 8
    n_soz: int = 2
    start: str = "2024-01-01T00:00:00+00:00"
    channel_spacing_mm: float = 10.0
    grid_columns: int = 4
    background_rms_uv: float = 20.0
    background_exponent: float = 1.0
    state_block_s: float = 3600.0
    first_state: str = "wake"
    state_power_ratio: float = 4.0
    state_ramp_s: float = 1.0
    spike_rate_per_min: float = 6.0
    # When set, exactly this many isolated spikes are planted (uniform times,
    # random channels) instead of the rate-driven spike process.
    n_spikes: int | None = None
    soz_rate_multiplier: float = 3.0
    sleep_rate_multiplier: float = 1.0
    spike_snr: float = 5.0
    spike_width_ms: float = 60.0
    snr_window_s: float = 5.0
    hfo_rate_per_min: float = 1.0
    hfo_freq_hz: float = 120.0
    hfo_duration_ms: tuple[float, float] = (40.0, 80.0)
    hfo_snr: float = 10.0
    phfo_rate_per_min: float = 0.5
    sequence_rate_per_min: float = 0.0
    sequence_size: tuple[int, int] = (5, 7)
    sequence_lag_ms: tuple[float, float] = (5.0, 12.0)
    refractory_s: float = 0.3
    margin_s: float = 2.0
    seizures: tuple[tuple[float, float], ...] = ()
    seizure_freq_hz: float = 3.0
    seizure_amplitude: float = 10.0

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("hfo_duration_ms", "sequence_size", "sequence_lag_ms"):
            if key in d:
                d[key] = tuple(d[key])
        if "seizures" in d:
            d["seizures"] = tuple(tuple(s) for s in d["seizures"])
        return cls(**d)


@dataclass(frozen=True)
class TruthEvent:
    kind: str  # spike | hfo | phfo
    channel: str
    t_peak: float
    t_on: float
    t_off: float
    amplitude: float
    sequence_id: int = -1


@dataclass
class TruthManifest:
    seed: int
    config: dict
    fs: float
    channel_names: list[str]
    soz_channels: list[str]
    states: list[tuple[float, float, str]]
    seizures: list[tuple[float, float]]
    events: list[TruthEvent] = field(default_factory=list)
    planted: dict = field(default_factory=dict)

    def spikes(self) -> list[TruthEvent]:
        """Planted spikes, including the spike component of each pHFO."""
        return [e for e in self.events if e.kind in ("spike", "phfo")]

    def hfos(self) -> list[TruthEvent]:
        return [e for e in self.events if e.kind in ("hfo", "phfo")]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "fs": self.fs,
            "channel_names": self.channel_names,
            "soz_channels": self.soz_channels,
            "states": [list(s) for s in self.states],
            "seizures": [list(s) for s in self.seizures],
            "planted": self.planted,
            "events": [asdict(e) for e in self.events],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TruthManifest":
        return cls(
            seed=d["seed"], config=d["config"], fs=d["fs"], channel_names=d["channel_names"],
            soz_channels=d["soz_channels"], states=[tuple(s) for s in d["states"]],
            seizures=[tuple(s) for s in d["seizures"]],
            events=[TruthEvent(**e) for e in d["events"]], planted=d.get("planted", {}))

    @classmethod
    def load(cls, path) -> "TruthManifest":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def spike_template(fs: float, width_ms: float = 60.0) -> np.ndarray:
    """Biphasic raised-cosine: a full-height half followed by an inverted half-height one."""
    n = max(int(round(width_ms * 1e-3 * fs)), 4)
    half = n // 2
    t1 = np.arange(half) / half
    t2 = np.arange(n - half) / (n - half)
    return np.concatenate(((1 - np.cos(2 * np.pi * t1)) / 2,
                           -0.5 * (1 - np.cos(2 * np.pi * t2)) / 2))


def _template_response(fs: float, width_ms: float, scfg: SpikeConfig) -> tuple[float, float]:
    """Band-envelope peak of a unit template and its delay from template onset."""
    n = int(round(4.0 * fs))
    x = np.zeros(n)
    onset = n // 2
    tpl = spike_template(fs, width_ms)
    x[onset:onset + tpl.size] = tpl
    env = hilbert_envelope(spike_band(x, fs, scfg))
    k = int(np.argmax(env))
    return float(env[k]), k / scfg.fs_target - onset / fs


def _colored_noise(rng, n: int, fs: float, exponent: float) -> np.ndarray:
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1 / fs)
    scale = np.zeros_like(f)
    scale[1:] = f[1:] ** (-exponent / 2)
    x = np.fft.irfft(spec * scale, n)
    return x / x.std()


def _band_noise(white: np.ndarray, fs: float, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(white.size, 1 / fs)
    spec[(f < lo) | (f > hi)] = 0
    return np.fft.irfft(spec, white.size)


def _band_var(x: np.ndarray, fs: float, lo: float, hi: float) -> float:
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1 / fs)
    p = np.abs(spec[(f >= lo) & (f <= hi)]) ** 2
    return float(2 * p.sum() / x.size ** 2)


def _state_schedule(cfg: SynthConfig) -> list[tuple[float, float, str]]:
    states = []
    t, label = 0.0, cfg.first_state
    other = {"sleep": "wake", "wake": "sleep"}
    while t < cfg.duration_s:
        end = min(t + cfg.state_block_s, cfg.duration_s)
        states.append((t, end, label))
        t, label = end, other[label]
    return states


def _gate(n: int, fs: float, intervals, ramp_s: float) -> np.ndarray:
    g = np.zeros(n)
    t = np.arange(n) / fs
    for a, b in intervals:
        inside = np.clip(np.minimum(t - a, b - t) / max(ramp_s, 1e-12), 0, 1)
        g = np.maximum(g, 0.5 - 0.5 * np.cos(np.pi * inside))
    return g


def _renewal(rng, rate_hz: float, t0: float, t1: float, dead: float) -> list[float]:
    if rate_hz <= 0 or t1 <= t0:
        return []
    mean_gap = 1.0 / rate_hz - dead
    if mean_gap <= 0:
        raise ValueError("infeasible config: event density exceeds the refractory limit")
    out = []
    t = t0 + rng.exponential(1.0 / rate_hz)
    while t < t1:
        out.append(t)
        t += dead + rng.exponential(mean_gap)
    return out


def _channels(cfg: SynthConfig) -> tuple[ChannelMeta, ...]:
    chans = []
    for i in range(cfg.n_channels):
        row, col = divmod(i, cfg.grid_columns)
        chans.append(ChannelMeta(f"CH{i + 1:02d}",
                                 (col * cfg.channel_spacing_mm, row * cfg.channel_spacing_mm, 0.0),
                                 is_soz=i < cfg.n_soz))
    return tuple(chans)


def _validate(cfg: SynthConfig, hcfg: HfoConfig) -> None:
    if cfg.n_channels < 4:
        raise ValueError("synthetic recordings need at least 4 channels")
    if not 0 <= cfg.n_soz <= cfg.n_channels:
        raise ValueError("n_soz out of range")
    if cfg.fs < 500 or cfg.fs < 2 * hcfg.band_hz[1]:
        raise ValueError(f"infeasible config: fs {cfg.fs} below twice the ripple band maximum")
    if cfg.duration_s <= 2 * cfg.margin_s:
        raise ValueError("duration too short for the event margin")
    if cfg.first_state not in ("sleep", "wake"):
        raise ValueError("first_state must be 'sleep' or 'wake'")
    for a, b in cfg.seizures:
        if not 0 <= a < b <= cfg.duration_s:
            raise ValueError(f"seizure interval [{a}, {b}) outside recording")


def _plants_events(cfg: SynthConfig) -> bool:
    rates = (cfg.spike_rate_per_min, cfg.hfo_rate_per_min, cfg.phfo_rate_per_min,
             cfg.sequence_rate_per_min)
    return any(r > 0 for r in rates) or bool(cfg.n_spikes)


def generate_recording(cfg: SynthConfig | None = None, seed: int = 0,
                       spike_cfg: SpikeConfig | None = None, hfo_cfg: HfoConfig | None = None,
                       ) -> tuple[Recording, AnnotationSet, TruthManifest]:
    """Build a recording, its annotations and the ground-truth manifest.

    Fully determined by ``(cfg, seed)``. Spike amplitudes are set so that the
    spike-path envelope peak equals ``spike_snr`` times the RMS of the local
    background envelope; HFO amplitudes are ``hfo_snr`` times the background
    ripple-envelope SD of that channel.
    """
    cfg = cfg or SynthConfig()
    scfg = spike_cfg or SpikeConfig()
    hcfg = hfo_cfg or HfoConfig()
    _validate(cfg, hcfg)
    rng = np.random.default_rng(seed)
    fs = cfg.fs
    n = int(round(cfg.duration_s * fs))
    chans = _channels(cfg)
    names = [c.name for c in chans]
    states = _state_schedule(cfg)
    sleep_iv = [(a, b) for a, b, s in states if s == "sleep"]
    wake_iv = [(a, b) for a, b, s in states if s == "wake"]
    sleep_gate = _gate(n, fs, sleep_iv, cfg.state_ramp_s)
    wake_gate = _gate(n, fs, wake_iv, cfg.state_ramp_s)

    # 1. background and state rhythms
    data = np.empty((cfg.n_channels, n))
    for ch in range(cfg.n_channels):
        bg = _colored_noise(rng, n, fs, cfg.background_exponent)
        delta = _band_noise(rng.standard_normal(n), fs, 1.0, 4.0)
        alpha = _band_noise(rng.standard_normal(n), fs, 8.0, 13.0)
        delta *= np.sqrt(cfg.state_power_ratio * _band_var(bg, fs, 1.0, 4.0)) / delta.std()
        alpha *= np.sqrt(cfg.state_power_ratio * _band_var(bg, fs, 8.0, 13.0)) / alpha.std()
        data[ch] = cfg.background_rms_uv * (bg + sleep_gate * delta + wake_gate * alpha)
    if cfg.seizures:
        t = np.arange(n) / fs
        sz = _gate(n, fs, cfg.seizures, 0.5) * np.sin(2 * np.pi * cfg.seizure_freq_hz * t)
        data += cfg.seizure_amplitude * cfg.background_rms_uv * sz

    # per-channel amplitude references, measured on the event-free signal
    # (skipped when nothing is planted)
    unit_peak, peak_delay = _template_response(fs, cfg.spike_width_ms, scfg)
    band_env_sq: list[np.ndarray] = []
    ripple_sd: list[float] = []
    if _plants_events(cfg):
        for ch in range(cfg.n_channels):
            env = hilbert_envelope(spike_band(data[ch], fs, scfg))
            band_env_sq.append(np.concatenate(([0.0], np.cumsum(env ** 2))))
            ripple_sd.append(float(np.std(ripple_envelope(data[ch], fs, hcfg))))

    def local_rms(ch: int, t: float) -> float:
        c = band_env_sq[ch]
        m = c.size - 1
        half = cfg.snr_window_s / 2 * scfg.fs_target
        a = int(max(0, round(t * scfg.fs_target - half)))
        b = int(min(m, round(t * scfg.fs_target + half)))
        return float(np.sqrt((c[b] - c[a]) / max(b - a, 1)))

    lo_t, hi_t = cfg.margin_s, cfg.duration_s - cfg.margin_s
    forbidden = [(a - cfg.margin_s, b + cfg.margin_s) for a, b in cfg.seizures]

    def allowed(t: float) -> bool:
        return lo_t <= t <= hi_t and not any(a <= t <= b for a, b in forbidden)

    def mult(t: float, sleep_biased: bool) -> float:
        if not sleep_biased:
            return 1.0
        return cfg.sleep_rate_multiplier if any(a <= t < b for a, b in sleep_iv) else 1.0

    occupied: list[list[float]] = [[] for _ in range(cfg.n_channels)]
    events: list[TruthEvent] = []

    def spike_at(ch: int, t_peak: float, seq_id: int = -1, kind: str = "spike") -> float:
        gain = cfg.spike_snr * local_rms(ch, t_peak) / unit_peak
        onset = t_peak - peak_delay
        i0 = int(round(onset * fs))
        tpl = spike_template(fs, cfg.spike_width_ms) * gain
        data[ch, i0:i0 + tpl.size] += tpl[: max(0, min(tpl.size, n - i0))]
        occupied[ch].append(t_peak)
        if kind == "spike":
            events.append(TruthEvent("spike", names[ch], t_peak, onset,
                                     onset + tpl.size / fs, gain, seq_id))
        return gain

    def hfo_at(ch: int, center: float, duration_s: float, phase: float) -> float:
        amp = cfg.hfo_snr * ripple_sd[ch]
        sg = duration_s / (2 * np.sqrt(2 * np.log(2)))
        i0 = max(0, int(np.floor((center - 4 * sg) * fs)))
        i1 = min(n, int(np.ceil((center + 4 * sg) * fs)) + 1)
        tt = np.arange(i0, i1) / fs
        data[ch, i0:i1] += amp * np.exp(-0.5 * ((tt - center) / sg) ** 2) * np.sin(
            2 * np.pi * cfg.hfo_freq_hz * (tt - center) + phase)
        return amp

    # 2. planted propagation sequences
    soz_idx = [i for i, c in enumerate(chans) if c.is_soz] or list(range(cfg.n_channels))
    seq_events = []
    for a, b, _ in states:
        rate = cfg.sequence_rate_per_min / 60.0 * (cfg.sleep_rate_multiplier if _ == "sleep" else 1.0)
        for t0 in _renewal(rng, rate, a, b, 1.0):
            size = int(rng.integers(cfg.sequence_size[0], cfg.sequence_size[1] + 1))
            size = min(size, cfg.n_channels)
            leader = int(rng.choice(soz_idx))
            others = [i for i in range(cfg.n_channels) if i != leader]
            members = [leader] + list(rng.permutation(others)[: size - 1])
            lags = rng.uniform(cfg.sequence_lag_ms[0], cfg.sequence_lag_ms[1], size - 1) * 1e-3
            seq_events.append((t0, members, np.concatenate(([0.0], np.cumsum(lags)))))
    seq_id = 0
    for t0, members, offsets in seq_events:
        if not all(allowed(t0 + o) for o in offsets):
            continue
        for ch, o in zip(members, offsets):
            spike_at(int(ch), t0 + float(o), seq_id)
        seq_id += 1

    # 3. per-channel transients
    planned: list[tuple[int, float, str]] = []
    for ch, c in enumerate(chans):
        soz_mult = cfg.soz_rate_multiplier if c.is_soz else 1.0
        last = -np.inf
        for a, b, state in states:
            sleep_m = cfg.sleep_rate_multiplier if state == "sleep" else 1.0
            rates = np.array([cfg.spike_rate_per_min * soz_mult * sleep_m,
                              cfg.phfo_rate_per_min * soz_mult * sleep_m,
                              cfg.hfo_rate_per_min]) / 60.0
            total = rates.sum()
            # keep the refractory floor across state boundaries
            times = [t for t in _renewal(rng, total, a, b, cfg.refractory_s)
                     if t >= last + cfg.refractory_s]
            if times:
                last = times[-1]
            kinds = rng.choice(3, size=len(times), p=rates / total) if times else []
            planned.extend((ch, t, ("spike", "phfo", "hfo")[k]) for t, k in zip(times, kinds))

    if cfg.n_spikes is not None:
        planned = [p for p in planned if p[2] != "spike"]
        taken: list[list[float]] = [list(o) for o in occupied]
        for ch, t, _ in planned:
            taken[ch].append(t)
        count, attempts = 0, 0
        while count < cfg.n_spikes:
            attempts += 1
            if attempts > 1000 * (cfg.n_spikes + 1):
                raise ValueError("infeasible config: cannot place the requested spikes")
            ch = int(rng.integers(cfg.n_channels))
            t = float(rng.uniform(lo_t, hi_t))
            if not allowed(t) or any(abs(t - u) < cfg.refractory_s for u in taken[ch]):
                continue
            taken[ch].append(t)
            planned.append((ch, t, "spike"))
            count += 1
        planned.sort(key=lambda p: (p[0], p[1]))

    # 4. render transients, skipping those that collide with sequence members
    seq_occupied = [sorted(o) for o in occupied]
    for ch, t, kind in planned:
        if not allowed(t):
            continue
        if any(abs(t - s) < cfg.refractory_s for s in seq_occupied[ch]):
            continue
        if kind == "spike":
            spike_at(ch, t)
        else:
            d_lo, d_hi = cfg.hfo_duration_ms
            dur = float(rng.uniform(d_lo, d_hi)) * 1e-3
            phase = float(rng.uniform(0, 2 * np.pi))
            if kind == "phfo":
                gain = spike_at(ch, t, kind="phfo")
                hfo_at(ch, t, dur, phase)
                events.append(TruthEvent("phfo", names[ch], t, t - dur / 2, t + dur / 2, gain))
            else:
                amp = hfo_at(ch, t, dur, phase)
                events.append(TruthEvent("hfo", names[ch], t, t - dur / 2, t + dur / 2, amp))
                occupied[ch].append(t)

    events.sort(key=lambda e: (e.t_peak, e.channel, e.kind))
    rec = Recording(fs=fs, start=datetime.fromisoformat(cfg.start), channels=chans,
                    samples=data.astype(np.float32))
    soz = [c.name for c in chans if c.is_soz]
    ann = AnnotationSet(
        seizure_intervals=tuple(tuple(map(float, s)) for s in cfg.seizures),
        sleep_labels=tuple(((float(a), float(b)), s) for a, b, s in states),
        soz_channels=tuple(soz),
    )
    cfg_dict = asdict(cfg)
    manifest = TruthManifest(
        seed=int(seed), config=cfg_dict, fs=fs, channel_names=names, soz_channels=soz,
        states=[(float(a), float(b), s) for a, b, s in states],
        seizures=[tuple(map(float, s)) for s in cfg.seizures], events=events,
        planted={"soz_rate_multiplier": cfg.soz_rate_multiplier,
                 "sleep_rate_multiplier": cfg.sleep_rate_multiplier,
                 "n_sequences": seq_id})
    return rec, ann, manifest


@dataclass(frozen=True)
class Score:
    sensitivity: float
    precision: float
    matches: tuple[tuple[int, int], ...]
    n_truth: int
    n_detected: int

    @property
    def false_positives(self) -> int:
        return self.n_detected - len(self.matches)

    @property
    def misses(self) -> int:
        return self.n_truth - len(self.matches)


def score_detections(detected: Sequence, truth: Sequence | TruthManifest, tol_ms: float = 50.0,
                     key: str = "t_peak") -> Score:
    """Greedy one-to-one matching of detections to truth on the same channel.

    Candidate pairs within ``tol_ms`` are accepted closest-first. An empty
    detection list has precision 1 and an empty truth list sensitivity 1.
    """
    if isinstance(truth, TruthManifest):
        truth = truth.events
    tol = tol_ms * 1e-3 + 1e-9
    pairs = []
    by_channel: dict[str, list[int]] = {}
    for j, d in enumerate(detected):
        by_channel.setdefault(d.channel, []).append(j)
    for i, t in enumerate(truth):
        tt = getattr(t, key)
        for j in by_channel.get(t.channel, []):
            dt = abs(getattr(detected[j], key) - tt)
            if dt <= tol:
                pairs.append((dt, i, j))
    pairs.sort()
    used_t, used_d, matches = set(), set(), []
    for _, i, j in pairs:
        if i not in used_t and j not in used_d:
            used_t.add(i)
            used_d.add(j)
            matches.append((i, j))
    matches.sort()
    sens = len(matches) / len(truth) if len(truth) else 1.0
    prec = len(matches) / len(detected) if len(detected) else 1.0
    return Score(sens, prec, tuple(matches), len(truth), len(detected))
