"""Spike sequences, pathological-HFO labelling and the unified event record."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .hfo import HfoEvent
from .spikes import SpikeEvent

__all__ = [
    "SequenceConfig",
    "SpikeSequence",
    "PhfoLabel",
    "EventRecord",
    "detect_sequences",
    "classify_phfo",
    "EVENT_KINDS",
]

EVENT_KINDS = ("spike", "hfo", "phfo", "sequence")
_EPS = 1e-9


@dataclass(frozen=True)
class SequenceConfig:
    leader_window_ms: float = 50.0
    chain_window_ms: float = 15.0
    min_members: int = 5
    artifact_gap_ms: float = 2.0
    artifact_fraction: float = 0.55
    distinct_channels: bool = False


@dataclass(frozen=True)
class SpikeSequence:
    id: int
    members: tuple[SpikeEvent, ...]

    @property
    def leader(self) -> SpikeEvent:
        return self.members[0]

    @property
    def channels(self) -> frozenset[str]:
        return frozenset(m.channel for m in self.members)

    @property
    def span_ms(self) -> float:
        return (self.members[-1].t_peak - self.members[0].t_peak) * 1e3


@dataclass(frozen=True)
class PhfoLabel:
    hfo: HfoEvent
    pathological: bool
    spike: SpikeEvent | None = None


@dataclass(frozen=True, order=True)
class EventRecord:
    """One row of the unified event table.

    ``sequence_id`` is -1 for spikes outside any sequence and for HFOs.
    """

    t_peak: float
    channel: str
    kind: str = field(compare=True)
    t_on: float = field(default=0.0, compare=False)
    t_off: float = field(default=0.0, compare=False)
    peak: float = field(default=0.0, compare=False)
    sequence_id: int = field(default=-1, compare=False)
    pathological: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


def _is_artifact(times: Sequence[float], cfg: SequenceConfig) -> bool:
    gap = cfg.artifact_gap_ms * 1e-3 + _EPS
    close = sum(1 for a, b in zip(times, times[1:]) if b - a <= gap)
    return close / len(times) >= cfg.artifact_fraction


def detect_sequences(spikes: Sequence[SpikeEvent], cfg: SequenceConfig | None = None,
                     ) -> list[SpikeSequence]:
    """Greedy leader-first grouping of spikes into propagation sequences.

    The earliest unassigned spike leads; each later unassigned spike joins
    while it lies within the leader window of the leader or the chain window
    of the previous member. Every spike scanned into a chain is consumed,
    whether or not the chain survives the size and artifact filters.
    """
    cfg = cfg or SequenceConfig()
    times = [s.t_peak for s in spikes]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("spikes must be sorted by t_peak")
    lead_w = cfg.leader_window_ms * 1e-3 + _EPS
    chain_w = cfg.chain_window_ms * 1e-3 + _EPS

    assigned = [False] * len(spikes)
    out: list[SpikeSequence] = []
    i = 0
    while i < len(spikes):
        if assigned[i]:
            i += 1
            continue
        assigned[i] = True
        members = [i]
        used_channels = {spikes[i].channel}
        for j in range(i + 1, len(spikes)):
            if assigned[j]:
                continue
            t = times[j]
            if not (t - times[i] <= lead_w or t - times[members[-1]] <= chain_w):
                break
            if cfg.distinct_channels and spikes[j].channel in used_channels:
                continue
            assigned[j] = True
            members.append(j)
            used_channels.add(spikes[j].channel)
        if len(members) >= cfg.min_members and not _is_artifact([times[m] for m in members], cfg):
            out.append(SpikeSequence(len(out), tuple(spikes[m] for m in members)))
        i += 1
    return out


def classify_phfo(hfos: Iterable[HfoEvent], spikes: Iterable[SpikeEvent],
                  spike_window_ms: float = 60.0) -> list[PhfoLabel]:
    """Label each HFO pathological when it overlaps a same-channel spike window.

    The spike window is ``t_peak ± spike_window_ms / 2``; the witnessing spike
    is the one whose peak is nearest the HFO midpoint.
    """
    if spike_window_ms < 0:
        raise ValueError("spike window must be non-negative")
    half = spike_window_ms * 1e-3 / 2
    by_channel: dict[str, list[float]] = {}
    spike_at: dict[tuple[str, float], SpikeEvent] = {}
    for s in spikes:
        by_channel.setdefault(s.channel, []).append(s.t_peak)
        spike_at.setdefault((s.channel, s.t_peak), s)
    for peaks in by_channel.values():
        peaks.sort()

    labels = []
    for h in hfos:
        peaks = by_channel.get(h.channel, [])
        lo = bisect.bisect_left(peaks, h.t_on - half - _EPS)
        hi = bisect.bisect_right(peaks, h.t_off + half + _EPS)
        if lo < hi:
            mid = (h.t_on + h.t_off) / 2
            best = min(peaks[lo:hi], key=lambda t: (abs(t - mid), t))
            labels.append(PhfoLabel(h, True, spike_at[(h.channel, best)]))
        else:
            labels.append(PhfoLabel(h, False, None))
    return labels
