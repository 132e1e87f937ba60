"""Recording data model, the ``.ieeg.json``/``.ieeg.f32`` container and
block segmentation.

A container is two files side by side: a JSON header and a raw payload of
little-endian float32 samples stored channel-major (all of channel 0, then
all of channel 1, ...).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError, FormatError

__all__ = [
    "ChannelMeta",
    "Recording",
    "AnnotationSet",
    "Block",
    "container_paths",
    "save_recording",
    "load_recording",
    "slice_blocks",
    "load_annotations",
    "save_annotations",
]

FORMAT_VERSION = 1
_HEADER_SUFFIX = ".ieeg.json"
_DATA_SUFFIX = ".ieeg.f32"
SLEEP_LABELS = ("sleep", "wake")


@dataclass(frozen=True)
class ChannelMeta:
    name: str
    coord_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    is_soz: bool = False
    is_bad: bool = False

    def __post_init__(self):
        coord = tuple(float(c) for c in self.coord_mm)
        if len(coord) != 3 or not all(np.isfinite(coord)):
            raise ValueError(f"channel {self.name!r}: coord_mm must be 3 finite values")
        object.__setattr__(self, "coord_mm", coord)


@dataclass(frozen=True, eq=False)
class Recording:
    """Multichannel recording held as a ``(n_channels, n_samples)`` array.

    ``start`` is a timezone-aware wall-clock start; event times everywhere
    else are seconds from the first sample.
    """

    fs: float
    start: datetime
    channels: tuple[ChannelMeta, ...]
    samples: np.ndarray

    def __post_init__(self):
        if not self.fs > 0:
            raise ValueError("fs must be positive")
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=timezone.utc))
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        samples = np.asarray(self.samples)
        if samples.ndim == 1 and len(channels) == 1:
            samples = samples[None, :]
        if samples.ndim != 2 or samples.shape[0] != len(channels):
            raise ValueError(
                f"samples shape {samples.shape} does not match {len(channels)} channels")
        if not np.issubdtype(samples.dtype, np.floating):
            samples = samples.astype(np.float64)
        names = [c.name for c in channels]
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique")
        samples = samples.view()  # read-only view; the caller's array keeps its flags
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    @property
    def good_mask(self) -> np.ndarray:
        return np.array([not c.is_bad for c in self.channels], dtype=bool)

    @property
    def start_tod_s(self) -> float:
        """Local time of day of the first sample, in seconds after midnight."""
        s = self.start
        return s.hour * 3600 + s.minute * 60 + s.second + s.microsecond * 1e-6

    def channel_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    def with_samples(self, samples: np.ndarray) -> "Recording":
        return replace(self, samples=samples)

    def with_channels(self, channels: Iterable[ChannelMeta]) -> "Recording":
        return replace(self, channels=tuple(channels))

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (self.fs == other.fs and self.start == other.start
                and self.channels == other.channels
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class Block:
    """Read-only window ``[t0, t1)`` of a parent recording."""

    recording: Recording = field(repr=False)
    index: int
    start_sample: int
    stop_sample: int

    @property
    def t0(self) -> float:
        return self.start_sample / self.recording.fs

    @property
    def t1(self) -> float:
        return self.stop_sample / self.recording.fs

    @property
    def duration_s(self) -> float:
        return (self.stop_sample - self.start_sample) / self.recording.fs

    @property
    def samples(self) -> np.ndarray:
        return self.recording.samples[:, self.start_sample:self.stop_sample]

    def overlaps(self, t0: float, t1: float) -> bool:
        return self.t0 < t1 and t0 < self.t1


@dataclass(frozen=True)
class AnnotationSet:
    seizure_intervals: tuple[tuple[float, float], ...] = ()
    sleep_labels: tuple[tuple[tuple[float, float], str], ...] = ()
    soz_channels: tuple[str, ...] = ()

    def __post_init__(self):
        for t0, t1 in self.seizure_intervals:
            if not t1 > t0:
                raise DataError(f"seizure interval [{t0}, {t1}): t1 <= t0")
        spans = []
        for (t0, t1), label in self.sleep_labels:
            if label not in SLEEP_LABELS:
                raise DataError(f"unknown label {label!r}")
            if not t1 > t0:
                raise DataError(f"{label} interval [{t0}, {t1}): t1 <= t0")
            spans.append((t0, t1))
        spans.sort()
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise DataError(f"sleep/wake intervals overlap at {b0}")

    def validate_within(self, duration_s: float) -> None:
        items = list(self.seizure_intervals) + [iv for iv, _ in self.sleep_labels]
        for t0, t1 in items:
            if t0 < 0 or t1 > duration_s + 1e-9:
                raise DataError(
                    f"interval [{t0}, {t1}) outside recording of {duration_s} s")

    def state_at(self, t: float) -> str | None:
        for (t0, t1), label in self.sleep_labels:
            if t0 <= t < t1:
                return label
        return None


def container_paths(path) -> tuple[Path, Path]:
    """Header and payload paths for a container given any of its names."""
    p = Path(path)
    name = p.name
    for suffix in (_HEADER_SUFFIX, _DATA_SUFFIX):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    base = p.with_name(name)
    return base.with_name(name + _HEADER_SUFFIX), base.with_name(name + _DATA_SUFFIX)


def _header(rec: Recording, data_name: str) -> dict:
    return {
        "format": "ieeg-container",
        "version": FORMAT_VERSION,
        "fs": float(rec.fs),
        "start_epoch": rec.start.isoformat(),
        "n_samples": int(rec.n_samples),
        "data_file": data_name,
        "dtype": "float32-le",
        "layout": "channel-major",
        "channels": [
            {"name": c.name, "coord_mm": list(c.coord_mm), "is_soz": bool(c.is_soz),
             "is_bad": bool(c.is_bad)}
            for c in rec.channels
        ],
    }


def save_recording(rec: Recording, path) -> tuple[Path, Path]:
    """Write ``rec`` as a container; returns ``(header_path, data_path)``."""
    if rec.n_channels == 0:
        raise DataError("no channels")
    header_path, data_path = container_paths(path)
    header = _header(rec, data_path.name)
    data = np.ascontiguousarray(rec.samples, dtype="<f4")
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    data_path.write_bytes(data.tobytes(order="C"))
    return header_path, data_path


def load_recording(path) -> Recording:
    header_path, data_path = container_paths(path)
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed header: {exc}") from exc
    try:
        fs = float(header["fs"])
        start = datetime.fromisoformat(header["start_epoch"])
        n_samples = int(header["n_samples"])
        channels = tuple(
            ChannelMeta(name=str(c["name"]), coord_mm=tuple(c.get("coord_mm", (0, 0, 0))),
                        is_soz=bool(c.get("is_soz", False)), is_bad=bool(c.get("is_bad", False)))
            for c in header["channels"])
        if header.get("data_file"):
            data_path = header_path.with_name(header["data_file"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed header: {exc}") from exc
    if not channels:
        raise FormatError("malformed header: no channels")
    if n_samples < 0 or fs <= 0:
        raise FormatError("malformed header: non-positive fs or negative length")

    raw = data_path.read_bytes()
    expected = len(channels) * n_samples * 4
    if len(raw) < expected:
        raise FormatError(
            f"truncated data: expected {expected} bytes for {len(channels)} x {n_samples}, "
            f"found {len(raw)}")
    if len(raw) != expected:
        raise FormatError(
            f"channel count/length mismatch: expected {expected} bytes, found {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f4").reshape(len(channels), n_samples).astype(np.float32)
    return Recording(fs=fs, start=start, channels=channels, samples=samples)


def slice_blocks(rec: Recording, block_s: float) -> list[Block]:
    """Tile the recording with consecutive non-overlapping blocks."""
    if not block_s > 0:
        raise ValueError("block_s must be positive")
    step = int(round(block_s * rec.fs))
    if step < 1:
        raise ValueError("block shorter than one sample")
    n = rec.n_samples
    return [Block(rec, i, start, min(start + step, n))
            for i, start in enumerate(range(0, n, step))]


def load_annotations(path, duration_s: float | None = None,
                     soz_channels: Iterable[str] = ()) -> AnnotationSet:
    """Parse a ``kind,t0_s,t1_s`` annotation CSV.

    Lines starting with ``#`` are comments; a ``# soz=A,B`` comment lists
    SOZ channels, which are merged with ``soz_channels``.
    """
    seizures, labels = [], []
    soz = list(soz_channels)
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if body.startswith("soz="):
                    soz.extend(s for s in body[4:].split(",") if s)
                continue
            lines.append(stripped)
    for row in csv.reader(lines):
        if [c.strip() for c in row] == ["kind", "t0_s", "t1_s"]:
            continue
        if len(row) != 3:
            raise FormatError(f"expected 3 columns, got {row!r}")
        kind = row[0].strip()
        try:
            t0, t1 = float(row[1]), float(row[2])
        except ValueError as exc:
            raise FormatError(f"bad number in {row!r}") from exc
        if not t1 > t0:
            raise DataError(f"t1 ≤ t0 in row {row!r}")
        if kind == "seizure":
            seizures.append((t0, t1))
        elif kind in SLEEP_LABELS:
            labels.append(((t0, t1), kind))
        else:
            raise DataError(f"unknown label {kind!r}")
    ann = AnnotationSet(tuple(seizures), tuple(labels), tuple(dict.fromkeys(soz)))
    if duration_s is not None:
        ann.validate_within(duration_s)
    return ann


def save_annotations(ann: AnnotationSet, path) -> None:
    rows = [("seizure", t0, t1) for t0, t1 in ann.seizure_intervals]
    rows += [(label, t0, t1) for (t0, t1), label in ann.sleep_labels]
    with open(path, "w", newline="") as fh:
        if ann.soz_channels:
            fh.write("# soz=" + ",".join(ann.soz_channels) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "t0_s", "t1_s"])
        for kind, t0, t1 in rows:
            w.writerow([kind, repr(float(t0)), repr(float(t1))])
