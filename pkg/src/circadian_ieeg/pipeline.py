"""End-to-end orchestration: preprocessing, detection, the event store and
the report bundle."""

from __future__ import annotations

import bisect
import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .errors import ConfigError, DataError, NumericalError
from .events import EventRecord, classify_phfo, detect_sequences
from .hfo import detect_hfos, ripple_envelope
from .model import AnnotationSet, Recording, load_recording, slice_blocks
from .preprocess import apply_car, detect_bad_channels, exclude_intervals, mark_bad_channels
from .rhythm import bin_by_time_of_day, rayleigh_test, time_of_day, tod_angles, DAY_S
from .sleep import classify_sleep, compute_adr, roc_auc, youden_threshold
from .soz import (anova_oneway, event_rates_by_group, min_distance_to_soz, summarize,
                  wilcoxon_signed_rank)
from .spikes import detect_spikes, spike_band

__all__ = [
    "BIOMARKERS",
    "EventStore",
    "prepare",
    "run_detect",
    "sleep_analysis",
    "circadian_analysis",
    "soz_analysis",
    "run_report",
]

log = logging.getLogger(__name__)

BIOMARKERS = ("spike", "sequence", "hfo", "phfo")
EVENT_COLUMNS = ["kind", "channel", "t_on_s", "t_peak_s", "t_off_s", "peak", "sequence_id",
                 "pathological"]


def _f(x) -> str:
    return repr(float(x))


def _stamp(config_hash: str, recording_id: str) -> str:
    return f"# config_hash={config_hash} recording={recording_id}\n"


def _write_csv(path: Path, header: Sequence[str], rows, stamp: str) -> None:
    buf = io.StringIO()
    buf.write(stamp)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


@dataclass
class EventStore:
    """Time-sorted events of every kind plus the provenance needed to report on them."""

    records: list[EventRecord]
    config_hash: str
    recording_id: str
    analyzed: list[tuple[float, float]]
    good_channels: list[str]
    bad_channels: list[str] = field(default_factory=list)
    duration_s: float = 0.0

    def biomarker(self, name: str) -> list[EventRecord]:
        """Events counted as one biomarker.

        ``sequence`` counts the member spikes of surviving sequences and
        ``hfo`` counts every HFO, pathological or not.
        """
        if name == "spike":
            return [r for r in self.records if r.kind == "spike"]
        if name == "sequence":
            return [r for r in self.records if r.kind == "spike" and r.sequence_id >= 0]
        if name == "hfo":
            return [r for r in self.records if r.kind in ("hfo", "phfo")]
        if name == "phfo":
            return [r for r in self.records if r.kind == "phfo"]
        raise ValueError(f"unknown biomarker {name!r}")

    def check_config(self, cfg: PipelineConfig) -> None:
        if cfg.hash != self.config_hash:
            raise ConfigError(
                f"event store was built with config {self.config_hash}, not {cfg.hash}")

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [[r.kind, r.channel, _f(r.t_on), _f(r.t_peak), _f(r.t_off), _f(r.peak),
                 r.sequence_id, int(r.pathological)] for r in self.records]
        _write_csv(out / "events.csv", EVENT_COLUMNS, rows,
                   _stamp(self.config_hash, self.recording_id))
        _write_json(out / "store.json", {
            "config_hash": self.config_hash,
            "recording_id": self.recording_id,
            "analyzed": [list(iv) for iv in self.analyzed],
            "good_channels": self.good_channels,
            "bad_channels": self.bad_channels,
            "duration_s": self.duration_s,
            "n_events": len(self.records),
        })

    @classmethod
    def load(cls, store_dir) -> "EventStore":
        d = Path(store_dir)
        try:
            meta = json.loads((d / "store.json").read_text())
            lines = (d / "events.csv").read_text().splitlines()
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read event store in {d}: {exc}") from exc
        stamp = lines[0] if lines and lines[0].startswith("#") else ""
        if f"config_hash={meta['config_hash']}" not in stamp:
            raise DataError("events.csv and store.json carry different config hashes")
        records = []
        for row in csv.DictReader(l for l in lines if not l.startswith("#")):
            records.append(EventRecord(
                t_peak=float(row["t_peak_s"]), channel=row["channel"], kind=row["kind"],
                t_on=float(row["t_on_s"]), t_off=float(row["t_off_s"]), peak=float(row["peak"]),
                sequence_id=int(row["sequence_id"]), pathological=bool(int(row["pathological"]))))
        return cls(records, meta["config_hash"], meta["recording_id"],
                   [tuple(iv) for iv in meta["analyzed"]], meta["good_channels"],
                   meta.get("bad_channels", []), meta.get("duration_s", 0.0))


def _apply_soz(rec: Recording, ann: AnnotationSet | None) -> Recording:
    if ann is None or not ann.soz_channels:
        return rec
    soz = set(ann.soz_channels)
    unknown = soz - set(rec.channel_names)
    if unknown:
        raise DataError(f"SOZ channels not in recording: {sorted(unknown)}")
    return rec.with_channels(type(c)(c.name, c.coord_mm, c.name in soz, c.is_bad)
                             for c in rec.channels)


def prepare(rec: Recording, cfg: PipelineConfig, ann: AnnotationSet | None = None,
            bad_channels: Sequence[str] | None = None):
    """Bad-channel marking, CAR and seizure-block removal.

    Returns the re-referenced recording and the analyzed blocks. Passing
    ``bad_channels`` reuses an earlier verdict instead of recomputing it.
    """
    rec = _apply_soz(rec, ann)
    if ann is not None:
        ann.validate_within(rec.duration_s)
    if bad_channels is None:
        if rec.n_channels >= 3:
            rec = mark_bad_channels(rec, detect_bad_channels(rec, cfg.bad_channels))
    else:
        bad = set(bad_channels)
        rec = rec.with_channels(type(c)(c.name, c.coord_mm, c.is_soz, c.is_bad or c.name in bad)
                                for c in rec.channels)
    if rec.good_mask.sum() >= 2:
        rec = apply_car(rec)
    else:
        log.warning("fewer than 2 good channels; common average reference skipped")
    blocks = slice_blocks(rec, cfg.block_s)
    if ann is not None:
        blocks = exclude_intervals(blocks, ann)
    blocks = [b for b in blocks if b.duration_s >= cfg.min_block_s]
    return rec, blocks


def _detect_one(rec: Recording, block, ch: int, cfg: PipelineConfig, baseline_sd):
    x = np.asarray(block.samples[ch], dtype=float)
    name = rec.channels[ch].name
    where = f"block {block.index} ({block.t0:g}-{block.t1:g} s), channel {name}"
    if not np.isfinite(x).all():
        raise DataError(f"non-finite samples in {where}")
    try:
        band = spike_band(x, rec.fs, cfg.spike)
        if not np.isfinite(band).all():
            raise NumericalError(f"spike-band filter output is not finite in {where}")
        spikes = detect_spikes(band, cfg.spike.fs_target, cfg.spike, channel=name, t_offset=block.t0)
        hfos = detect_hfos(x, rec.fs, cfg.hfo, channel=name, t_offset=block.t0,
                           baseline_sd=None if baseline_sd is None else baseline_sd[ch])
    except NumericalError:
        raise
    except ValueError as exc:
        raise DataError(f"{where}: {exc}") from exc
    return spikes, hfos


def _whole_recording_sd(rec: Recording, blocks, cfg: PipelineConfig) -> dict[int, float]:
    sums: dict[int, list[float]] = {}
    for b in blocks:
        for ch in np.flatnonzero(rec.good_mask):
            env = ripple_envelope(np.asarray(b.samples[ch], float), rec.fs, cfg.hfo)
            acc = sums.setdefault(int(ch), [0.0, 0.0, 0.0])
            acc[0] += env.size
            acc[1] += env.sum()
            acc[2] += (env ** 2).sum()
    out = {}
    for ch, (n, s, s2) in sums.items():
        mean = s / n
        out[ch] = float(np.sqrt(max(s2 / n - mean ** 2, 0.0)))
    return out


def run_detect(cfg: PipelineConfig, recording, ann: AnnotationSet | None = None,
               recording_id: str | None = None) -> EventStore:
    """Run preprocessing, both detectors, sequence grouping and pHFO labelling."""
    if not isinstance(recording, Recording):
        recording_id = recording_id or Path(recording).name.replace(".ieeg.json", "")
        recording = load_recording(recording)
    recording_id = recording_id or "recording"
    rec, blocks = prepare(recording, cfg, ann)
    good = [int(i) for i in np.flatnonzero(rec.good_mask)]

    baseline = _whole_recording_sd(rec, blocks, cfg) if cfg.hfo.baseline_scope == "whole-recording" else None
    jobs = [(b, ch) for b in blocks for ch in good]
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            results = list(pool.map(lambda j: _detect_one(rec, j[0], j[1], cfg, baseline), jobs))
    else:
        results = [_detect_one(rec, b, ch, cfg, baseline) for b, ch in jobs]

    spikes = sorted((s for r in results for s in r[0]), key=lambda s: (s.t_peak, s.channel))
    hfos = sorted((h for r in results for h in r[1]), key=lambda h: (h.t_on, h.channel))
    sequences = detect_sequences(spikes, cfg.sequence)
    member_of = {}
    for seq in sequences:
        for m in seq.members:
            member_of[(m.channel, m.t_peak)] = seq.id
    labels = classify_phfo(hfos, spikes, cfg.phfo_window_ms)

    records = [EventRecord(s.t_peak, s.channel, "spike", s.t_on, s.t_off, s.peak_envelope,
                           member_of.get((s.channel, s.t_peak), -1)) for s in spikes]
    records += [EventRecord(lab.hfo.t_peak, lab.hfo.channel, "phfo" if lab.pathological else "hfo",
                            lab.hfo.t_on, lab.hfo.t_off, lab.hfo.peak_envelope, -1, lab.pathological)
                for lab in labels]
    records += [EventRecord(seq.leader.t_peak, seq.leader.channel, "sequence", seq.leader.t_peak,
                            seq.members[-1].t_peak, float(len(seq.members)), seq.id)
                for seq in sequences]
    records.sort()
    return EventStore(
        records=records, config_hash=cfg.hash, recording_id=recording_id,
        analyzed=[(b.t0, b.t1) for b in blocks],
        good_channels=[rec.channels[i].name for i in good],
        bad_channels=[c.name for c in rec.channels if c.is_bad],
        duration_s=rec.duration_s)


# -- analyses on top of a store ------------------------------------------------


@dataclass
class SleepResult:
    adr: object
    calls: list
    threshold: float
    labels: list[str | None]
    auc: float | None = None
    roc: tuple | None = None
    accuracy: float | None = None

    def state_of(self):
        starts = [c.t0 for c in self.calls]

        def lookup(t: float):
            i = bisect.bisect_right(starts, t) - 1
            if i >= 0 and self.calls[i].t0 <= t < self.calls[i].t1:
                return self.calls[i].predicted
            return None
        return lookup

    def exposure_min(self) -> dict[str, float]:
        out = {"sleep": 0.0, "wake": 0.0}
        for c in self.calls:
            out[c.predicted] += (c.t1 - c.t0) / 60.0
        return out


def sleep_analysis(rec: Recording, cfg: PipelineConfig, ann: AnnotationSet | None,
                   analyzed: Sequence[tuple[float, float]]) -> SleepResult:
    """ADR per segment, ROC against annotations and the operating threshold."""
    adr = compute_adr(rec, cfg.sleep, analyzed)
    labels = [None] * len(adr)
    if ann is not None and ann.sleep_labels:
        labels = [ann.state_at((a + b) / 2) for a, b in zip(adr.t0, adr.t1)]
    known = [i for i, lab in enumerate(labels) if lab is not None]
    y = np.array([labels[i] == "wake" for i in known], dtype=int)
    scores = adr.normalized_adr[known]
    both = len(known) > 0 and 0 < y.sum() < len(y)

    threshold = cfg.sleep.threshold
    if threshold is None:
        threshold = youden_threshold(scores, y) if both else 0.5
        if adr.normalization == "minmax":
            threshold = min(max(threshold, 0.0), 1.0)
    calls = classify_sleep(adr, threshold)
    result = SleepResult(adr, calls, float(threshold), labels)
    if both:
        result.roc, result.auc = roc_auc(scores, y)
        pred = np.array([calls[i].predicted == "wake" for i in known], dtype=int)
        result.accuracy = float(np.mean(pred == y))
    return result


def circadian_analysis(store: EventStore, start_tod_s: float, n_bins: int = 144) -> dict:
    out = {}
    n_ch = max(len(store.good_channels), 1)
    for bm in BIOMARKERS:
        times = [e.t_peak for e in store.biomarker(bm)]
        hist = bin_by_time_of_day(times, start_tod_s, store.analyzed, n_ch, n_bins)
        ray = rayleigh_test(tod_angles(times, start_tod_s)) if len(times) >= 2 else None
        out[bm] = (hist, ray)
    return out


def _window_intervals(store: EventStore, start_tod_s: float, cfg: PipelineConfig, sleep: SleepResult):
    """Predicted-sleep time within the configured window after the first local midnight."""
    first = (cfg.soz.window_start_tod_s - start_tod_s) % DAY_S
    w0, w1 = first, first + cfg.soz.window_s
    out = []
    for c in sleep.calls:
        if c.predicted != "sleep":
            continue
        a, b = max(c.t0, w0), min(c.t1, w1)
        if b > a:
            out.append((a, b))
    return out


def soz_analysis(store: EventStore, rec: Recording, cfg: PipelineConfig,
                 sleep: SleepResult | None = None) -> dict:
    """Per-biomarker SOZ vs non-SOZ rates with ANOVA, and distances to the SOZ."""
    channels = [c for c in rec.channels if c.name in set(store.good_channels)]
    if not any(c.is_soz for c in rec.channels):
        raise DataError("missing SOZ labels")
    if cfg.soz.selection == "sleep-hour":
        if sleep is None:
            raise ConfigError("sleep-hour selection needs a sleep analysis")
        windows = _window_intervals(store, rec.start_tod_s, cfg, sleep)
    else:
        windows = list(store.analyzed)
    exposure = sum(b - a for a, b in windows) / 60.0

    def inside(t):
        return any(a <= t < b for a, b in windows)

    rates, distances = {}, {}
    for bm in BIOMARKERS:
        evs = [e for e in store.biomarker(bm) if inside(e.t_peak)]
        entry = {"table": None, "anova": None}
        if exposure > 0:
            table = event_rates_by_group(evs, channels, "soz", exposure)
            entry["table"] = table
            groups = [list(r.channel_rates.values()) for r in table.rows]
            try:
                entry["anova"] = anova_oneway(groups) if len(groups) == 2 else None
            except ValueError as exc:
                log.warning("SOZ ANOVA for %s skipped: %s", bm, exc)
        rates[bm] = entry
        d = [r.min_euclid_mm for r in min_distance_to_soz(store.biomarker(bm), rec.channels)]
        distances[bm] = d
    groups = [distances[bm] for bm in BIOMARKERS if len(distances[bm]) >= 2]
    dist_anova = None
    if len(groups) >= 2:
        try:
            dist_anova = anova_oneway(groups)
        except ValueError as exc:
            log.warning("distance ANOVA skipped: %s", exc)
    return {"rates": rates, "distances": distances, "distance_anova": dist_anova,
            "exposure_min": exposure}


def _anova_dict(a):
    return None if a is None else {"F": a.F, "df1": a.df1, "df2": a.df2, "p": a.p}


SECTIONS = ("sleep", "circadian", "soz")


def run_report(store: EventStore, recording: Recording, ann: AnnotationSet | None,
               cfg: PipelineConfig, out_dir, sections: Sequence[str] = SECTIONS) -> dict:
    """Write the report bundle (CSVs plus ``summary.json``) and return the summary.

    ``sections`` picks any of ``sleep`` (ADR, ROC, sleep/wake rates),
    ``circadian`` (histograms, Rayleigh) and ``soz`` (rates, distances).
    """
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown report sections {sorted(unknown)}")
    store.check_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(store.config_hash, store.recording_id)
    if not store.records:
        log.warning("event store is empty; report tables will be all zero")
    rec, _ = prepare(recording, cfg, ann, bad_channels=store.bad_channels)
    summary: dict = {"config_hash": store.config_hash, "recording_id": store.recording_id,
                     "sections": list(sections),
                     "n_events": {bm: len(store.biomarker(bm)) for bm in BIOMARKERS}}
    report_rows: list = []
    rate_rows: list = []
    need_sleep = "sleep" in sections or ("soz" in sections and cfg.soz.selection == "sleep-hour")
    sleep = sleep_analysis(rec, cfg, ann, store.analyzed) if need_sleep else None
    if "sleep" in sections:
        summary["sleep"], summary["sleep_wake"] = _sleep_section(
            store, rec, sleep, out, stamp, cfg, report_rows, rate_rows)
    if "circadian" in sections:
        summary["rayleigh"] = _circadian_section(store, rec, out, stamp, cfg)
    if "soz" in sections:
        summary["soz"] = _soz_section(soz_analysis(store, rec, cfg, sleep), report_rows, rate_rows)
    _write_csv(out / "rates.csv", ["biomarker", "grouping", "group", "rate", "mean", "sd", "count",
                                   "exposure_min", "n_channels"], rate_rows, stamp)
    _write_csv(out / "report.csv", ["biomarker", "group", "mean", "sd", "stat", "p"], report_rows, stamp)
    _write_json(out / "summary.json", summary)
    return _jsonable(summary)


def _sleep_section(store, rec, sleep: SleepResult, out: Path, stamp: str, cfg: PipelineConfig,
                   report_rows: list, rate_rows: list):
    adr = sleep.adr
    _write_csv(out / "sleep_adr.csv", ["t0_s", "t1_s", "raw_adr", "norm_adr", "predicted"],
               [[_f(a), _f(b), _f(r), _f(nv), c.predicted]
                for a, b, r, nv, c in zip(adr.t0, adr.t1, adr.raw_adr, adr.normalized_adr, sleep.calls)],
               stamp)
    roc_rows = []
    if sleep.roc is not None:
        roc_rows = [[_f(a), _f(b), _f(c)] for a, b, c in zip(*sleep.roc)]
    _write_csv(out / "sleep_roc.csv", ["fpr", "tpr", "threshold"], roc_rows, stamp)

    seg_mid = [(c.t0 + c.t1) / 2 for c in sleep.calls if c.predicted == "sleep"]
    seg_hist = bin_by_time_of_day(seg_mid, rec.start_tod_s, (), 1, cfg.circadian.n_bins)
    _write_csv(out / "circadian_sleep_segments.csv", ["bin_index", "tod_start_s", "count"],
               [[i, _f(t), int(c)] for i, (t, c) in enumerate(zip(seg_hist.tod_start_s, seg_hist.counts))],
               stamp)
    info = {"threshold": sleep.threshold, "auc": sleep.auc, "accuracy": sleep.accuracy,
            "n_segments": len(adr), "exposure_min": sleep.exposure_min()}

    exposure = sleep.exposure_min()
    states = {s: m for s, m in exposure.items() if m > 0}
    state_of = sleep.state_of()
    channels = [c for c in rec.channels if c.name in set(store.good_channels)]
    sleep_wake = {}
    for bm in BIOMARKERS:
        entry: dict = {"rates": {}, "wilcoxon": None}
        if states:
            table = event_rates_by_group(store.biomarker(bm), channels, "sleep-state", states, state_of)
            for row in table.rows:
                entry["rates"][row.group] = {"rate": row.rate, "mean": row.mean, "sd": row.sd,
                                             "count": row.event_count, "exposure_min": row.exposure_min}
                rate_rows.append([bm, "state", row.group, _f(row.rate), _f(row.mean), _f(row.sd),
                                  row.event_count, _f(row.exposure_min), row.n_channels])
            if "sleep" in states and "wake" in states:
                s, w = table["sleep"].channel_rates, table["wake"].channel_rates
                try:
                    res = wilcoxon_signed_rank([s[c] for c in s], [w[c] for c in s])
                    entry["wilcoxon"] = {"W": res.W, "n": res.n, "p": res.p, "exact": res.exact}
                except ValueError as exc:
                    entry["wilcoxon_skipped"] = str(exc)
        stat = entry["wilcoxon"]
        for g in ("sleep", "wake"):
            r = entry["rates"].get(g)
            report_rows.append([bm, g, _f(r["mean"] if r else 0.0), _f(r["sd"] if r else 0.0),
                                _f(stat["W"]) if stat else "", _f(stat["p"]) if stat else ""])
        sleep_wake[bm] = entry
    return info, sleep_wake


def _circadian_section(store, rec, out: Path, stamp: str, cfg: PipelineConfig) -> dict:
    rayleigh = {}
    for bm, (hist, ray) in circadian_analysis(store, rec.start_tod_s, cfg.circadian.n_bins).items():
        _write_csv(out / f"circadian_{bm}.csv", ["bin_index", "tod_start_s", "count", "rate"],
                   [[i, _f(t), int(c), _f(r)] for i, (t, c, r)
                    in enumerate(zip(hist.tod_start_s, hist.counts, hist.rates))], stamp)
        rayleigh[bm] = None if ray is None else {
            "n": ray.n, "R": ray.R, "z": ray.z, "p": ray.p, "circular_mean_rad": ray.circular_mean_rad}
    return rayleigh


def _soz_section(soz: dict, report_rows: list, rate_rows: list) -> dict:
    da = soz["distance_anova"]
    info = {"exposure_min": soz["exposure_min"], "distance_anova": _anova_dict(da), "biomarkers": {}}
    for bm in BIOMARKERS:
        entry = soz["rates"][bm]
        an = entry["anova"]
        groups = {}
        if entry["table"] is not None:
            for row in entry["table"].rows:
                groups[row.group] = {"rate": row.rate, "mean": row.mean, "sd": row.sd,
                                     "count": row.event_count}
                rate_rows.append([bm, "soz", row.group, _f(row.rate), _f(row.mean), _f(row.sd),
                                  row.event_count, _f(row.exposure_min), row.n_channels])
                report_rows.append([bm, row.group, _f(row.mean), _f(row.sd),
                                    _f(an.F) if an else "", _f(an.p) if an else ""])
        dmean, dsd = summarize(soz["distances"][bm])
        report_rows.append([bm, "distance_mm", _f(dmean), _f(dsd),
                            _f(da.F) if da else "", _f(da.p) if da else ""])
        info["biomarkers"][bm] = {"groups": groups, "anova": _anova_dict(an),
                                  "distance_mean_mm": dmean, "distance_sd_mm": dsd,
                                  "n_distances": len(soz["distances"][bm])}
    return info
