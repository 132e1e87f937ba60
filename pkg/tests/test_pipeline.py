import json
import logging

import numpy as np
import pytest

from circadian_ieeg.config import PipelineConfig
from circadian_ieeg.errors import ConfigError, DataError
from circadian_ieeg.events import EventRecord
from circadian_ieeg.model import AnnotationSet, Recording
from circadian_ieeg.pipeline import (BIOMARKERS, EventStore, prepare, run_detect, run_report,
                                     soz_analysis)
from circadian_ieeg.synth import SynthConfig, generate_recording

SYNTH = SynthConfig(duration_s=600.0, fs=500.0, n_channels=8, n_soz=2, state_block_s=120.0,
                    sleep_rate_multiplier=2.0, sequence_rate_per_min=1.0)


@pytest.fixture(scope="module")
def case():
    rec, ann, truth = generate_recording(SYNTH, seed=21)
    cfg = PipelineConfig()
    store = run_detect(cfg, rec, ann, recording_id="case")
    return rec, ann, truth, cfg, store


def bundle(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_store_sorted_and_typed(case):
    _, _, _, cfg, store = case
    keys = [(r.t_peak, r.channel) for r in store.records]
    assert keys == sorted(keys)
    assert {r.kind for r in store.records} <= {"spike", "hfo", "phfo", "sequence"}
    assert store.config_hash == cfg.hash and store.recording_id == "case"
    for r in store.records:
        if r.kind == "sequence":
            members = [m for m in store.records if m.kind == "spike" and m.sequence_id == r.sequence_id]
            assert len(members) == r.peak and min(m.t_peak for m in members) == r.t_peak


def test_store_round_trip_and_determinism(case, tmp_path):
    rec, ann, _, cfg, store = case
    store.save(tmp_path / "a")
    run_detect(cfg, rec, ann, recording_id="case").save(tmp_path / "b")
    assert bundle(tmp_path / "a") == bundle(tmp_path / "b")
    back = EventStore.load(tmp_path / "a")
    assert back.records == store.records and back.analyzed == store.analyzed
    lines = (tmp_path / "a" / "events.csv").read_text().splitlines()
    assert lines[0] == f"# config_hash={cfg.hash} recording=case"
    assert lines[1] == "kind,channel,t_on_s,t_peak_s,t_off_s,peak,sequence_id,pathological"


def test_threads_do_not_change_events(case):
    rec, ann, _, _, store = case
    threaded = run_detect(PipelineConfig(n_jobs=2), rec, ann, recording_id="case")
    assert threaded.records == store.records


def test_detection_recovers_planted_spikes(case):
    from circadian_ieeg.synth import score_detections
    _, _, truth, _, store = case
    score = score_detections(store.biomarker("spike"), truth.spikes(), tol_ms=50)
    assert score.sensitivity >= 0.9


def test_report_bundle(case, tmp_path):
    rec, ann, _, cfg, store = case
    summary = run_report(store, rec, ann, cfg, tmp_path / "r1")
    run_report(store, rec, ann, cfg, tmp_path / "r2")
    assert bundle(tmp_path / "r1") == bundle(tmp_path / "r2")
    files = bundle(tmp_path / "r1")
    expected = {"sleep_adr.csv", "sleep_roc.csv", "circadian_sleep_segments.csv", "rates.csv",
                "report.csv", "summary.json"} | {f"circadian_{bm}.csv" for bm in BIOMARKERS}
    assert set(files) == expected
    for name, blob in files.items():
        if name.endswith(".csv"):
            assert blob.decode().startswith(f"# config_hash={cfg.hash} ")
    assert json.loads(files["summary.json"])["config_hash"] == cfg.hash
    header = files["report.csv"].decode().splitlines()[1]
    assert header == "biomarker,group,mean,sd,stat,p"

    sw = summary["sleep_wake"]["spike"]
    assert sw["rates"]["sleep"]["rate"] > sw["rates"]["wake"]["rate"]
    assert sw["wilcoxon"]["n"] == 8 and sw["wilcoxon"]["p"] < 0.05
    assert summary["sleep"]["auc"] >= 0.9
    soz = summary["soz"]["biomarkers"]["spike"]["groups"]
    assert soz["soz"]["rate"] > soz["non-soz"]["rate"]


def test_hash_mismatch_rejected(case, tmp_path):
    rec, ann, _, _, store = case
    with pytest.raises(ConfigError):
        run_report(store, rec, ann, PipelineConfig.from_dict({"spike": {"k": 4.0}}), tmp_path)
    store.save(tmp_path / "s")
    csv_path = tmp_path / "s" / "events.csv"
    csv_path.write_text(csv_path.read_text().replace(store.config_hash, "0" * 16, 1))
    with pytest.raises(DataError):
        EventStore.load(tmp_path / "s")
    with pytest.raises(DataError):
        EventStore.load(tmp_path / "nothing")


def test_empty_store_reports_zeros(case, tmp_path, caplog):
    rec, ann, _, cfg, store = case
    empty = EventStore([], cfg.hash, "case", store.analyzed, store.good_channels,
                       store.bad_channels, store.duration_s)
    with caplog.at_level(logging.WARNING):
        summary = run_report(empty, rec, ann, cfg, tmp_path)
    assert any("empty" in r.message for r in caplog.records)
    assert all(v == 0 for v in summary["n_events"].values())
    rows = (tmp_path / "rates.csv").read_text().splitlines()[2:]
    assert rows and all(r.split(",")[3] == "0.0" for r in rows)
    assert all(v is None for v in summary["rayleigh"].values())


def test_single_time_events_fully_concentrated(case, tmp_path):
    rec, ann, _, cfg, store = case
    recs = [EventRecord(100.0, store.good_channels[i % 3], "spike", 99.99, 100.01, 1.0)
            for i in range(6)]
    one_time = EventStore(recs, cfg.hash, "case", store.analyzed, store.good_channels)
    summary = run_report(one_time, rec, ann, cfg, tmp_path, sections=("circadian",))
    assert summary["rayleigh"]["spike"]["R"] == pytest.approx(1.0)
    assert summary["rayleigh"]["hfo"] is None


def test_missing_soz_labels(case, tmp_path):
    rec, ann, _, cfg, store = case
    plain = rec.with_channels(type(c)(c.name, c.coord_mm) for c in rec.channels)
    no_soz = AnnotationSet(ann.seizure_intervals, ann.sleep_labels, ())
    with pytest.raises(DataError, match="missing SOZ"):
        soz_analysis(store, plain, cfg)
    with pytest.raises(DataError, match="missing SOZ"):
        run_report(store, plain, no_soz, cfg, tmp_path, sections=("soz",))
    with pytest.raises(ConfigError):
        run_report(store, rec, ann, cfg, tmp_path, sections=("plots",))


def test_sleep_hour_selection(case, tmp_path):
    rec, ann, _, _, _ = case
    cfg = PipelineConfig.from_dict({"soz": {"selection": "sleep-hour"}})
    store = run_detect(cfg, rec, ann, recording_id="case")
    summary = run_report(store, rec, ann, cfg, tmp_path, sections=("soz",))
    # the synthetic night starts at midnight with wake, so 2 x 120 s of sleep fall in the hour
    assert summary["soz"]["exposure_min"] == pytest.approx(4.0, abs=0.5)


def test_prepare_excludes_seizures_and_bad_channels():
    rec, ann, _ = generate_recording(SynthConfig(duration_s=120.0, fs=500.0, n_channels=5,
                                                 state_block_s=60.0, seizures=((30.0, 40.0),)), seed=3)
    x = np.array(rec.samples, dtype=float)
    x[4] *= 50
    rec = rec.with_samples(x)
    cfg = PipelineConfig(block_s=20.0)
    out, blocks = prepare(rec, cfg, ann)
    assert out.channels[4].is_bad and out.good_mask.sum() == 4
    assert all(not (b.t0 < 40.0 and b.t1 > 30.0) for b in blocks)
    assert np.allclose(np.asarray(out.samples)[:4].mean(axis=0), 0, atol=1e-3)


def test_non_finite_samples_reported_with_context():
    rec, ann, _ = generate_recording(SynthConfig(duration_s=30.0, fs=500.0, n_channels=4,
                                                 state_block_s=30.0), seed=4)
    x = np.array(rec.samples, dtype=float)
    x[:, 5000] = np.nan
    with pytest.raises(DataError, match="block 0"):
        run_detect(PipelineConfig(), rec.with_samples(x), ann)
