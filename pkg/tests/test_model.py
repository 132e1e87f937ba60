from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circadian_ieeg.errors import DataError, FormatError
from circadian_ieeg.model import (AnnotationSet, ChannelMeta, Recording, container_paths,
                                  load_annotations, load_recording, save_annotations,
                                  save_recording, slice_blocks)
from circadian_ieeg.synth import SynthConfig, generate_recording

START = datetime(2024, 3, 1, 22, 30, tzinfo=timezone(timedelta(hours=-5)))


def make_rec(n_ch=2, n=100, fs=100.0, seed=0):
    x = np.random.default_rng(seed).standard_normal((n_ch, n)).astype(np.float32)
    chans = tuple(ChannelMeta(f"C{i}", (i, 2.0 * i, 0.5), is_soz=i == 0) for i in range(n_ch))
    return Recording(fs, START, chans, x)


def test_round_trip_is_bit_exact(tmp_path):
    rec = make_rec()
    save_recording(rec, tmp_path / "r")
    back = load_recording(tmp_path / "r.ieeg.json")
    assert back == rec
    assert back.samples.tobytes() == rec.samples.tobytes()
    assert back.start.utcoffset() == timedelta(hours=-5)


def test_header_declaring_more_channels_is_truncated(tmp_path):
    import json
    rec = make_rec(n_ch=2)
    hdr, _ = save_recording(rec, tmp_path / "r")
    h = json.loads(hdr.read_text())
    h["channels"].append({"name": "C2", "coord_mm": [0, 0, 0], "is_soz": False})
    hdr.write_text(json.dumps(h))
    with pytest.raises(FormatError, match="truncated data"):
        load_recording(hdr)


def test_extra_payload_is_a_length_mismatch(tmp_path):
    rec = make_rec()
    _, data = save_recording(rec, tmp_path / "r")
    data.write_bytes(data.read_bytes() + b"\0\0\0\0")
    with pytest.raises(FormatError, match="mismatch"):
        load_recording(tmp_path / "r")


def test_malformed_header(tmp_path):
    rec = make_rec()
    hdr, _ = save_recording(rec, tmp_path / "r")
    hdr.write_text("{not json")
    with pytest.raises(FormatError, match="malformed header"):
        load_recording(hdr)
    hdr.write_text('{"fs": 100}')
    with pytest.raises(FormatError, match="malformed header"):
        load_recording(hdr)


def test_generator_output_loads_with_matching_metadata(tmp_path):
    cfg = SynthConfig(duration_s=30, n_channels=4, spike_rate_per_min=0, hfo_rate_per_min=0,
                      phfo_rate_per_min=0)
    rec, _, manifest = generate_recording(cfg, seed=42)
    save_recording(rec, tmp_path / "g")
    back = load_recording(tmp_path / "g")
    assert back.fs == manifest.fs
    assert back.channel_names == manifest.channel_names


def test_no_channels_rejected(tmp_path):
    rec = Recording(100.0, START, (), np.zeros((0, 10), np.float32))
    with pytest.raises(DataError, match="no channels"):
        save_recording(rec, tmp_path / "e")


def test_zero_recording_payload_is_zero_words(tmp_path):
    rec = Recording(100.0, START, (ChannelMeta("A"),), np.zeros((1, 64), np.float32))
    _, data = save_recording(rec, tmp_path / "z")
    raw = data.read_bytes()
    assert len(raw) == 64 * 4 and raw == b"\0" * 256


def test_save_load_save_is_byte_identical(tmp_path):
    rec = make_rec(n_ch=5, n=333, seed=3)
    h1, d1 = save_recording(rec, tmp_path / "a")
    h2, d2 = save_recording(load_recording(h1), tmp_path / "b")
    assert d1.read_bytes() == d2.read_bytes()
    assert h1.read_text().replace("a.ieeg.f32", "b.ieeg.f32") == h2.read_text()


def test_payload_is_little_endian_channel_major(tmp_path):
    x = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], np.float32)
    rec = Recording(10.0, START, (ChannelMeta("A"), ChannelMeta("B")), x)
    _, data = save_recording(rec, tmp_path / "o")
    assert np.array_equal(np.frombuffer(data.read_bytes(), "<f4"), [1, 2, 3, 4, 5, 6])


def test_container_paths_accept_any_name(tmp_path):
    a = container_paths(tmp_path / "x")
    assert container_paths(tmp_path / "x.ieeg.json") == a
    assert container_paths(tmp_path / "x.ieeg.f32") == a


@given(st.integers(1, 6), st.integers(1, 300), st.sampled_from([100.0, 256.0, 1000.0]),
       st.integers(0, 10_000))
def test_round_trip_property(tmp_path_factory, n_ch, n, fs, seed):
    rec = make_rec(n_ch, n, fs, seed)
    p = tmp_path_factory.mktemp("rt") / "r"
    save_recording(rec, p)
    assert load_recording(p) == rec


def test_recording_invariants():
    with pytest.raises(ValueError):
        Recording(0.0, START, (ChannelMeta("A"),), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        Recording(1.0, START, (ChannelMeta("A"), ChannelMeta("A")), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        Recording(1.0, START, (ChannelMeta("A"),), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        ChannelMeta("A", (0.0, np.nan, 0.0))
    rec = make_rec(n=250, fs=100.0)
    assert rec.duration_s == 2.5
    assert rec.start_tod_s == 22.5 * 3600


def test_samples_read_only_without_touching_caller():
    x = np.zeros((1, 10))
    rec = Recording(10.0, START, (ChannelMeta("A"),), x)
    assert x.flags.writeable
    with pytest.raises(ValueError):
        rec.samples[0, 0] = 1.0


# -- blocks ------------------------------------------------------------------------

def _rec_minutes(minutes, fs=10.0):
    return Recording(fs, START, (ChannelMeta("A"),), np.zeros((1, int(minutes * 60 * fs)), np.float32))


@pytest.mark.parametrize("minutes, expected", [(60, [600.0] * 6), (25, [600.0, 600.0, 300.0]),
                                               (5, [300.0])])
def test_block_tiling(minutes, expected):
    blocks = slice_blocks(_rec_minutes(minutes), 600.0)
    assert [b.duration_s for b in blocks] == expected
    assert [b.index for b in blocks] == list(range(len(expected)))


@given(st.integers(1, 5000), st.floats(0.1, 100.0))
def test_blocks_cover_recording(n, block_s):
    rec = Recording(10.0, START, (ChannelMeta("A"),), np.arange(n, dtype=np.float32)[None])
    blocks = slice_blocks(rec, block_s)
    assert sum(b.stop_sample - b.start_sample for b in blocks) == n
    assert blocks[0].start_sample == 0
    assert all(b.stop_sample == c.start_sample for b, c in zip(blocks, blocks[1:]))
    for b in blocks:
        assert np.array_equal(b.samples, rec.samples[:, b.start_sample:b.stop_sample])
    step = int(round(block_s * 10.0))
    assert all(b.stop_sample - b.start_sample == step for b in blocks[:-1])


# -- annotations -------------------------------------------------------------------

def test_annotation_parse(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("# soz=C0,C1\nkind,t0_s,t1_s\nseizure,100.0,160.0\nsleep,200,300\nwake,300,400\n")
    ann = load_annotations(p, duration_s=500)
    assert ann.seizure_intervals == ((100.0, 160.0),)
    assert ann.sleep_labels == (((200.0, 300.0), "sleep"), ((300.0, 400.0), "wake"))
    assert ann.soz_channels == ("C0", "C1")
    assert ann.state_at(250) == "sleep" and ann.state_at(300) == "wake" and ann.state_at(50) is None


@pytest.mark.parametrize("row, msg", [("sleep,160.0,100.0", "t1 ≤ t0"), ("nap,1,2", "unknown label")])
def test_annotation_errors(tmp_path, row, msg):
    p = tmp_path / "a.csv"
    p.write_text(f"kind,t0_s,t1_s\n{row}\n")
    with pytest.raises(DataError, match=msg):
        load_annotations(p)


def test_annotation_outside_recording(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("seizure,100,700\n")
    with pytest.raises(DataError, match="outside"):
        load_annotations(p, duration_s=600)


def test_overlapping_sleep_labels_rejected():
    with pytest.raises(DataError, match="overlap"):
        AnnotationSet(sleep_labels=(((0, 10), "sleep"), ((5, 20), "wake")))


def test_generator_annotations_match_manifest(tmp_path):
    cfg = SynthConfig(duration_s=400, n_channels=4, state_block_s=100, seizures=((150.0, 170.0),),
                      spike_rate_per_min=0, hfo_rate_per_min=0, phfo_rate_per_min=0)
    _, ann, manifest = generate_recording(cfg, seed=5)
    save_annotations(ann, tmp_path / "a.csv")
    back = load_annotations(tmp_path / "a.csv", duration_s=400)
    assert back == ann
    assert [(a, b, s) for (a, b), s in back.sleep_labels] == [tuple(s) for s in manifest.states]
    assert [tuple(s) for s in back.seizure_intervals] == [tuple(s) for s in manifest.seizures]
    assert set(back.soz_channels) == set(manifest.soz_channels)
