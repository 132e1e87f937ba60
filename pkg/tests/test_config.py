import json

import pytest
from hypothesis import given, strategies as st

from circadian_ieeg.config import PipelineConfig, load_config
from circadian_ieeg.errors import ConfigError


def test_defaults():
    cfg = load_config()
    assert cfg.spike.k == 5.5 and cfg.hfo.threshold_sd == 5.0
    assert cfg.block_s == 600.0 and cfg.circadian.n_bins == 144


def test_json_round_trip(tmp_path):
    cfg = PipelineConfig.from_dict({"spike": {"k": 4.0, "band_hz": [12, 50]},
                                    "synth": {"hfo_duration_ms": [30, 60]}, "n_jobs": 2})
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    back = load_config(path)
    assert back == cfg and back.hash == cfg.hash
    assert back.spike.band_hz == (12, 50) and isinstance(back.synth.hfo_duration_ms, tuple)


def test_partial_file_takes_defaults(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"hfo": {"threshold_sd": 4.0}}))
    cfg = load_config(path)
    assert cfg.hfo.threshold_sd == 4.0 and cfg.hfo.min_duration_ms == PipelineConfig().hfo.min_duration_ms


def test_hash_tracks_content():
    a, b = PipelineConfig(), PipelineConfig()
    assert a.hash == b.hash and len(a.hash) == 16
    assert PipelineConfig.from_dict({"spike": {"k": 5.0}}).hash != a.hash


@given(st.floats(0.5, 20), st.floats(1, 3600))
def test_hash_stable_under_round_trip(k, block):
    cfg = PipelineConfig.from_dict({"spike": {"k": k}, "block_s": block})
    assert PipelineConfig.from_dict(json.loads(cfg.to_json())).hash == cfg.hash


@pytest.mark.parametrize("d", [
    {"version": 2},
    {"block_s": 0},
    {"bogus": 1},
    {"spike": {"kk": 1}},
    {"spike": 3},
    {"hfo": {"baseline_scope": "global"}},
    {"soz": {"selection": "random"}},
    {"sleep": {"normalization": "rank"}},
    {"n_jobs": 0},
    {"phfo_window_ms": -1},
])
def test_invalid_configs(d):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(d)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)
