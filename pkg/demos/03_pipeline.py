"""The command-line pipeline end to end: synth, detect, report."""

import json
import sys
import tempfile
from pathlib import Path

from circadian_ieeg.cli import main

work = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="circadian_"))
cfg = work / "config.json"
work.mkdir(parents=True, exist_ok=True)
cfg.write_text(json.dumps({"synth": {"duration_s": 900.0, "fs": 500.0, "n_channels": 8,
                                     "state_block_s": 150.0, "sleep_rate_multiplier": 2.0,
                                     "sequence_rate_per_min": 1.0}}, indent=2))

steps = [
    ["synth", "--config", cfg, "--out", work, "--seed", 7, "--name", "night"],
    ["detect", "--config", cfg, "--recording", work / "night.ieeg.json",
     "--annotations", work / "night.annotations.csv", "--out", work / "store"],
    ["report", "--config", cfg, "--store", work / "store", "--recording", work / "night.ieeg.json",
     "--annotations", work / "night.annotations.csv", "--out", work / "report"],
]
for argv in steps:
    code = main([str(a) for a in argv])
    print(f"{argv[0]:8s} exit {code}")
    if code:
        sys.exit(code)

summary = json.loads((work / "report" / "summary.json").read_text())
print("events:", summary["n_events"])
for bm in ("spike", "hfo"):
    sw = summary["sleep_wake"][bm]
    rates = {k: round(v["rate"], 3) for k, v in sw["rates"].items()}
    p = sw["wilcoxon"]["p"] if sw["wilcoxon"] else None
    print(f"{bm:6s} sleep/wake rates {rates}, Wilcoxon p {p}")
groups = summary["soz"]["biomarkers"]["spike"]["groups"]
print(f"spike rate SOZ {groups['soz']['rate']:.3f} vs non-SOZ {groups['non-soz']['rate']:.3f} per channel-minute")
print("bundle in", work / "report")
