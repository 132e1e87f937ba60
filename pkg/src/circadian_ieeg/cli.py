"""Command-line entry point.

Subcommands::

    synth      write a synthetic recording, its annotations and truth manifest
    detect     run both detectors and write the event store
    sleep      ADR classification, ROC and sleep/wake rate tables
    circadian  time-of-day histograms and Rayleigh tests
    soz        SOZ vs non-SOZ rates and distances to the SOZ
    report     every section above in one bundle

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError
from .model import load_annotations, load_recording, save_annotations, save_recording
from .pipeline import EventStore, run_detect, run_report
from .synth import generate_recording

log = logging.getLogger("circadian_ieeg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "n_jobs", None):
        cfg = dataclasses.replace(cfg, n_jobs=args.n_jobs)
    return cfg


def _annotations(args, duration_s: float):
    if not args.annotations:
        return None
    return load_annotations(args.annotations, duration_s)


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec, ann, manifest = generate_recording(cfg.synth, args.seed, cfg.spike, cfg.hfo)
    name = args.name
    save_recording(rec, out / name)
    save_annotations(ann, out / f"{name}.annotations.csv")
    (out / f"{name}.truth.json").write_text(manifest.to_json())
    log.info("wrote %s (%d channels, %.0f s, %d planted events)", out / name,
             rec.n_channels, rec.duration_s, len(manifest.events))
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    rec = load_recording(args.recording)
    ann = _annotations(args, rec.duration_s)
    rec_id = Path(args.recording).name.replace(".ieeg.json", "")
    store = run_detect(cfg, rec, ann, recording_id=rec_id)
    store.save(args.out)
    log.info("wrote %d events to %s", len(store.records), args.out)
    return EXIT_OK


def _report(sections):
    def run(args) -> int:
        cfg = _config(args)
        store = EventStore.load(args.store)
        rec = load_recording(args.recording)
        ann = _annotations(args, rec.duration_s)
        run_report(store, rec, ann, cfg, args.out, sections)
        log.info("wrote report to %s", args.out)
        return EXIT_OK
    return run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="circadian-ieeg", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (defaults when omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("synth", help="generate a synthetic recording")
    common(sp)
    sp.add_argument("--name", default="synth", help="file stem of the outputs")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("detect", help="detect events and write the event store")
    common(sp)
    sp.add_argument("--recording", required=True, help="path to <name>.ieeg.json")
    sp.add_argument("--annotations", help="annotation CSV (seizures, sleep labels, SOZ)")
    sp.add_argument("--n-jobs", type=int, default=None)
    sp.set_defaults(func=cmd_detect)

    for name, sections, text in (("sleep", ("sleep",), "sleep/wake classification"),
                                 ("circadian", ("circadian",), "time-of-day histograms"),
                                 ("soz", ("soz",), "SOZ rate and distance tables"),
                                 ("report", ("sleep", "circadian", "soz"), "full report bundle")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--store", required=True, help="directory written by detect")
        sp.add_argument("--recording", required=True)
        sp.add_argument("--annotations")
        sp.set_defaults(func=_report(sections))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
