"""Command-line entry point: ``fungispike {spikes,metrics,dct,synth,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .config import format_kv
from .errors import FungiSpikeError
from .ingest import write_recording
from .report import PipelineConfig, load_config, run_dct, run_pipeline
from .synth import load_spec, spec_to_kv, synthesize

log = logging.getLogger("fungispike")


def _pipeline_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--input", help="recording CSV")
    p.add_argument("--trigger-s", type=float, help="trigger time in seconds from the first sample")
    p.add_argument("--chunks", help="comma-separated chunk sizes in hours (default 1,2,4,8,16)")
    p.add_argument("--zstar", type=float, help="prominence threshold multiplier (default 2.576)")
    p.add_argument("--min-dist", type=int, help="minimum samples between spikes (default 120)")
    p.add_argument("--threshold-mode", choices=["ci", "sd"], help="ci: mean + z*sd/sqrt(N); sd: mean + z*sd")
    p.add_argument("--window", type=int, help="centreline moving-mean window in samples (default 601)")
    p.add_argument("--no-preprocess", action="store_true", help="skip the second-difference step")
    p.add_argument("--bins", type=int, help="histogram bins for entropies (default 256)")
    p.add_argument("--shuffles", type=int, help="PCIpK shuffles (default 20)")
    p.add_argument("--seed", type=int, help="seed for PCIpK shuffles (default 0)")
    p.add_argument("--out", help="output directory")


def _overrides(args) -> dict:
    out = {
        "input": args.input,
        "trigger_s": args.trigger_s,
        "chunks": args.chunks,
        "z_star": args.zstar,
        "min_dist": args.min_dist,
        "threshold_mode": args.threshold_mode,
        "window": args.window,
        "bins": args.bins,
        "shuffles": args.shuffles,
        "seed": args.seed,
        "out": args.out,
    }
    if args.no_preprocess:
        out["preprocess"] = False
    for key in ("image", "rois"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    return out


def cmd_pipeline(args, with_metrics: bool) -> int:
    config = load_config(args.config, _overrides(args))
    report = run_pipeline(config, with_metrics=with_metrics)
    for path in report.files:
        print(path)
    return 0


def cmd_dct(args) -> int:
    rois = tuple(tuple(int(v) for v in r.split(",")) for r in args.roi) if args.roi else None
    config = PipelineConfig(
        image=args.image,
        rois=rois,
        convert_gray=args.convert_gray,
        band_method=args.band_method,
        hi_q=args.hi_q,
        lo_q=args.lo_q,
        out=args.out,
    )
    report = run_dct(config)
    for path in report.files:
        print(path)
    return 0


def cmd_synth(args) -> int:
    spec = load_spec(args.spec)
    rec, truth = synthesize(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_recording(rec, out)
    truth_path = out.with_name(out.stem + "_truth.csv")
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "onset_index", "peak_index", "offset_index", "peak_time_s"])
        for g in truth:
            w.writerow([g.channel + 1, g.onset_index, g.peak_index, g.offset_index, f"{g.peak_time_s:.3f}"])
    out.with_name(out.stem + "_spec.txt").write_text(format_kv(spec_to_kv(spec)), encoding="utf-8")
    print(out)
    print(truth_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fungispike", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spikes", help="detect spikes and write spikes_chN.csv")
    _pipeline_args(p)
    p.set_defaults(func=lambda a: cmd_pipeline(a, with_metrics=False))

    p = sub.add_parser("metrics", help="detect spikes and compute the metrics table")
    _pipeline_args(p)
    p.set_defaults(func=lambda a: cmd_pipeline(a, with_metrics=True))

    p = sub.add_parser("report", help="full pipeline including plots and optional CT analysis")
    _pipeline_args(p)
    p.add_argument("--image", help="grayscale PGM/PNG for the DCT analysis")
    p.add_argument("--rois", help="regions as row,col,height,width;... (default: quarters)")
    p.set_defaults(func=lambda a: cmd_pipeline(a, with_metrics=True))

    p = sub.add_parser("dct", help="DCT energy-band comparison of image regions")
    p.add_argument("--image", required=True)
    p.add_argument("--roi", action="append", help="row,col,height,width (repeatable; default: quarters)")
    p.add_argument("--convert-gray", action="store_true")
    p.add_argument("--band-method", choices=["quantile", "zigzag"], default="quantile")
    p.add_argument("--hi-q", type=float, default=0.90)
    p.add_argument("--lo-q", type=float, default=0.50)
    p.add_argument("--out", default="dct_out")
    p.set_defaults(func=cmd_dct)

    p = sub.add_parser("synth", help="generate a synthetic recording from a key = value spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (FungiSpikeError, OSError, ValueError) as exc:
        print(f"fungispike: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
