"""Command-line entry point.

Exit codes: 0 on success, 1 when some sources/clips failed but the run
completed, 2 on configuration or validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig, load_config
from .errors import ConfigError, DialogcutError
from .manifest import (
    append_clips,
    compact_manifest,
    compute_stats,
    flag_missing_expressiveness,
    load_manifest,
    propose_hard_ids,
    select_bench,
    split_corpus,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config (TOML)")
    parser.add_argument("--seed", type=int, help="override split.seed")
    parser.add_argument("--b", type=int, help="override segmentation.b")
    parser.add_argument("--pool-size", type=int, help="override segmentation.pool_size")
    parser.add_argument("--max-workers", type=int, help="override concurrency.max_workers")


def _load(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    if args.seed is not None:
        overrides["split.seed"] = args.seed
    if args.b is not None:
        overrides["segmentation.b"] = args.b
    if args.pool_size is not None:
        overrides["segmentation.pool_size"] = args.pool_size
    if args.max_workers is not None:
        overrides["concurrency.max_workers"] = args.max_workers
    return load_config(args.config, overrides)


def _stage_exit(summary: dict) -> int:
    return EXIT_PARTIAL if summary["failed"] else EXIT_OK


def cmd_calibrate(args) -> int:
    return _stage_exit(pipeline.run_calibrate(_load(args)))


def cmd_segment(args) -> int:
    return _stage_exit(pipeline.run_segment(_load(args)))


def cmd_annotate(args) -> int:
    config = _load(args)
    summary = pipeline.run_annotate(config)
    failures = sum(
        r.get("annotation_failures", 0) for r in summary["sources"].values()
    )
    if summary["failed"]:
        return EXIT_PARTIAL
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_bench_select(args) -> int:
    config = _load(args)
    clips = flag_missing_expressiveness(load_manifest(config.paths.manifest))
    selected = select_bench(clips, config.bench.criteria())
    append_clips(config.paths.manifest, selected)
    print(json.dumps({"bench_selected": len(selected)}))
    return EXIT_OK


def cmd_split(args) -> int:
    config = _load(args)
    clips = load_manifest(config.paths.manifest)
    hard_ids: set[str] = set()
    if args.hard_ids:
        hard_ids = {
            line.strip()
            for line in Path(args.hard_ids).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
    if args.propose_hard:
        for cid in propose_hard_ids(clips, args.propose_hard):
            print(cid)
        return EXIT_OK
    # the benchmark is a subset of the hard pool by construction; never let
    # bench-labeled clips fall back into the random split
    hard_ids |= {c.id for c in clips if c.split == "bench"}
    assigned = split_corpus(
        clips,
        ratios=(config.split.train, config.split.valid, config.split.test),
        seed=config.split.seed,
        hard_ids=hard_ids,
    )
    append_clips(config.paths.manifest, assigned)
    counts: dict[str, int] = {}
    for clip in assigned:
        counts[clip.split or "none"] = counts.get(clip.split or "none", 0) + 1
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def cmd_stats(args) -> int:
    config = _load(args)
    stats = compute_stats(load_manifest(config.paths.manifest))
    print(json.dumps(stats.as_dict(), indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load(args)
    report, per_sample = pipeline.run_eval(config, args.system_outputs)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2), encoding="utf-8")
    if args.samples_out:
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            for row in per_sample:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if args.csv_out:
        flat: dict[str, object] = {}
        for key, value in report.items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    flat[f"{key}.{sub}"] = v
            else:
                flat[key] = value
        header = ",".join(flat)
        row = ",".join("" if v is None else str(v) for v in flat.values())
        Path(args.csv_out).write_text(f"{header}\n{row}\n", encoding="utf-8")
    print(json.dumps(report))
    return EXIT_OK


def cmd_simulate(args) -> int:
    result = pipeline.simulate_stride_sweep(
        sequences=args.sequences,
        lie_probability=args.lie_prob,
        b_values=args.b_values,
        m=args.pool_size if args.pool_size else 5,
        seed=args.seed if args.seed is not None else 0,
    )
    print(pipeline.format_stride_table(result))
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(result, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_review(args) -> int:
    config = _load(args)
    report_path = Path(config.paths.cache) / args.source / "calibration.json"
    if not report_path.exists():
        print(f"no calibration report for {args.source}", file=sys.stderr)
        return EXIT_CONFIG
    report = json.loads(report_path.read_text(encoding="utf-8"))
    print(json.dumps(report, indent=2))
    if args.verified or args.unverified:
        report["human_verified"] = bool(args.verified)
        report_path.write_text(json.dumps(report, indent=2), encoding="utf-8")
        print(f"human_verified set to {report['human_verified']}")
    return EXIT_OK


def cmd_compact(args) -> int:
    config = _load(args)
    kept = compact_manifest(config.paths.manifest)
    print(json.dumps({"rows": kept}))
    return EXIT_OK


def cmd_run(args) -> int:
    stages = {
        "calibrate": cmd_calibrate,
        "segment": cmd_segment,
        "annotate": cmd_annotate,
    }
    if args.stage not in stages:
        print(f"unknown stage {args.stage!r}; choose from {sorted(stages)}", file=sys.stderr)
        return EXIT_CONFIG
    return stages[args.stage](args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialogcut",
        description="Movie/TV dialogue curation pipeline and evaluation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in (
        ("calibrate", cmd_calibrate, "align raw subtitles to ASR time"),
        ("segment", cmd_segment, "detect scene ranges and split long scenes"),
        ("annotate", cmd_annotate, "attribute speakers and rate expressiveness"),
        ("bench-select", cmd_bench_select, "select the high-expressiveness benchmark"),
        ("stats", cmd_stats, "print corpus statistics"),
        ("compact", cmd_compact, "rewrite the manifest keeping latest rows"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("run", help="run one pipeline stage chosen by --stage")
    _add_common(p)
    p.add_argument("--stage", required=True, help="calibrate | segment | annotate")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("split", help="assign train/valid/test/hard splits")
    _add_common(p)
    p.add_argument("--hard-ids", help="file of clip ids for the hard split")
    p.add_argument("--propose-hard", type=int, metavar="N",
                   help="print top-N hard-split candidates and exit")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("eval", help="score system outputs into a report")
    _add_common(p)
    p.add_argument("--system-outputs", required=True, help="JSONL of per-sample outputs")
    p.add_argument("--report", required=True, help="where to write the report JSON")
    p.add_argument("--samples-out", help="optional per-sample JSONL")
    p.add_argument("--csv-out", help="optional flat CSV export")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("simulate", help="stride ablation sweep with a scripted oracle")
    p.add_argument("--sequences", type=int, default=200)
    p.add_argument("--lie-prob", type=float, default=0.1)
    p.add_argument("--b-values", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--pool-size", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", help="optional JSON output path")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("review", help="show calibration diagnostics; set human_verified")
    _add_common(p)
    p.add_argument("--source", required=True)
    p.add_argument("--verified", action="store_true")
    p.add_argument("--unverified", action="store_true")
    p.set_defaults(fn=cmd_review)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DialogcutError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
