"""Command-line interface.

Subcommands: synth, embed, eval, run, sweep, project, report.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 partial sweep
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import harness, report, samediff
from .corpus import write_alignments, write_feature_archive
from .embed import read_embedding_set, write_embedding_set
from .errors import AwepoolError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="awepool", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic corpus (archive + TSV)")
    p.add_argument("--n-types", type=int, default=20)
    p.add_argument("--tokens-per-type", type=int, default=10)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--frames-min", type=int, default=25)
    p.add_argument("--frames-max", type=int, default=50)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output base path (writes BASE.awef and BASE.tsv)")

    p = sub.add_parser("embed", help="archive + alignments + config -> embedding file")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output embedding file (.awee)")

    p = sub.add_parser("eval", help="embedding file -> same-different result JSON")
    p.add_argument("embeddings", help="embedding file (.awee)")
    p.add_argument("--out", help="result JSON path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--curves", help="also write <PREFIX>.roc.csv and <PREFIX>.pr.csv")

    p = sub.add_parser("run", help="config -> result record JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="record JSON path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", help="config with axes -> records JSONL + summary CSV")
    p.add_argument("--config", required=True, help='JSON with base fields plus an "axes" object')
    p.add_argument("--out", required=True, help="output prefix (writes PREFIX.jsonl, PREFIX.summary.csv)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--select-best", action="store_true", help="also write PREFIX.best.json")

    p = sub.add_parser("project", help="embedding file -> 2-D projection CSV")
    p.add_argument("embeddings")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("report", help="render figures from delimited outputs")
    p.add_argument("--sweep", help="sweep records JSONL")
    p.add_argument("--projection", help="projection CSV")
    p.add_argument("--roc", help="ROC curve CSV")
    p.add_argument("--pr", help="PR curve CSV")
    p.add_argument("--out-dir", required=True)
    return parser


def _cmd_synth(args) -> int:
    archive, table = harness.generate_synthetic(
        n_types=args.n_types,
        tokens_per_type=args.tokens_per_type,
        dim=args.dim,
        frames_range=(args.frames_min, args.frames_max),
        separation=args.separation,
        seed=args.seed,
    )
    base = Path(args.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    archive_path = base.with_suffix(".awef")
    tsv_path = base.with_suffix(".tsv")
    write_feature_archive(archive, archive_path, manifest=True)
    write_alignments(table, tsv_path)
    print(f"wrote {archive_path} ({len(archive)} utterances) and {tsv_path} ({len(table)} tokens)")
    return EXIT_OK


def _cmd_embed(args) -> int:
    config = harness.ExperimentConfig.from_json_file(args.config)
    embeddings = harness.build_embeddings(config)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_embedding_set(embeddings, args.out)
    print(f"wrote {args.out}: {len(embeddings)} embeddings of dim {embeddings.dim}")
    return EXIT_OK


def _write_json(payload: dict, out_path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_eval(args) -> int:
    embeddings = read_embedding_set(args.embeddings)
    result = samediff.evaluate(embeddings, workers=args.workers)
    payload = {
        "config": embeddings.meta,
        "embedding_dim": embeddings.dim,
        "n_tokens": len(embeddings),
        "n_types": len(set(embeddings.labels)),
        "result": result.to_dict(),
    }
    _write_json(payload, args.out)
    if args.curves:
        pairs = samediff.pairwise_scores(embeddings, workers=args.workers)
        prefix = Path(args.curves)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        thresholds, fpr, tpr = samediff.roc_points(pairs)
        with open(f"{prefix}.roc.csv", "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["threshold", "fpr", "tpr"])
            for row in zip(thresholds, fpr, tpr):
                writer.writerow([repr(float(v)) for v in row])
        thresholds, precision, recall = samediff.pr_points(pairs)
        with open(f"{prefix}.pr.csv", "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["threshold", "precision", "recall"])
            for row in zip(thresholds, precision, recall):
                writer.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def _cmd_run(args) -> int:
    config = harness.ExperimentConfig.from_json_file(args.config)
    record = harness.run_experiment(config, workers=args.workers)
    _write_json(record.to_dict(), args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        raw = json.load(f)
    axes = raw.pop("axes", None)
    if not axes:
        print("error: sweep config needs a non-empty 'axes' object", file=sys.stderr)
        return EXIT_USAGE
    base = harness.ExperimentConfig.from_dict(raw)
    entries = harness.sweep(base, axes, workers=args.workers)
    jsonl_path, csv_path = harness.write_sweep_outputs(entries, args.out)
    n_failed = sum(1 for e in entries if not e.ok)
    print(f"wrote {jsonl_path} and {csv_path} ({len(entries)} combinations, {n_failed} failed)")
    if args.select_best:
        best = harness.select_best(entries)
        best_path = Path(args.out).with_suffix(".best.json")
        best_path.write_text(
            json.dumps(best.record.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(
            f"best: {harness._config_label(best.config)} "
            f"AP={best.record.result.average_precision:.4f} -> {best_path}"
        )
    return EXIT_PARTIAL if n_failed else EXIT_OK


def _cmd_project(args) -> int:
    embeddings = read_embedding_set(args.embeddings)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    harness.export_projection_2d(embeddings, args.out)
    print(f"wrote {args.out} ({len(embeddings)} rows)")
    return EXIT_OK


def _cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not (args.sweep or args.projection or args.roc or args.pr):
        print("error: report needs at least one of --sweep/--projection/--roc/--pr", file=sys.stderr)
        return EXIT_USAGE
    written = []
    if args.sweep:
        written.append(report.render_sweep_figure(args.sweep, out_dir / "sweep_ap.png"))
    if args.projection:
        written.append(report.render_projection_figure(args.projection, out_dir / "projection.png"))
    if args.roc:
        written.append(report.render_roc_figure(args.roc, out_dir / "roc.png"))
    if args.pr:
        written.append(report.render_pr_figure(args.pr, out_dir / "pr.png"))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "embed": _cmd_embed,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "project": _cmd_project,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (AwepoolError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
