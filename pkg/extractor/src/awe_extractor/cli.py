"""CLI: dump per-layer hidden states of a pretrained speech model.

Layers are 1-based over transformer layers (layer k = hidden_states[k] of
the model output; the checkpoint's own layer count is recorded in each
archive's .meta.json). Exit codes: 0 success, 1 usage, 2 fatal error,
3 finished with skipped rows.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import extract_features
from .manifest import ExtractionManifest, parse_manifest_rows

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FATAL = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="awe-extract", description=__doc__)
    parser.add_argument("--model", required=True, help="hub id or local checkpoint directory")
    parser.add_argument(
        "--layers", required=True,
        help="comma-separated 1-based transformer layer indices, e.g. 1,11,15,19,23",
    )
    parser.add_argument("--manifest", required=True, help="TSV: utterance_id, audio_path[, start_s, end_s]")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--batch-size", type=int, default=1)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        layers = [int(tok) for tok in args.layers.split(",") if tok.strip()]
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    except ValueError as e:
        print(f"error: bad --layers value: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        manifest = ExtractionManifest(
            rows=parse_manifest_rows(args.manifest),
            model_id=args.model,
            layer_indices=layers,
        )
        result = extract_features(
            manifest, args.out_dir, batch_size=args.batch_size, device=args.device
        )
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL
    for path in result.archive_paths:
        print(f"wrote {path}")
    if result.skipped:
        print(f"skipped {len(result.skipped)} row(s)", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
