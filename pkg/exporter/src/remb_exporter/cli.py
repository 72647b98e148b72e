"""Command-line front end for the embedding exporter."""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from typing import Sequence

from .export import DEFAULT_MAX_LENGTH, ExporterConfig, ExporterError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remb-export",
        description="Write frozen-transformer [CLS] vectors to a REMB embedding store.",
    )
    parser.add_argument("--model", required=True, help="model identifier or local checkpoint path")
    parser.add_argument("--corpus", required=True, help="delimited corpus file")
    parser.add_argument("--out", required=True, help="output REMB store path")
    parser.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--col-id", default="id", help="id column name")
    parser.add_argument("--col-message", default="post_message", help="message column name")
    parser.add_argument("--delimiter", default=",", help="field delimiter (',' or 'tab')")
    parser.add_argument("--name", help="encoder name stored in the header (default: model basename)")
    parser.add_argument(
        "--word-segment",
        action="store_true",
        help="pipe messages through an external word segmenter before tokenizing",
    )
    parser.add_argument(
        "--segment-cmd",
        help="segmenter command line (reads one message per stdin line, writes one per stdout line)",
    )
    parser.add_argument(
        "--on-error",
        choices=["abort", "skip"],
        default="abort",
        help="what to do when tokenization fails for a record",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    delimiter = {"tab": "\t"}.get(args.delimiter, args.delimiter)
    try:
        config = ExporterConfig(
            model=args.model,
            corpus=args.corpus,
            out=args.out,
            max_length=args.max_length,
            batch_size=args.batch_size,
            id_column=args.col_id,
            message_column=args.col_message,
            delimiter=delimiter,
            encoder_name=args.name,
            word_segment=args.word_segment,
            segment_command=shlex.split(args.segment_cmd) if args.segment_cmd else (),
            on_error=args.on_error,
        )
        summary = export(config)
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {summary.count} vectors (dim {summary.dim}, encoder {summary.encoder_name!r}, "
        f"{summary.skipped} skipped) -> {summary.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
