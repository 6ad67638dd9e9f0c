"""Command line front end.

Subcommands mirror the pipeline stages: extract-obstacles,
compute-widths, stats, and run (all three in sequence). Exit codes:
0 success, 1 validation problem, 2 unreadable or malformed files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig
from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--workers", type=int, help="parallel sidewalk workers")
    parser.add_argument("--output", help="output directory override")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sidewalkwidth",
        description="Estimate full and obstacle-free sidewalk widths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-obstacles", help="detect and merge obstacle footprints")
    _add_common(p)
    p = sub.add_parser("compute-widths", help="centerlines, segments and records")
    _add_common(p)
    p = sub.add_parser("run", help="full pipeline: obstacles, widths, stats")
    _add_common(p)

    p = sub.add_parser("stats", help="aggregate a records file")
    p.add_argument("records", help="major records GeoJSON")
    p.add_argument("--output", help="output directory (default: records directory)")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    return config.with_overrides(workers=args.workers, output_dir=args.output)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "extract-obstacles":
            pipeline.extract_obstacles(_load_config(args))
        elif args.command == "compute-widths":
            pipeline.compute_widths(_load_config(args))
        elif args.command == "run":
            pipeline.run(_load_config(args))
        elif args.command == "stats":
            records = Path(args.records)
            out_dir = Path(args.output) if args.output else records.parent
            pipeline.compute_stats(records, out_dir)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
