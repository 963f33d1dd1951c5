"""Command-line entry: export embedding-metric scores for a dataset."""

from __future__ import annotations

import argparse
import sys

from .backends import resolve_backend
from .export import SUPPORTED_METRICS, ExportError, ExportJob, export_scores


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capexport",
        description="Export embedding-based caption metric scores "
                    "(wide CSV + meta side-file)",
    )
    parser.add_argument("--dataset", required=True, help="normalized JSONL dataset")
    parser.add_argument("--metrics", required=True,
                        help="comma-separated metric names: "
                             + ", ".join(sorted(SUPPORTED_METRICS)))
    parser.add_argument("--out", required=True)
    parser.add_argument("--backend", default="deterministic",
                        help="embedding backend name")
    parser.add_argument("--seed", type=int, default=0,
                        help="backend seed (deterministic backend only)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    metrics = tuple(m for m in args.metrics.split(",") if m)
    try:
        backend = resolve_backend(args.backend, seed=args.seed)
        job = ExportJob(
            dataset_path=args.dataset,
            metrics=metrics,
            output_path=args.out,
            device=args.device,
            batch_size=args.batch_size,
        )
        result = export_scores(job, {m: backend for m in metrics})
    except (ExportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.output_path} and {result.meta_path} "
          f"({len(result.instance_ids)} instances)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
