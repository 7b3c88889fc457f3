"""Command-line front end: one subcommand-free invocation per export job."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .exporter import TEXT_MODES, ExportJob, export


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="docground-export",
        description="Export pooled vision/text embeddings for a QA corpus to an EMB1 file.",
    )
    ap.add_argument("--corpus", required=True, type=Path, help="corpus .jsonl path")
    ap.add_argument("--backbone", required=True, help="model hub id or local checkpoint dir")
    ap.add_argument("--out", required=True, type=Path, help="output .emb path")
    ap.add_argument("--text-mode", choices=TEXT_MODES, default="question_plus_answer")
    ap.add_argument("--batch-size", type=int, default=8)
    ap.add_argument("--device", default="cpu")
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        job = ExportJob(
            corpus=args.corpus,
            backbone=args.backbone,
            out=args.out,
            text_mode=args.text_mode,
            batch_size=args.batch_size,
            device=args.device,
        )
        result = export(job)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(
        f"wrote {result.n_records} records (Dv={result.dv}, Dt={result.dt}) "
        f"to {result.out}"
    )
    if result.exclusions:
        print(f"skipped {len(result.exclusions)} qa(s): {', '.join(result.exclusions)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
