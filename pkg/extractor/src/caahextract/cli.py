"""Command-line front end: `caahextract --input raw.jsonl --out dataset/`.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable input
manifest or every sample undecodable), 3 encoder backend unavailable.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .encoders import BackendError
from .extract import extract
from .spec import BACKENDS, ExtractionSpec, SpecError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caahextract",
                     description="Extract CAAH embedding datasets from raw media")
    parser.add_argument("--input", required=True,
                        help="input manifest (id, video, audio, transcript per line)")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--backend", choices=list(BACKENDS), default="pretrained",
                        help="encoder backend (default: pretrained)")
    parser.add_argument("--windows", type=int, default=5,
                        help="video windows per sample (default 5)")
    parser.add_argument("--window-frames", type=int, default=16,
                        help="frames per window (default 16)")
    parser.add_argument("--seed", type=int, default=0,
                        help="window-sampling seed (default 0)")
    parser.add_argument("--plain-frames", action="store_true",
                        help="inputs are full scenes, not face crops: "
                             "center-crop to square before resizing")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        spec = ExtractionSpec(manifest=args.input, out_dir=args.out,
                              windows=args.windows, window_frames=args.window_frames,
                              seed=args.seed, backend=args.backend,
                              plain_frames=args.plain_frames)
    except SpecError as exc:
        print(f"caahextract: error: {exc}", file=sys.stderr)
        return 1
    try:
        report = extract(spec)
    except SpecError as exc:
        print(f"caahextract: error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"caahextract: error: {exc}", file=sys.stderr)
        return 3
    if not report.samples:
        print("caahextract: error: every sample was skipped; no dataset written",
              file=sys.stderr)
        return 2
    print(f"extract: wrote {len(report.samples)} samples "
          f"({len(report.skipped)} skipped) -> {spec.out_dir / 'manifest.jsonl'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
