"""Command line entry point.

Exit codes: 0 on success, 1 when inputs were read but rejected (digest
mismatch, malformed split, unknown model, missing backend), 2 for
usage errors.  Nothing is written on a nonzero exit.
"""

from __future__ import annotations

import argparse
import sys

from .backends import BACKEND_NAMES
from .core import run_external
from .errors import AdapterError

EXIT_OK = 0
EXIT_REJECTED = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabadapt",
        description=(
            "Fit a regression backend on a table's context rows and write "
            "a prediction file for the evaluation harness to score."
        ),
    )
    parser.add_argument(
        "--model", required=True,
        help=f"backend to run ({', '.join(BACKEND_NAMES)})",
    )
    parser.add_argument("--table", required=True, help="table CSV path")
    parser.add_argument(
        "--table-manifest", required=True,
        help="table manifest JSON with the csv_sha256 digest",
    )
    parser.add_argument(
        "--split", required=True,
        help="split manifest JSON naming context and query rows",
    )
    parser.add_argument("--out", required=True, help="prediction file to write")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = run_external(
            args.model, args.table, args.table_manifest, args.split, args.out
        )
    except AdapterError as err:
        print(f"tabadapt: {err}", file=sys.stderr)
        return EXIT_REJECTED
    print(
        f"{doc['problem_id']} {doc['model']}: "
        f"{len(doc['predictions'])} predictions -> {args.out}"
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
