"""Drive the full pipeline: enumerate, calibrate, sample, analyze, oracle.

Runs every stage with one shared configuration and stops at the first
nonzero exit code.  All flags of the `sawbridge` command line pass
through unchanged, so e.g.

    python scripts/run_campaign.py --out runs/main --threads 8
    python scripts/run_campaign.py --L 9 --n 5,6 --replicas 500 --out /tmp/r

The oracle stage only runs when the smallest configured span is small
enough to enumerate exhaustively; it is skipped otherwise.
"""

from __future__ import annotations

import sys

from sawbridge.cli import ORACLE_MAX_SPAN, main


def spans_from(argv: list[str]) -> list[int]:
    for flag, value in zip(argv, argv[1:]):
        if flag == "--n":
            return [int(part) for part in value.split(",") if part]
    return []


def run(argv: list[str]) -> int:
    stages = ["enumerate", "calibrate", "sample", "analyze"]
    spans = spans_from(argv)
    if spans and min(spans) <= ORACLE_MAX_SPAN:
        stages.append("oracle")
    for stage in stages:
        print(f"== {stage} ==", flush=True)
        code = main([stage, *argv])
        if code != 0:
            print(f"{stage} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(run(sys.argv[1:]))
