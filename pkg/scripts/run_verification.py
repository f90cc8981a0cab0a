#!/usr/bin/env python3
"""Run the built-in verification battery and print one line per check."""

import argparse
import json
from pathlib import Path

from tumorctrl import parse_config
from tumorctrl.verify import run_verification

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=REPO / "configs" / "default.yaml")
    ap.add_argument("--json", default=None, help="optional path for the report")
    args = ap.parse_args()

    results = run_verification(parse_config(args.config))
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: "
              f"value={r.value:.6e} threshold={r.threshold:.1e} ({r.detail})")
    if args.json:
        Path(args.json).write_text(
            json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
