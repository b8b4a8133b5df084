"""Run every study of the command-line driver with one configuration.

Usage: python scripts/run_studies.py [--config scripts/default_config.json] [--out results]
Exit code is the largest code returned by any study (0 ok, 2 some FAIL row).
"""

import argparse
import sys
import time
from pathlib import Path

from stefan_limits.cli import cli_main

HERE = Path(__file__).resolve().parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "default_config.json"))
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    runs = [["validate"], ["sector"], ["cross-check"], ["uniformity"]]
    runs += [["limit", "--limit-type", str(k)] for k in range(1, 6)]
    worst = 0
    for run in runs:
        t0 = time.perf_counter()
        code = cli_main(run + ["--config", args.config, "--out", args.out])
        print(f"{' '.join(run):<22} exit {code}  {time.perf_counter() - t0:6.1f}s", flush=True)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
