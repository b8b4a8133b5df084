"""Observed order of the FD oracle on a manufactured single-mode solution.

Prints max errors of rho, v and rho_E for four parameter sets over four grid
levels (y and t refined together) and the ratios between successive levels;
second-order convergence shows as ratios approaching 4.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from test_fd_oracle import MMS_CASES, manufactured  # noqa: E402


def main() -> None:
    for params in MMS_CASES:
        print(f"c=({params.c_plus}, {params.c_minus}) delta={params.delta} sigma={params.sigma}")
        prev = None
        for k in range(5):
            err = manufactured(params, 1.0, 32 * 2 ** k, 16 * 2 ** k, ratio=1.08 ** (1 / 2 ** k))[:3]
            ratios = "" if prev is None else "  ratios " + " ".join(
                f"{a / b:5.2f}" if b > 1e-14 else "    -" for a, b in zip(prev, err))
            print(f"  N_y={32 * 2 ** k:4d}  " + " ".join(f"{e:.2e}" for e in err) + ratios)
            prev = err


if __name__ == "__main__":
    main()
