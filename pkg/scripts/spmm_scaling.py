"""Time the sparse propagation product against the number of stored entries.

Fits log(time) = a + b log(nnz); linear cost shows up as b close to 1.

    python scripts/spmm_scaling.py --dim 16
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from test_acceptance import spmm_timings  # noqa: E402


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--min-edges", type=float, default=1e3)
    p.add_argument("--max-edges", type=float, default=1e6)
    p.add_argument("--points", type=int, default=7)
    args = p.parse_args()
    sizes = np.logspace(np.log10(args.min_edges), np.log10(args.max_edges), args.points).astype(int)
    t = spmm_timings(d=args.dim, sizes=sizes)
    print(f"{'nnz':>10} {'seconds':>12} {'ns/entry/col':>14}")
    for nnz, sec in t:
        print(f"{int(nnz):>10} {sec:>12.3e} {1e9 * sec / nnz / args.dim:>14.3f}")
    x, y = np.log(t[:, 0]), np.log(t[:, 1])
    slope, _ = np.polyfit(x, y, 1)
    print(f"log-log slope {slope:.3f}, R^2 {np.corrcoef(x, y)[0, 1] ** 2:.4f}")


if __name__ == "__main__":
    main()
