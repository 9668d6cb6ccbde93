"""Weighted residual of the order-N ansatz against separation, with fitted slopes.

    python scripts/order_scan.py [--n 128] [--out runs/order_scan]
"""
import argparse
from pathlib import Path

from hsl.ansatz import order_scan, write_scan_csv
from hsl.groundstate import default_ground_state


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--L", type=float, default=16.0)
    p.add_argument("--separations", type=float, nargs="+", default=[20, 30, 45, 67])
    p.add_argument("--out", default="runs/order_scan")
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scan = order_scan(default_ground_state(), tuple(args.separations), window_n=args.n,
                      window_L=args.L)
    write_scan_csv(scan["rows"], out / "order_scan.csv")
    for r in scan["rows"]:
        print(f"N={r.order} |alpha|={r.alpha_norm:6.1f} weighted={r.weighted_sup:.4e} L2={r.l2_norm:.4e}")
    for N, s in scan["slopes"].items():
        print(f"N={N}: slope {s:.3f} (expected {-(N + 1)})")


if __name__ == "__main__":
    main()
