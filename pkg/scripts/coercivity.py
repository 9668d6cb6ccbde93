"""Coercivity probe of the localized energy at one or more separations.

    python scripts/coercivity.py --separations 20 40 [--trials 100]
"""
import argparse
from pathlib import Path

import numpy as np

from hsl.acceptance import coercivity_layer
from hsl.diagnostics import coercivity_probe


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--separations", type=float, nargs="+", default=[20.0])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--out", default="runs/coercivity")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for sep in args.separations:
        # at least 14 decay lengths between each soliton and the faces
        L = max(48.0, 2 * sep)
        rep = coercivity_probe(coercivity_layer(sep, args.n, L), args.trials, args.seed)
        rep.to_csv(out / f"quotients_{sep:g}.csv")
        print(f"|alpha| = {sep:g} (L = {L:g}): min {rep.minimum:.4f},"
              f" median {np.median(rep.quotients):.4f}, max pairing {rep.info['max_pairing']:.1e}")


if __name__ == "__main__":
    main()
