"""Two-body asymptotics: hyperbolic speed, parabolic t^(2/3) growth, and the
fixed point from infinity, in the g = 1 test mode.

    python scripts/kepler_asymptotics.py [--out runs/kepler]
"""
import argparse
from pathlib import Path

import numpy as np

from hsl.acceptance import hyperbolic_reference, hyperbolic_test_state, parabolic_test_state
from hsl.twobody import (CouplingConstants, HyperbolicTarget, ParabolicTarget, Regime,
                         derive_parabolic_constants, energy_E0, integrate,
                         integrate_from_infinity)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/kepler")
    p.add_argument("--T0", type=float, default=100.0)
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    c = CouplingConstants(1.0)
    hyp = integrate(hyperbolic_test_state(), c, 0.0, 1e4, tol=1e-12)
    hyp.to_csv(out / "hyperbolic.csv")
    E0 = energy_E0(hyperbolic_test_state(), c)
    print(f"hyperbolic: |alpha|/t = {hyp.separation()[-1] / hyp.t[-1]:.6f}, 2 sqrt(E0) = {2 * np.sqrt(E0):.6f}")

    par = integrate(parabolic_test_state(), c, 1.0, 1e5, tol=1e-12, sampling="log")
    par.to_csv(out / "parabolic.csv")
    flat = par.separation() / par.t ** (2 / 3)
    last = par.t >= 1e4
    print(f"parabolic: |alpha|/t^(2/3) over the last decade in [{flat[last].min():.5f}, {flat[last].max():.5f}]")

    c2 = CouplingConstants(1.0, 1.0, 1.0)
    T0 = args.T0
    rec = integrate_from_infinity(HyperbolicTarget(hyperbolic_reference(T0), c2, T0), c2, T0,
                                  Regime.HYPERBOLIC)
    rec.to_csv(out / "hyperbolic_from_infinity.csv")
    print(f"hyperbolic from infinity: {rec.info['iterations']} iterations, max ratio "
          f"{rec.info['max_ratio']:.3g}, deviation exponent {rec.info['exp_total']:.3f}")
    target = ParabolicTarget(derive_parabolic_constants(c2, 1.0, 2.0))
    rec = integrate_from_infinity(target, c2, T0, Regime.PARABOLIC)
    rec.to_csv(out / "parabolic_from_infinity.csv")
    print(f"parabolic from infinity: {rec.info['iterations']} iterations, max ratio "
          f"{rec.info['max_ratio']:.3g}, exponents lambda {rec.info['exp_lambda']:.3f},"
          f" beta {rec.info['exp_beta']:.3f}")


if __name__ == "__main__":
    main()
