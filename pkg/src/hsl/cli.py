"""Command-line entry point: ``hsl <subcommand> [--config c.json] [--out dir]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, dump_config, load_config, preset

log = logging.getLogger("hsl")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER = 0, 1, 2


@dataclass
class RunManifest:
    subcommand: str
    config: str | None
    out: str
    seed: int
    version: str

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _couplings(mode: str):
    from .groundstate import default_ground_state
    from .linops import build_corrections
    from .twobody import CouplingConstants

    cs = build_corrections(default_ground_state())
    return CouplingConstants.from_corrections(cs, test_mode=(mode == "test"))


# --- subcommands ----------------------------------------------------------------

def cli_groundstate(cfg, out: Path, seed: int) -> int:
    from .groundstate import GroundStateError, pohozaev_report, solve_ground_state
    from .linops import build_corrections
    from .radial import RadialGrid

    try:
        gs = solve_ground_state(RadialGrid(cfg.r_max, cfg.m), cfg.tol, cfg.max_iter)
    except GroundStateError as exc:
        print(f"ground state solver failed: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    gs.export(out)
    report = pohozaev_report(gs)
    _write_json(out / "pohozaev.json", report)
    if cfg.corrections:
        build_corrections(gs).export(out)
    print(f"Q(0) = {gs.Q.values[0]:.10f}  mass = {gs.mass:.10f}  g = {gs.g:.10f}"
          f"  residual = {gs.residual:.2e}")
    return EXIT_OK if gs.residual <= cfg.tol else EXIT_SOLVER


def cli_twobody(cfg, out: Path, seed: int) -> int:
    from .twobody import (HyperbolicTarget, ParabolicTarget, Regime, classify,
                          derive_parabolic_constants, energy_E0, integrate,
                          integrate_from_infinity)

    c = _couplings(cfg.g_mode)
    if not cfg.refined:
        c = type(c)(c.g)
    summary = {"g": c.g, "m2_const": c.m2_const, "b2_const": c.b2_const}
    if cfg.mode == "forward":
        rec = integrate(cfg.state, c, cfg.t0, cfg.t1, tol=cfg.tol, refined=cfg.refined,
                        n_samples=cfg.n_samples, sampling=cfg.sampling)
        E0 = energy_E0(cfg.state, c)
        a_end = float(np.linalg.norm(rec.alpha()[-1]))
        summary.update({"E0": E0, "regime": classify(cfg.state, c).value,
                        "E0_drift": float(np.ptp(rec.E0) / max(abs(E0), 1e-300)),
                        "alpha_final": a_end, "t_final": float(rec.t[-1])})
        if E0 > 0:
            summary["alpha_over_t"] = a_end / (rec.t[-1] - rec.t[0])
            summary["two_sqrt_E0"] = 2 * np.sqrt(E0)
        print(f"{summary['regime']}: E0 = {E0:.6g}, |alpha(t1)| = {a_end:.6g}")
    else:
        regime = Regime(cfg.regime)
        if regime is Regime.HYPERBOLIC:
            if cfg.state is None:
                raise ValueError("hyperbolic integration from infinity needs a reference state")
            target = HyperbolicTarget(cfg.state, c, cfg.T0)
        else:
            target = ParabolicTarget(derive_parabolic_constants(c, cfg.lambda_inf, cfg.a0))
        rec = integrate_from_infinity(target, c, cfg.T0, regime, refined=cfg.refined,
                                      tol=max(cfg.tol, 1e-12))
        keep = ("iterations", "max_ratio", "exp_alpha", "exp_beta", "exp_lambda", "exp_total")
        summary.update({k: rec.info[k] for k in keep})
        print(f"{regime.value} from infinity: {rec.info['iterations']} iterations,"
              f" max ratio {rec.info['max_ratio']:.3g}")
    rec.to_csv(out / "trajectory.csv")
    _write_json(out / "summary.json", summary)
    return EXIT_OK


def cli_ansatz(cfg, out: Path, seed: int) -> int:
    from .ansatz import SolitonProfile, default_scan_state, order_scan, residual, write_scan_csv
    from .groundstate import default_ground_state

    gs = default_ground_state()
    state = cfg.state or default_scan_state()
    if cfg.mode == "scan":
        scan = order_scan(gs, tuple(cfg.separations), tuple(cfg.orders), state,
                          cfg.window_n, cfg.window_L)
        write_scan_csv(scan["rows"], out / "order_scan.csv")
        _write_json(out / "slopes.json", {str(k): v for k, v in scan["slopes"].items()})
        print(" N   slope   target")
        for N, s in scan["slopes"].items():
            print(f" {N}  {s:7.3f}  {-(N + 1):5d}")
    else:
        rows = []
        for N in cfg.orders:
            rep = residual(SolitonProfile.from_ground_state(gs, N), state,
                           window_n=cfg.window_n, window_L=cfg.window_L)
            rows.append(rep)
            print(f" N={N}: weighted sup {rep.weighted_sup:.4e}, L2 {rep.l2_norm:.4e}")
        write_scan_csv(rows, out / "residual.csv")
    return EXIT_OK


def cli_evolve(cfg, out: Path, seed: int) -> int:
    from .evolve import EvolutionError, TrackingLost, run

    try:
        res = run(cfg, out_dir=out)
    except (EvolutionError, TrackingLost) as exc:
        print(f"evolution aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    m = res.column("mass")
    H = res.column("H")
    summary = {"t_final": res.t, "mass_drift": float(np.max(np.abs(m / m[0] - 1))),
               "H_drift": float(np.max(np.abs(H / H[0] - 1))),
               "max_rel_error": float(np.nanmax(res.column("rel_error")))
               if cfg.state is not None else None}
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cli_diagnose(cfg, out: Path, seed: int) -> int:
    from .acceptance import coercivity_layer
    from .ansatz import SolitonProfile, assemble_R
    from .diagnostics import CutoffPair, EpsilonLayer, coercivity_probe, random_epsilon
    from .field import Field3D, Grid3D
    from .groundstate import default_ground_state

    if cfg.state is None:
        layer = coercivity_layer(cfg.separation, cfg.n, cfg.L)
    else:
        gs = default_ground_state()
        R = assemble_R(SolitonProfile.from_ground_state(gs, 0), cfg.state, Grid3D(cfg.n, cfg.L))
        scale = cfg.scale or float(np.linalg.norm(cfg.state.alpha)) / 4
        layer = EpsilonLayer(gs, cfg.state, R, CutoffPair(cfg.regime, scale))
    rep = coercivity_probe(layer, cfg.trials, seed, cfg.amplitude)
    rep.to_csv(out / "coercivity.csv")
    eps = layer.project(random_epsilon(layer, np.random.default_rng(seed)))
    eps = Field3D(layer.grid, eps.values * cfg.amplitude / np.sqrt(layer.h1_norm_sq(eps)))
    layer.energy(eps).to_json(out / "epsilon_report.json")
    _write_json(out / "summary.json", {"min_quotient": rep.minimum,
                                       "median_quotient": float(np.median(rep.quotients)),
                                       "trials": cfg.trials, "seed": seed})
    print(f"min projected quotient {rep.minimum:.4f} over {cfg.trials} trials")
    return EXIT_OK


def cli_verify(only=None, out: Path | None = None) -> int:
    from .acceptance import format_table, run_all

    results = run_all(only)
    table = format_table(results)
    print(table)
    if out is not None:
        (out / "verify.txt").write_text(table + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "groundstate": cli_groundstate,
    "twobody": cli_twobody,
    "ansatz": cli_ansatz,
    "evolve": cli_evolve,
    "diagnose": cli_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsl", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
        sp.add_argument("--out", default=f"runs/{name}", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="FFT worker cap")
        sp.add_argument("--seed", type=int, default=0, help="random seed (u64)")
        if name == "verify":
            sp.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")],
                            help="comma-separated criterion numbers")
    return p


def _setup_logging() -> None:
    level = os.environ.get("HSL_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    from .field import set_threads

    args = build_parser().parse_args(argv)
    _setup_logging()
    set_threads(args.threads)
    if not 0 <= args.seed < 2**64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    RunManifest(args.command, args.config or args.preset, str(out), args.seed,
                __version__).write(out)
    if args.command == "verify":
        return cli_verify(args.only, out)
    if args.preset:
        kind, cfg = preset(args.preset)
        if kind != args.command:
            print(f"preset {args.preset!r} belongs to '{kind}'", file=sys.stderr)
            return EXIT_FAIL
    else:
        cfg = load_config(args.command, args.config)
    dump_config(cfg, out / "config.json")
    return COMMANDS[args.command](cfg, out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
