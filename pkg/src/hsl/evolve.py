"""Strang-split spectral evolution of  i u_t + Lap u - phi_{|u|^2} u = 0.

One step of size dt:

    u <- exp(-i dt/2 phi(|u|^2)) u
    u <- F^-1 exp(-i dt |k|^2) F u
    u <- exp(-i dt/2 phi(|u|^2)) u        (phi re-solved)

Both potential substeps leave |u| unchanged, so phi is constant during
them and each substep is exact.  The potential of the last substep is the
potential of the next step's first substep, so it is cached: one Poisson
solve per step.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .field import Field3D, Grid3D, fft, ifft, read_checkpoint, write_checkpoint
from .poisson import solve_potential
from .twobody import CouplingConstants, ModState, integrate

log = logging.getLogger(__name__)


class EvolutionError(RuntimeError):
    def __init__(self, msg, checkpoint=None):
        super().__init__(msg)
        self.checkpoint = checkpoint


class TrackingLost(RuntimeError):
    pass


@dataclass
class SimConfig:
    n: int = 128
    L: float = 80.0
    dt: float = 1e-3
    t_end: float = 1.0
    cadence: int = 50
    checkpoint_every: int = 0
    window: float = 8.0
    order: int = 0
    state: ModState | None = None
    checkpoint: str | None = None
    until_doubling: bool = False
    kernel: str = "ewald"
    face_margin: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.state is None and self.checkpoint is None:
            raise ValueError("initial data needs a ModState or a checkpoint")
        phase = self.dt * self.grid().k2.max()
        if phase >= np.pi:
            raise ValueError(f"dt |k|^2_max = {phase:.3g} exceeds pi; reduce dt or n")
        if self.state is not None:
            lam = max(self.state.lambda1, self.state.lambda2)
            if self.window < 4 * lam:
                raise ValueError("centroid window must be at least 4 max(lambda)")

    def grid(self) -> Grid3D:
        return Grid3D(self.n, self.L)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["state"] = self.state.to_dict() if self.state is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if d.get("state") is not None:
            d["state"] = ModState.from_dict(d["state"])
        return cls(**d)


@dataclass
class ConservedTriple:
    mass: float
    hamiltonian: float
    momentum: np.ndarray


class Evolver:
    """Split-step propagator on a fixed grid with the potential cached."""

    def __init__(self, grid: Grid3D, kernel: str = "ewald", linear: bool = False):
        self.grid = grid
        self.kernel = kernel
        self.linear = linear
        self._kin = {}
        self._phi = None

    def potential(self, u: np.ndarray) -> np.ndarray:
        if self.linear:
            return np.zeros(u.shape)
        return solve_potential(self.grid, np.abs(u) ** 2, self.kernel, check_compact=False)

    def _kinetic(self, dt):
        if dt not in self._kin:
            self._kin[dt] = np.exp(-1j * dt * self.grid.k2)
        return self._kin[dt]

    def reset(self):
        self._phi = None

    def advance(self, u: np.ndarray, dt: float, steps: int = 1) -> np.ndarray:
        """Return u after ``steps`` Strang steps; adjacent half phases are fused."""
        if self._phi is None or self._phi.shape != u.shape:
            self._phi = self.potential(u)
        kin = self._kinetic(dt)
        u = u * np.exp(-0.5j * dt * self._phi)
        for i in range(steps):
            u = ifft(kin * fft(u))
            self._phi = self.potential(u)
            half = 0.5 if i == steps - 1 else 1.0
            u *= np.exp(-1j * half * dt * self._phi)
        return u


def step(u: Field3D, dt: float, kernel: str = "ewald", linear: bool = False) -> Field3D:
    """One Strang step (stateless convenience wrapper)."""
    ev = Evolver(u.grid, kernel, linear)
    return Field3D(u.grid, ev.advance(u.values, dt))


def conserved(u: Field3D, kernel: str = "ewald") -> ConservedTriple:
    """Mass, Hamiltonian 1/2 |grad u|^2 - 1/4 |grad phi|^2, momentum Im grad u . conj u.

    The potential part uses int |grad phi|^2 = -int phi |u|^2.
    """
    g = u.grid
    v = u.values
    uh = fft(v)
    w = np.abs(uh) ** 2 * g.dV / v.size
    kin = float(np.sum(g.k2 * w))
    k = g.k
    mom = np.array([np.sum(k[:, None, None] * w), np.sum(k[None, :, None] * w),
                    np.sum(k[None, None, :] * w)])
    rho = np.abs(v) ** 2
    phi = solve_potential(g, rho, kernel, check_compact=False)
    pot = float(np.sum(phi * rho) * g.dV)
    return ConservedTriple(float(np.sum(rho) * g.dV), 0.5 * kin + 0.25 * pot, mom)


def gn_ratio(u: Field3D, kernel: str = "ewald") -> float:
    """int |grad phi|^2 / (||grad u|| ||u||^3), bounded by a universal constant."""
    g = u.grid
    v = u.values
    w = np.abs(fft(v)) ** 2 * g.dV / v.size
    grad = np.sqrt(float(np.sum(g.k2 * w)))
    rho = np.abs(v) ** 2
    mass = float(np.sum(rho) * g.dV)
    phi = solve_potential(g, rho, kernel, check_compact=False)
    return float(-np.sum(phi * rho) * g.dV) / (grad * mass**1.5)


def _ball_moments(u: np.ndarray, grid: Grid3D, center, w: float):
    x = grid.x
    idx = []
    for c in center:
        lo = max(0, int(np.floor((c - w - x[0]) / grid.dx)))
        hi = min(grid.n, int(np.ceil((c + w - x[0]) / grid.dx)) + 1)
        idx.append(slice(lo, hi))
    sub = np.abs(u[tuple(idx)]) ** 2
    X = x[idx[0]][:, None, None] - center[0]
    Y = x[idx[1]][None, :, None] - center[1]
    Z = x[idx[2]][None, None, :] - center[2]
    inside = X * X + Y * Y + Z * Z <= w * w
    m = float(np.sum(sub * inside))
    if m == 0:
        return 0.0, np.asarray(center, float)
    dens = sub * inside
    off = np.array([np.sum(dens * X), np.sum(dens * Y), np.sum(dens * Z)]) / m
    return m * grid.dV, np.asarray(center, float) + off


def track_centroids(u: Field3D, guess, w: float, min_mass: float = 1e-8,
                    max_iter: int = 10, tol: float = 1e-8):
    """Windowed mass centroids near each guessed center.

    ``guess`` is a ModState or a sequence of centers.  Returns
    (centroids, local masses) as arrays of shape (k, 3) and (k,).
    """
    if isinstance(guess, ModState):
        centers = [guess.alpha1, guess.alpha2]
    else:
        centers = [np.asarray(c, float) for c in guess]
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            if np.linalg.norm(centers[a] - centers[b]) < 2 * w:
                raise TrackingLost("centroid windows overlap")
    total = u.mass()
    out, masses = [], []
    for c in centers:
        for _ in range(max_iter):
            m, new = _ball_moments(u.values, u.grid, c, w)
            if m < min_mass * max(total, 1e-300):
                raise TrackingLost(f"vanishing local mass near {np.round(c, 3)}")
            moved = float(np.linalg.norm(new - c))
            c = new
            if moved < tol:
                break
        out.append(c)
        masses.append(m)
    return np.array(out), np.array(masses)


@dataclass
class RunResult:
    rows: list
    field: Field3D
    t: float
    config: SimConfig
    info: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        cols = ["t", "mass", "H", "Px", "Py", "Pz", "c1x", "c1y", "c1z", "c2x", "c2y", "c2z",
                "separation", "kepler_separation", "rel_error"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for r in self.rows:
                wr.writerow([repr(float(r[c])) for c in cols])


def initial_field(cfg: SimConfig, gs=None, corrections=None) -> tuple[Field3D, float]:
    if cfg.checkpoint is not None:
        f, t0 = read_checkpoint(cfg.checkpoint)
        if f.grid != cfg.grid():
            raise ValueError("checkpoint grid differs from the configured grid")
        return f, t0
    from .ansatz import SolitonProfile, assemble_R
    from .groundstate import default_ground_state

    gs = gs or default_ground_state()
    prof = SolitonProfile.from_ground_state(gs, cfg.order, corrections)
    return assemble_R(prof, cfg.state, cfg.grid()), 0.0


def run(cfg: SimConfig, gs=None, corrections=None, out_dir=None) -> RunResult:
    """Evolve, recording diagnostics every ``cadence`` steps.

    Centroids are compared against the two-body trajectory started from the
    configured ModState (refined laws for N = 2, Kepler otherwise).
    """
    from .groundstate import default_ground_state

    gs = gs or default_ground_state()
    grid = cfg.grid()
    u, t = initial_field(cfg, gs, corrections)
    s0 = cfg.state
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))

    kepler = None
    if s0 is not None:
        if cfg.order == 2:
            from .linops import build_corrections
            cs = corrections or build_corrections(gs)
            c = CouplingConstants(cs.g, cs.m2_coeff, cs.b2_coeff)
        else:
            c = CouplingConstants(gs.g)
        kepler = integrate(s0, c, 0.0, max(cfg.t_end, 1e-9) * 1.001 + cfg.dt, tol=1e-11,
                           refined=cfg.order == 2)
        sep0 = float(np.linalg.norm(s0.alpha))
        guess = [s0.alpha1, s0.alpha2]
    ev = Evolver(grid, cfg.kernel)
    rows = []
    last_ckpt = None
    nsteps = int(round((cfg.t_end - t) / cfg.dt))
    done = 0

    def record():
        nonlocal guess
        f = Field3D(grid, u) if isinstance(u, np.ndarray) else u
        cq = conserved(f, cfg.kernel)
        row = {"t": t, "mass": cq.mass, "H": cq.hamiltonian,
               "Px": cq.momentum[0], "Py": cq.momentum[1], "Pz": cq.momentum[2]}
        sep = ksep = rel = np.nan
        cents = np.full((2, 3), np.nan)
        if kepler is not None:
            cents, _ = track_centroids(f, guess, cfg.window)
            guess = list(cents)
            sep = float(np.linalg.norm(cents[1] - cents[0]))
            ka = kepler.sol.sol(t)
            ksep = float(np.linalg.norm(ka[3:6] - ka[0:3]))
            rel = abs(sep - ksep) / ksep
            lam = max(s0.lambda1, s0.lambda2)
            if np.any(np.abs(cents) > grid.L / 2 - cfg.face_margin * lam):
                raise EvolutionError(f"soliton within {cfg.face_margin} decay lengths of a face"
                                     f" at t={t:.4g}", last_ckpt)
        row.update({"c1x": cents[0, 0], "c1y": cents[0, 1], "c1z": cents[0, 2],
                    "c2x": cents[1, 0], "c2y": cents[1, 1], "c2z": cents[1, 2],
                    "separation": sep, "kepler_separation": ksep, "rel_error": rel})
        if not np.isfinite(cq.mass) or not np.isfinite(cq.hamiltonian):
            raise EvolutionError(f"non-finite field at t={t:.4g}", last_ckpt)
        rows.append(row)
        log.info("t=%.4f mass=%.12g H=%.10g sep=%.6g rel=%.2e", t, cq.mass, cq.hamiltonian,
                 sep, rel)
        return row

    u = u.values
    record()
    while done < nsteps:
        k = min(cfg.cadence, nsteps - done)
        u = ev.advance(u, cfg.dt, k)
        done += k
        t = t + k * cfg.dt
        row = record()
        if out and cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
            last_ckpt = out / f"field_{done:07d}.bin"
            write_checkpoint(last_ckpt, Field3D(grid, u), t)
        if cfg.until_doubling and kepler is not None and row["separation"] >= 2 * sep0:
            break
    res = RunResult(rows, Field3D(grid, u), t, cfg)
    if out:
        res.to_csv(out / "diagnostics.csv")
        write_checkpoint(out / "final.bin", res.field, t)
    return res
