"""Ground state Q of  Lap W - phi_{|W|^2} W = W  and its derived constants.

The radial profile is computed by Petviashvili's renormalized fixed-point
iteration for (-Lap + 1) Q = -phi_{Q^2} Q, with phi obtained from the radial
Poisson solve.  A shooting integration of the coupled radial ODEs serves as an
independent cross-check of Q(0).
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .radial import RadialGrid, RadialProfile, derivative, laplacian, sector_potential

log = logging.getLogger(__name__)


class GroundStateError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class GroundState:
    Q: RadialProfile
    phi: RadialProfile
    mass: float
    g: float
    ip_lambda: float
    ip_grad: np.ndarray
    S: RadialProfile
    ip_SQ: float
    residual: float = 0.0
    iterations: int = 0
    _ops: object = field(default=None, repr=False, compare=False)

    @property
    def grid(self) -> RadialGrid:
        return self.Q.grid

    def lambda_Q(self) -> np.ndarray:
        """Lambda Q = 2Q + r Q'."""
        r = self.grid.r
        return 2 * self.Q.values + r * derivative(self.grid, self.Q.values, 1)

    def constants(self) -> dict:
        return {
            "mass": self.mass,
            "g": self.g,
            "ip_lambda": self.ip_lambda,
            "ip_grad": [float(v) for v in self.ip_grad],
            "ip_SQ": self.ip_SQ,
        }

    def export(self, out_dir) -> None:
        """Write profile.csv (r, Q, phi) and constants.json."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data = np.column_stack([self.grid.r, self.Q.values, self.phi.values])
        np.savetxt(out / "profile.csv", data, delimiter=",", header="r,Q,phi",
                   comments="", fmt="%.17g")
        (out / "constants.json").write_text(json.dumps(self.constants(), indent=2, sort_keys=True))


def radial_residual(grid: RadialGrid, Q: np.ndarray, phi: np.ndarray) -> tuple[float, float]:
    """Max-norm residuals of the Q equation and the phi equation."""
    lap = laplacian(grid, 0)
    res_q = lap @ Q - Q - phi * Q
    lap_h = laplacian(grid, 0, harmonic_outer=True)
    res_p = lap_h @ phi - Q * Q
    return float(np.max(np.abs(res_q))), float(np.max(np.abs(res_p)))


def _petviashvili(grid: RadialGrid, tol: float, max_iter: int):
    r = grid.r
    w = grid.weights(0)
    K = (-laplacian(grid, 0) + sp.identity(grid.m)).tocsc()
    lu = spla.splu(K)
    Q = 3.0 * np.exp(-r**2 / 6)
    resid = np.inf
    for it in range(1, max_iter + 1):
        phi = sector_potential(grid, Q * Q, 0)
        N = -phi * Q
        M = np.sum(w * Q * (K @ Q)) / np.sum(w * Q * N)
        Q_new = M**1.5 * lu.solve(N)
        step = np.max(np.abs(Q_new - Q))
        Q = Q_new
        if step < 1e-3 * tol * np.max(np.abs(Q)):
            phi = sector_potential(grid, Q * Q, 0)
            rq, rp = radial_residual(grid, Q, phi)
            resid = max(rq, rp) / np.max(np.abs(Q))
            if resid <= tol:
                return Q, phi, resid, it
    phi = sector_potential(grid, Q * Q, 0)
    resid = max(radial_residual(grid, Q, phi)) / np.max(np.abs(Q))
    raise GroundStateError(
        f"ground state iteration did not reach tol={tol:g} after {max_iter} iterations;"
        f" final residual {resid:.3e}", residual=resid)


def solve_ground_state(grid: RadialGrid | None = None, tol: float = 1e-9,
                       max_iter: int = 400) -> GroundState:
    """Solve for Q with frequency pinned to 1 and compute the exported constants."""
    from .linops import SectorOperators

    grid = grid or RadialGrid()
    Q, phi, resid, iters = _petviashvili(grid, tol, max_iter)
    if np.any(Q[:-1] <= 0) or np.any(np.diff(Q[r_mask(grid)]) > 0):
        raise GroundStateError("iteration converged to a profile with a negative lobe", resid)

    r = grid.r
    w0, w1 = grid.weights(0), grid.weights(1)
    mass = float(np.sum(w0 * Q * Q))
    dQ = derivative(grid, Q, 1)
    lamQ = 2 * Q + r * dQ
    ip_lambda = float(np.sum(w0 * lamQ * Q))
    ip_grad = np.full(3, float(np.sum(w1 * (r * Q) * dQ)))
    ops = SectorOperators(grid, Q, phi)
    S = ops.solve_Lplus(Q, 0)
    ip_SQ = float(np.sum(w0 * S * Q))
    log.info("ground state: Q(0)=%.12f mass=%.12f residual=%.2e (%d iterations)",
             Q[0], mass, resid, iters)
    gs = GroundState(
        Q=RadialProfile(grid, Q), phi=RadialProfile(grid, phi), mass=mass,
        g=mass / (4 * np.pi), ip_lambda=ip_lambda, ip_grad=ip_grad,
        S=RadialProfile(grid, S), ip_SQ=ip_SQ, residual=resid, iterations=iters,
    )
    object.__setattr__(gs, "_ops", ops)
    return gs


def r_mask(grid: RadialGrid) -> np.ndarray:
    """Nodes where Q is well above round-off (monotonicity is checked there)."""
    return grid.r < 0.75 * grid.r_max


@lru_cache(maxsize=4)
def default_ground_state(r_max: float = 40.0, m: int = 8000, tol: float = 1e-9) -> GroundState:
    """Memoized ground state on the default grid."""
    return solve_ground_state(RadialGrid(r_max, m), tol)


def pohozaev_report(gs: GroundState) -> dict:
    """Relative residuals of (Lambda Q, Q) = mass/2 and (x_i Q, d_i Q) = -mass/2."""
    return {
        "lambda": abs(gs.ip_lambda - gs.mass / 2) / gs.mass,
        "grad": [abs(v + gs.mass / 2) / gs.mass for v in gs.ip_grad],
    }


def lift_to_box(gs: GroundState, grid, center=(0.0, 0.0, 0.0), lam: float = 1.0,
                beta=(0.0, 0.0, 0.0), gamma: float = 0.0):
    """lam^-2 Q((x - center)/lam) exp(-i gamma + i beta.x) on a Grid3D."""
    from .field import Field3D

    if not lam > 0:
        raise ValueError("scale lam must be positive")
    center = np.asarray(center, float)
    beta = np.asarray(beta, float)
    X, Y, Z = grid.axes(center)
    rho = np.sqrt(X * X + Y * Y + Z * Z) / lam
    amp = gs.Q(rho) / lam**2
    x, y, z = grid.axes()
    phase = np.exp(1j * (beta[0] * x + beta[1] * y + beta[2] * z - gamma))
    frac = tail_fraction(gs, grid, center, lam)
    if frac > 1e-10:
        warnings.warn(f"soliton tail outside the box: {frac:.2e} of its mass",
                      RuntimeWarning, stacklevel=2)
    return Field3D(grid, amp * phase)


def tail_fraction(gs: GroundState, grid, center, lam: float) -> float:
    """Mass fraction of lam^-2 Q((x-c)/lam) beyond the nearest box face (radial bound)."""
    c = np.asarray(center, float)
    d = float(np.min(0.5 * grid.L - np.abs(c))) / lam
    if d <= 0:
        return 1.0
    r = gs.grid.r
    w = gs.grid.weights(0) * gs.Q.values**2
    return float(np.sum(w[r >= d]) / gs.mass)


def shooting_Q0(r_end: float = 30.0, rtol: float = 1e-13) -> dict:
    """Independent value of Q(0) by shooting on the coupled radial ODEs.

    Solve S'' + 2S'/r = V S, V'' + 2V'/r = S^2 with S(0) = 1 and bisect V(0)
    between profiles that cross zero and profiles that turn upward.  For the
    decaying solution V -> V_inf - c/r; rescaling by mu = V_inf^{-1/2} gives
    the frequency-one ground state with Q(0) = 1 / V_inf.
    """
    r0 = 1e-6

    def rhs(r, y):
        s, ds, v, dv = y
        return [ds, v * s - 2 * ds / r, dv, s * s - 2 * dv / r]

    def start(v0):
        # series at the origin: S = 1 + v0 r^2/6, V = v0 + r^2/6
        return [1 + v0 * r0**2 / 6, v0 * r0 / 3, v0 + r0**2 / 6, r0 / 3]

    def cross(r, y):
        return y[0]
    cross.terminal = True

    def turn(r, y):
        return y[1]
    turn.terminal = True
    turn.direction = 1

    def classify(v0):
        sol = solve_ivp(rhs, (r0, r_end), start(v0), method="DOP853", rtol=rtol,
                        atol=1e-30, events=(cross, turn), dense_output=True)
        if sol.t_events[0].size:
            return -1, sol
        return +1, sol

    lo, hi = -5.0, 5.0
    if classify(lo)[0] != -1 or classify(hi)[0] != 1:
        raise GroundStateError("shooting bracket does not straddle the ground state")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if classify(mid)[0] < 0:
            lo = mid
        else:
            hi = mid
    _, sol = classify(lo)
    # read V_inf = V + r V' where S has decayed but the branch has not yet diverged
    rs = np.linspace(r0, sol.t[-1], 20000)
    s, _, v, dv = sol.sol(rs)
    k = np.argmin(np.abs(s))
    k = max(1, int(0.8 * k))
    v_inf = v[k] + rs[k] * dv[k]
    return {"v0": lo, "v_inf": v_inf, "Q0": 1.0 / v_inf, "r_eval": rs[k]}
