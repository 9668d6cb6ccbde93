"""The epsilon layer: orthogonality pairings, localized energy and coercivity.

Write u = R + eps.  For soliton j the rescaled error is

    eps_j(y) = lam_j^2 eps(lam_j y + alpha_j) exp(i gamma_j - i beta_j.(lam_j y + alpha_j)),

and the modulation is pinned by eight real conditions per soliton:

    Re(eps_j, Q) = Re(eps_j, y Q) = Im(eps_j, Lambda Q) = Im(eps_j, grad Q) = 0.

Each pairing is a real-linear functional  Re int eps conj(eta) dx  of the
lab-frame error, so everything is evaluated on the simulation grid without
interpolating eps.

The localized energy is

    G = int |grad eps|^2 + int phi_{|R|^2} |eps|^2 - 2 int |grad phi_f|^2
        + 2 int phi_f |eps|^2 - 1/2 int |grad phi_{|eps|^2}|^2
        + sum_j (1/lam_j^2 + |beta_j|^2) int zeta_j |eps|^2
        - 2 beta_j . int psi_j Im(grad eps conj eps),

with f = Re(eps conj R).  Potential energies use
int |grad phi_h|^2 = -int phi_h h.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .field import Field3D, Grid3D, fft, ifft
from .groundstate import GroundState
from .poisson import solve_potential
from .radial import RadialProfile, derivative
from .twobody import ModState, Regime

def smoothstep_cutoff(s):
    """Psi(s): 1 for s <= -1, 0 for s >= 1, quintic smoothstep in between (C^2)."""
    tau = np.clip((np.asarray(s, float) + 1) / 2, 0.0, 1.0)
    return 1.0 - tau**3 * (10 - 15 * tau + 6 * tau * tau)


@dataclass(frozen=True)
class CutoffPair:
    """psi_1(x) = Psi(x_1/scale), psi_2 = 1 - psi_1; zeta_j = psi_j or 1/2.

    Soliton 1 is taken to sit on the negative x_1 side.
    """

    regime: Regime
    scale: float

    def __post_init__(self):
        regime = Regime(self.regime)
        if regime is Regime.ELLIPTIC:
            raise ValueError("cutoffs are defined for the hyperbolic and parabolic regimes")
        object.__setattr__(self, "regime", regime)
        if not self.scale > 0:
            raise ValueError("cutoff scale must be positive")

    @classmethod
    def at_time(cls, regime, C: float, t: float) -> "CutoffPair":
        regime = Regime(regime)
        scale = C * t if regime is Regime.HYPERBOLIC else C * t ** (2 / 3)
        return cls(regime, scale)

    def psi(self, grid: Grid3D, j: int) -> np.ndarray:
        p1 = smoothstep_cutoff(grid.x / self.scale)[:, None, None] * np.ones((1, grid.n, grid.n))
        return p1 if j == 1 else 1.0 - p1

    def zeta(self, grid: Grid3D, j: int):
        if self.regime is Regime.PARABOLIC:
            return 0.5
        return self.psi(grid, j)

    def grad_bound(self) -> float:
        """sup |Psi'| / scale; the quintic step has max slope 15/16 per unit of s."""
        return 15 / 16 / self.scale


@dataclass
class EpsilonReport:
    pairings: dict
    G: float
    G1: float
    G2: float
    G3: float
    h1_norm: float

    def to_dict(self) -> dict:
        d = {k: float(getattr(self, k)) for k in ("G", "G1", "G2", "G3", "h1_norm")}
        d["pairings"] = {str(j): {k: np.asarray(v).tolist() for k, v in p.items()}
                         for j, p in self.pairings.items()}
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def epsilon_decompose(u: Field3D, R: Field3D) -> Field3D:
    if u.grid != R.grid:
        raise ValueError("u and R live on different grids")
    return Field3D(u.grid, u.values - R.values)


def _kinetic(grid: Grid3D, v: np.ndarray) -> float:
    w = np.abs(fft(v)) ** 2
    return float(np.sum(grid.k2 * w) * grid.dV / v.size)


def _real_inner(grid: Grid3D, a: np.ndarray, b: np.ndarray) -> float:
    """Re int a conj(b) dx."""
    return float(np.sum(a.real * b.real + a.imag * b.imag) * grid.dV)


def constraint_functions(gs: GroundState, s: ModState, grid: Grid3D, solitons=(1, 2)) -> list:
    """[(j, name, component, eta)] with pairing = Re int eps conj(eta) dx."""
    dQ = RadialProfile(gs.grid, derivative(gs.grid, gs.Q.values, 1))
    LQ = RadialProfile(gs.grid, gs.lambda_Q())
    out = []
    for j in solitons:
        a, b, lam, gam = s.soliton(j)
        X, Y, Z = grid.axes(a)
        ys = [X / lam, Y / lam, Z / lam]
        rho = np.sqrt(ys[0] ** 2 + ys[1] ** 2 + ys[2] ** 2)
        x, y, z = grid.axes()
        ph = np.exp(1j * (b[0] * x + b[1] * y + b[2] * z - gam)) / lam
        q = gs.Q(rho)
        dq = dQ(rho)
        with np.errstate(invalid="ignore", divide="ignore"):
            inv = np.where(rho > 0, 1.0 / rho, 0.0)
        out.append((j, "re_Q", None, ph * q))
        for i in range(3):
            out.append((j, "re_yQ", i, ph * ys[i] * q))
        out.append((j, "im_LambdaQ", None, 1j * ph * LQ(rho)))
        for i in range(3):
            out.append((j, "im_gradQ", i, 1j * ph * dq * ys[i] * inv))
    return out


def _collect(labels, values) -> dict:
    res = {}
    for (j, name, comp), val in zip(labels, values):
        p = res.setdefault(j, {"re_Q": 0.0, "re_yQ": np.zeros(3), "im_LambdaQ": 0.0,
                               "im_gradQ": np.zeros(3)})
        if comp is None:
            p[name] = float(val)
        else:
            p[name][comp] = val
    return res


class EpsilonLayer:
    """Evaluation context for one frame (R, s) on one grid.

    ``cutoffs=None`` means a lone soliton: psi = zeta = 1 for the active
    soliton.  ``solitons`` selects which constraint families are imposed.
    """

    def __init__(self, gs: GroundState, s: ModState, R: Field3D, cutoffs: CutoffPair | None = None,
                 solitons=(1, 2), kernel: str = "ewald"):
        self.gs = gs
        self.s = s
        self.R = R
        self.grid = R.grid
        self.cutoffs = cutoffs
        self.solitons = tuple(solitons)
        if cutoffs is None and len(self.solitons) != 1:
            raise ValueError("two solitons need a CutoffPair")
        self.kernel = kernel
        self.phi_R = solve_potential(self.grid, np.abs(R.values) ** 2, kernel, check_compact=False)
        self._weights = {}
        for j in self.solitons:
            if cutoffs is None:
                self._weights[j] = (1.0, 1.0)
            else:
                self._weights[j] = (cutoffs.psi(self.grid, j), cutoffs.zeta(self.grid, j))
        cons = constraint_functions(gs, s, self.grid, self.solitons)
        self.labels = [c[:3] for c in cons]
        # rows are the constraint functions viewed as interleaved (re, im) floats,
        # so a matrix product gives Re int eps conj(eta) directly
        self._C = np.stack([np.ascontiguousarray(c[3]).ravel().view(float) for c in cons])
        del cons
        self._gram = self._C @ self._C.T * self.grid.dV
        if np.linalg.cond(self._gram) > 1e12:
            raise ValueError("constraint functions are linearly dependent")

    # --- pairings ----------------------------------------------------------

    def pairing_vector(self, eps: Field3D) -> np.ndarray:
        v = np.ascontiguousarray(eps.values).ravel().view(float)
        return self._C @ v * self.grid.dV

    def pairings(self, eps: Field3D) -> dict:
        return _collect(self.labels, self.pairing_vector(eps))

    def project(self, eps: Field3D) -> Field3D:
        """Remove the span of the constraint functions (real inner product)."""
        v = np.ascontiguousarray(eps.values, dtype=complex).copy().ravel().view(float)
        for _ in range(2):
            coef = np.linalg.solve(self._gram, self._C @ v * self.grid.dV)
            v -= coef @ self._C
        return Field3D(self.grid, v.view(complex).reshape(eps.values.shape))

    # --- energy ------------------------------------------------------------

    def h1_norm_sq(self, eps: Field3D) -> float:
        return _kinetic(self.grid, eps.values) + float(np.sum(np.abs(eps.values) ** 2) * self.grid.dV)

    def energy(self, eps: Field3D) -> EpsilonReport:
        g, e = self.grid, eps.values
        dV = g.dV
        dens = np.abs(e) ** 2
        f = (e * np.conj(self.R.values)).real
        phi_f = solve_potential(g, f, self.kernel, check_compact=False)
        phi_e = solve_potential(g, dens, self.kernel, check_compact=False)
        eh = fft(e)
        kin = float(np.sum(g.k2 * np.abs(eh) ** 2) * dV / e.size)
        mass = float(np.sum(dens) * dV)
        G1 = (kin + np.sum(self.phi_R * dens) * dV + 2 * np.sum(phi_f * f) * dV
              + 2 * np.sum(phi_f * dens) * dV + 0.5 * np.sum(phi_e * dens) * dV)
        G2 = 0.0
        G3 = 0.0
        grad = None
        for j in self.solitons:
            _, b, lam, _ = self.s.soliton(j)
            psi, zeta = self._weights[j]
            G2 += (1 / lam**2 + b @ b) * np.sum(zeta * dens) * dV
            if np.any(b != 0):
                if grad is None:
                    k = g.k
                    grad = [ifft(1j * k[:, None, None] * eh), ifft(1j * k[None, :, None] * eh),
                            ifft(1j * k[None, None, :] * eh)]
                cur = np.array([np.sum(psi * (gi * np.conj(e)).imag) for gi in grad]) * dV
                G3 += -2 * float(b @ cur)
        return EpsilonReport(self.pairings(eps), float(G1 + G2 + G3), float(G1), float(G2),
                             float(G3), float(np.sqrt(kin + mass)))

    def quotient(self, eps: Field3D) -> float:
        rep = self.energy(eps)
        return rep.G / rep.h1_norm**2


def orthogonality_inner_products(eps: Field3D, s: ModState, gs: GroundState,
                                 solitons=(1, 2)) -> dict:
    """Per-soliton pairings {j: {re_Q, re_yQ (3), im_LambdaQ, im_gradQ (3)}}."""
    cons = constraint_functions(gs, s, eps.grid, solitons)
    vals = [_real_inner(eps.grid, eps.values, c[3]) for c in cons]
    return _collect([c[:3] for c in cons], vals)


def energy_functional_G(eps: Field3D, R: Field3D, s: ModState, cutoffs: CutoffPair | None,
                        gs: GroundState, solitons=(1, 2)) -> EpsilonReport:
    return EpsilonLayer(gs, s, R, cutoffs, solitons).energy(eps)


def random_epsilon(layer: EpsilonLayer, rng: np.random.Generator, bumps: int = 2) -> Field3D:
    """Smooth random error localized around the active solitons.

    Band-limited complex noise under a Gaussian envelope per soliton, plus a
    few boosted Gaussian bumps so that low-dimensional shapes are sampled too.
    """
    g = layer.grid
    shape = (g.n,) * 3
    noise = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    x, y, z = g.axes()
    env = np.zeros(shape)
    lam_min = min(layer.s.soliton(j)[2] for j in layer.solitons)
    kc = rng.uniform(0.4, 1.5) / lam_min
    v = ifft(fft(noise) * np.exp(-g.k2 / (2 * kc * kc)))
    v /= np.sqrt(np.mean(np.abs(v) ** 2))
    bump = np.zeros(shape, complex)
    for j in layer.solitons:
        a, _, lam, _ = layer.s.soliton(j)
        w = lam * rng.uniform(1.0, 2.5)
        env += abs(rng.normal()) * np.exp(-((x - a[0]) ** 2 + (y - a[1]) ** 2 + (z - a[2]) ** 2)
                                          / (2 * w * w))
        for _ in range(bumps):
            c = a + 1.5 * lam * rng.normal(size=3)
            sig = lam * rng.uniform(0.5, 2.5)
            k = rng.normal(size=3) * 0.7 / lam
            amp = rng.normal() + 1j * rng.normal()
            r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
            bump += amp * np.exp(-r2 / (2 * sig * sig) + 1j * (k[0] * x + k[1] * y + k[2] * z))
    return Field3D(g, env * v + rng.uniform(0, 2) * bump)


@dataclass
class CoercivityReport:
    quotients: np.ndarray
    projected: bool
    amplitude: float
    info: dict = field(default_factory=dict)

    @property
    def minimum(self) -> float:
        return float(np.min(self.quotients))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "quotient"])
            for i, q in enumerate(self.quotients):
                w.writerow([i, repr(float(q))])


def coercivity_probe(layer: EpsilonLayer, trials: int = 100, seed: int = 0,
                     amplitude: float = 1e-3, project: bool = True) -> CoercivityReport:
    """Minimum of G(eps)/||eps||_{H^1}^2 over random (projected) small eps."""
    if trials < 100:
        raise ValueError("the probe needs at least 100 trials")
    rng = np.random.default_rng(seed)
    qs = []
    worst_pairing = 0.0
    for _ in range(trials):
        eps = random_epsilon(layer, rng)
        if project:
            eps = layer.project(eps)
        eps = Field3D(layer.grid, eps.values * amplitude / np.sqrt(layer.h1_norm_sq(eps)))
        if project:
            worst_pairing = max(worst_pairing, float(np.max(np.abs(layer.pairing_vector(eps)))))
        qs.append(layer.quotient(eps))
    return CoercivityReport(np.array(qs), project, amplitude,
                            {"max_pairing": worst_pairing, "seed": seed, "trials": trials})
