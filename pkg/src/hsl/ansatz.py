"""Approximate two-soliton field and its residual against the Hartree flow.

For soliton j (other soliton k) with c_j = lam_j^2 g/(lam_k |alpha|),

    R_j = lam_j^-2 V_j((x - alpha_j)/lam_j) exp(-i gamma_j + i beta_j.x),
    V_j = Q + [N>=1] c_j S + [N>=2] (c_j^2 A + d_j S + i e_j T_im + ell-1 part),

with d_j = 2 c_j c_k (S,Q)/mass and e_j = lam_j^4/lam_k (alpha.beta)/|alpha|^3.
The residual  i dR/dt + Lap R - phi_{|R|^2} R  is evaluated pointwise: time
derivatives by the chain rule through the modulation rates, Lap R from the
radial Laplacian of the profiles, and phi from the exact radial potential of
each |V_j|^2 (the exponentially small cross density Re R_1 conj(R_2) is left
out; ``cross_term_ratio`` measures it).
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .field import Field3D, Grid3D, spectral_laplacian
from .groundstate import GroundState
from .linops import CorrectionSet, build_corrections
from .poisson import solve_potential
from .radial import derivative, laplacian, sector_potential
from .twobody import A1, A2, B1, B2, G1, G2, L1, L2, CouplingConstants, ModState, derivative_vector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolitonProfile:
    """Profiles V^(N) = Q + T1 + T2 for N in {0, 1, 2}."""

    base: GroundState
    corrections: CorrectionSet | None
    order: int

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {self.order}")
        if self.order > 0 and self.corrections is None:
            raise ValueError("orders 1 and 2 need a CorrectionSet")

    @classmethod
    def from_ground_state(cls, gs: GroundState, order: int,
                          corrections: CorrectionSet | None = None) -> "SolitonProfile":
        if order > 0 and corrections is None:
            corrections = build_corrections(gs)
        return cls(gs, corrections, order)

    def couplings(self) -> CouplingConstants:
        """Physical couplings matching this order (refined laws for N = 2)."""
        cs = self.corrections
        if cs is None:
            return CouplingConstants(self.base.g)
        return CouplingConstants(cs.g, cs.m2_coeff, cs.b2_coeff)

    @property
    def refined(self) -> bool:
        return self.order == 2

    def ell1_negligible(self) -> bool:
        cs = self.corrections
        if cs is None or self.order < 2:
            return True
        return float(np.max(np.abs(cs.T2_real_ell1.values))) < 1e-12 * float(self.base.Q.values[0])


# --- coefficients -----------------------------------------------------------
def _coefficients(prof: SolitonProfile, Y, D, j: int, active: tuple):
    """Complex weights of (S, A, T_im) and their time derivatives for soliton j."""
    N = prof.order
    zero = {"S": 0.0, "A": 0.0, "I": 0.0, "l1": 0.0}
    if N == 0 or len(active) < 2:
        return zero, dict(zero)
    cs = prof.corrections
    g, mass = cs.g, cs.mass
    lam = (Y[L1], Y[L2])
    dlam = (D[L1], D[L2])
    alpha = Y[A2] - Y[A1]
    beta = Y[B2] - Y[B1]
    alpha_dot = D[A2] - D[A1]
    beta_dot = D[B2] - D[B1]
    r = float(np.linalg.norm(alpha))
    r_dot = float(alpha @ alpha_dot) / r

    def cj(a, b):
        v = lam[a] ** 2 * g / (lam[b] * r)
        dv = v * (2 * dlam[a] / lam[a] - dlam[b] / lam[b] - r_dot / r)
        return v, dv

    a, b = (0, 1) if j == 1 else (1, 0)
    c_a, dc_a = cj(a, b)
    w = {"S": c_a, "A": 0.0, "I": 0.0, "l1": 0.0}
    dw = {"S": dc_a, "A": 0.0, "I": 0.0, "l1": 0.0}
    if N == 2:
        c_b, dc_b = cj(b, a)
        k = 2 * cs.ip_SQ / mass
        d = k * c_a * c_b
        w["S"] += d
        dw["S"] += k * (dc_a * c_b + c_a * dc_b)
        w["A"] = c_a**2
        dw["A"] = 2 * c_a * dc_a
        ab = float(alpha @ beta)
        pref = lam[a] ** 4 / lam[b]
        e = pref * ab / r**3
        de = e * (4 * dlam[a] / lam[a] - dlam[b] / lam[b] - 3 * r_dot / r) + pref * (
            float(alpha_dot @ beta + alpha @ beta_dot)) / r**3
        w["I"], dw["I"] = e, de
        w["l1"] = lam[a] ** 3 / (lam[b] * r**2)
    return w, dw


class _SolitonEval:
    """Splines of V, V', Lap V, dV/dt|_y and the own potential for one soliton."""

    def __init__(self, prof: SolitonProfile, w: dict, dw: dict):
        gs = prof.base
        grid = gs.grid
        self.r_max = grid.r_max
        lap = laplacian(grid, 0)
        # combine derivatives of the fixed profiles rather than differentiating
        # the combination: a finite-difference Laplacian of V would turn the
        # last-bit rounding of the weights into 1e-11 noise
        Q = gs.Q.values
        V = Q.astype(complex)
        dV = derivative(grid, Q, 1).astype(complex)
        lapV = (lap @ Q).astype(complex)
        Vt = np.zeros(grid.m, complex)
        cs = prof.corrections
        if cs is not None:
            basis = {"S": cs.T1_shape.values, "A": cs.T2_real_A.values, "I": 1j * cs.T2_imag.values}
            for key, P in basis.items():
                if w[key] == 0 and dw[key] == 0:
                    continue
                V = V + w[key] * P
                Vt = Vt + dw[key] * P
                dP = derivative(grid, P.real, 1) + 1j * derivative(grid, P.imag, 1)
                dV = dV + w[key] * dP
                lapV = lapV + w[key] * (lap @ P.real + 1j * (lap @ P.imag))
        Phi = sector_potential(grid, np.abs(V) ** 2, 0)
        self.Phi_edge = float(Phi[-1])
        r = grid.r
        even = np.column_stack([V.real, V.imag, lapV.real, lapV.imag, Vt.real, Vt.imag, Phi])
        rr = np.concatenate([-r[:0:-1], r])
        self._even = CubicSpline(rr, np.concatenate([even[:0:-1], even]), axis=0)
        odd = np.column_stack([dV.real, dV.imag])
        self._odd = CubicSpline(rr, np.concatenate([-odd[:0:-1], odd]), axis=0)
        self.l1 = None
        if cs is not None and prof.order == 2 and not prof.ell1_negligible():
            self.l1 = CubicSpline(rr, np.concatenate([-cs.T2_real_ell1.values[:0:-1],
                                                      cs.T2_real_ell1.values]))
            self.l1_weight = w["l1"]

    def __call__(self, rho):
        inside = rho <= self.r_max
        rc = np.minimum(rho, self.r_max)
        e = self._even(rc)
        o = self._odd(rc)
        V = np.where(inside, e[..., 0] + 1j * e[..., 1], 0)
        lapV = np.where(inside, e[..., 2] + 1j * e[..., 3], 0)
        Vt = np.where(inside, e[..., 4] + 1j * e[..., 5], 0)
        dV = np.where(inside, o[..., 0] + 1j * o[..., 1], 0)
        Phi = np.where(inside, e[..., 6], self.Phi_edge * self.r_max / np.maximum(rho, 1e-300))
        return V, dV, lapV, Vt, Phi


@dataclass
class _State:
    prof: SolitonProfile
    Y: np.ndarray
    D: np.ndarray
    active: tuple
    evals: dict = field(default_factory=dict)


def _prepare(prof: SolitonProfile, s: ModState, c: CouplingConstants | None,
             solitons=(1, 2), system: str | None = None) -> _State:
    if system is not None:
        want = "refined" if prof.refined else "kepler"
        if system != want:
            raise ValueError(f"order N={prof.order} must be paired with the {want} system,"
                             f" got {system!r}")
    c = c or prof.couplings()
    Y = s.to_vector()
    active = tuple(sorted(solitons))
    if active not in ((1,), (2,), (1, 2)):
        raise ValueError("solitons must be (1,), (2,) or (1, 2)")
    if active == (1, 2):
        D = derivative_vector(Y, c, prof.refined)
    else:
        # a lone soliton moves freely: alpha' = 2 beta, gamma' = -1/lam^2 + |beta|^2
        D = np.zeros_like(Y)
        D[A1], D[A2] = 2 * Y[B1], 2 * Y[B2]
        D[G1] = -1 / Y[L1] ** 2 + Y[B1] @ Y[B1]
        D[G2] = -1 / Y[L2] ** 2 + Y[B2] @ Y[B2]
    st = _State(prof, Y, D, active)
    for j in active:
        w, dw = _coefficients(prof, Y, D, j, active)
        st.evals[j] = (_SolitonEval(prof, w, dw), w)
    return st


def _unpack(Y, j):
    if j == 1:
        return Y[A1], Y[B1], Y[L1], Y[G1]
    return Y[A2], Y[B2], Y[L2], Y[G2]


def _geometry(X, a, lam):
    d = (X - a) / lam
    rho = np.sqrt(np.sum(d * d, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        yhat = np.where(rho[..., None] > 0, d / rho[..., None], 0.0)
    return rho, yhat


def _field_points(st: _State, X):
    """R at points X of shape (..., 3)."""
    out = np.zeros(X.shape[:-1], complex)
    alpha = st.Y[A2] - st.Y[A1]
    for j in st.active:
        ev, w = st.evals[j]
        a, b, lam, gam = _unpack(st.Y, j)
        rho, yhat = _geometry(X, a, lam)
        V = ev(rho)[0]
        if ev.l1 is not None:
            sign = -1.0 if j == 1 else 1.0
            V = V + ev.l1_weight * sign * (yhat @ (alpha / np.linalg.norm(alpha))) * ev.l1(rho)
        out += V / lam**2 * np.exp(1j * (X @ b - gam))
    return out


def _residual_points(st: _State, X):
    """(residual, R) at points X, with the modulation rates of ``st``."""
    if not st.prof.ell1_negligible():
        raise NotImplementedError("residual with a nonzero l = 1 correction")
    Y, D = st.Y, st.D
    R = np.zeros(X.shape[:-1], complex)
    lin = np.zeros_like(R)
    phi = np.zeros(X.shape[:-1])
    for j in st.active:
        ev, _ = st.evals[j]
        a, b, lam, gam = _unpack(Y, j)
        a_dot, b_dot, lam_dot, gam_dot = _unpack(D, j)
        rho, yhat = _geometry(X, a, lam)
        V, dV, lapV, Vt, Phi = ev(rho)
        E = np.exp(1j * (X @ b - gam)) / lam**2
        rho_dot = -(yhat @ a_dot) / lam - rho * lam_dot / lam
        dt_part = -2 * lam_dot / lam * V + dV * rho_dot + Vt + 1j * (-gam_dot + X @ b_dot) * V
        lap_part = lapV / lam**2 + 2j / lam * dV * (yhat @ b) - (b @ b) * V
        lin += E * (1j * dt_part + lap_part)
        R += E * V
        phi += Phi / lam**2
    return lin - phi * R, R


# --- public API ------------------------------------------------------------------
def _check_layout(s: ModState, grid: Grid3D | None, gs: GroundState, solitons):
    lam_max = max(s.lambda1, s.lambda2)
    if len(solitons) == 2 and np.linalg.norm(s.alpha) < 10 * lam_max:
        warnings.warn(f"solitons overlap: |alpha| = {np.linalg.norm(s.alpha):.3g} < 10 max(lambda)",
                      RuntimeWarning, stacklevel=3)
    if grid is None:
        return
    from .groundstate import tail_fraction
    for j in solitons:
        a, _, lam, _ = s.soliton(j)
        frac = tail_fraction(gs, grid, a, lam)
        if frac > 1e-10:
            warnings.warn(f"soliton {j} too close to the box faces: tail mass {frac:.2e}",
                          RuntimeWarning, stacklevel=3)


def grid_points(grid: Grid3D, shift=(0.0, 0.0, 0.0), slab=slice(None)) -> np.ndarray:
    """Node coordinates (n_slab, n, n, 3) of ``grid`` translated by ``shift``."""
    x = grid.x
    sh = np.asarray(shift, float)
    xs = x[slab] + sh[0]
    X = np.empty((xs.size, x.size, x.size, 3))
    X[..., 0] = xs[:, None, None]
    X[..., 1] = (x + sh[1])[None, :, None]
    X[..., 2] = (x + sh[2])[None, None, :]
    return X


def assemble_R(prof: SolitonProfile, s: ModState, grid: Grid3D, solitons=(1, 2)) -> Field3D:
    """R^(N) sampled on ``grid`` (single-soliton assembly when one index is given)."""
    _check_layout(s, grid, prof.base, solitons)
    st = _prepare(prof, s, None, solitons)
    return Field3D(grid, _field_points(st, grid_points(grid)))


def time_derivative(prof: SolitonProfile, s: ModState, X, c: CouplingConstants | None = None,
                    solitons=(1, 2)) -> np.ndarray:
    """dR/dt at points X by the chain rule through the modulation rates."""
    st = _prepare(prof, s, c, solitons)
    Y, D = st.Y, st.D
    out = np.zeros(X.shape[:-1], complex)
    for j in st.active:
        ev, _ = st.evals[j]
        a, b, lam, gam = _unpack(Y, j)
        a_dot, b_dot, lam_dot, gam_dot = _unpack(D, j)
        rho, yhat = _geometry(X, a, lam)
        V, dV, _, Vt, _ = ev(rho)
        rho_dot = -(yhat @ a_dot) / lam - rho * lam_dot / lam
        E = np.exp(1j * (X @ b - gam)) / lam**2
        out += E * (-2 * lam_dot / lam * V + dV * rho_dot + Vt + 1j * (-gam_dot + X @ b_dot) * V)
    return out


def residual_points(prof: SolitonProfile, s: ModState, X, c: CouplingConstants | None = None,
                    solitons=(1, 2), system: str | None = None) -> np.ndarray:
    st = _prepare(prof, s, c, solitons, system)
    return _residual_points(st, X)[0]


@dataclass
class ResidualReport:
    order: int
    alpha_norm: float
    weighted_sup: float
    l2_norm: float
    sup: float
    weight_rate: float


def residual(prof: SolitonProfile, s: ModState, c: CouplingConstants | None = None,
             window_n: int = 128, window_L: float = 16.0, solitons=(1, 2),
             system: str | None = None, weight_rate: float = 0.5, core_radius: float = 5.0,
             slab: int = 16) -> ResidualReport:
    """Residual norms on cubic windows centered on each soliton.

    weighted_sup = sup |res| exp(weight_rate * dist) over the cores
    dist <= core_radius, dist being the distance to the nearest soliton
    center.  Outside a fixed core the weighted residual picks up the
    breakdown of the partner's multipole expansion near the midpoint, which
    is exponentially small in |alpha| rather than a power of it.  The L^2
    norm covers the whole windows and counts every point once by keeping,
    in each window, only the points nearer to that window's soliton.
    """
    if window_L < 2 * core_radius:
        raise ValueError("windows must contain the cores (window_L >= 2 core_radius)")
    _check_layout(s, None, prof.base, solitons)
    st = _prepare(prof, s, c, solitons, system)
    win = Grid3D(window_n, window_L)
    centers = [s.soliton(j)[0] for j in st.active]
    wsup = sup = l2 = 0.0
    for jc, ctr in zip(st.active, centers):
        for i0 in range(0, window_n, slab):
            X = grid_points(win, ctr, slice(i0, i0 + slab))
            res = np.abs(_residual_points(st, X)[0])
            dists = np.stack([np.linalg.norm(X - cc, axis=-1) for cc in centers])
            dmin = dists.min(axis=0)
            core = dmin <= core_radius
            if np.any(core):
                wsup = max(wsup, float(np.max(res[core] * np.exp(weight_rate * dmin[core]))))
            sup = max(sup, float(np.max(res)))
            own = dists[st.active.index(jc)] <= dmin
            l2 += float(np.sum(res[own] ** 2)) * win.dV
    return ResidualReport(prof.order, float(np.linalg.norm(s.alpha)), wsup, float(np.sqrt(l2)),
                          sup, weight_rate)


def residual_spectral(prof: SolitonProfile, s: ModState, grid: Grid3D,
                      c: CouplingConstants | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Global-grid residual with a spectral Laplacian and the 3D Poisson solve.

    Returns (spectral residual, pointwise residual) on ``grid`` for comparison.
    """
    st = _prepare(prof, s, c)
    X = grid_points(grid)
    pointwise, R = _residual_points(st, X)
    dR = time_derivative(prof, s, X, c)
    phi = solve_potential(grid, np.abs(R) ** 2, check_compact=False)
    spectral = 1j * dR + spectral_laplacian(grid, R) - phi * R
    return spectral, pointwise


def finite_difference_check(prof: SolitonProfile, s: ModState, X, dt: float = 1e-5,
                            c: CouplingConstants | None = None) -> float:
    """Relative gap between the chain-rule dR/dt and a centered difference."""
    from scipy.integrate import solve_ivp

    c = c or prof.couplings()
    y0 = s.to_vector()
    f = lambda t, y: derivative_vector(y, c, prof.refined)
    sol = solve_ivp(f, (-dt, dt), y0, method="DOP853", rtol=1e-13, atol=1e-15,
                    dense_output=True)
    Rp = _field_points(_prepare(prof, ModState.from_vector(sol.sol(dt)), c), X)
    Rm = _field_points(_prepare(prof, ModState.from_vector(sol.sol(-dt)), c), X)
    fd = (Rp - Rm) / (2 * dt)
    exact = time_derivative(prof, s, X, c)
    return float(np.max(np.abs(fd - exact)) / np.max(np.abs(exact)))


def cross_term_ratio(prof: SolitonProfile, s: ModState, grid: Grid3D) -> dict:
    """Size of 2 phi_{Re(R1 conj R2)} (R1 + R2) against the order-1 dipole error."""
    st = _prepare(prof, s, None)
    X = grid_points(grid)
    st1 = _prepare(prof, s, None, (1,))
    st2 = _prepare(prof, s, None, (2,))
    R1 = _field_points(st1, X)
    R2 = _field_points(st2, X)
    cross = 2 * np.real(R1 * np.conj(R2))
    phi_x = solve_potential(grid, cross, check_compact=False)
    term = np.max(np.abs(2 * phi_x * (R1 + R2)))
    # dipole error: the part of the other soliton's field beyond its monopole
    alpha = st.Y[A2] - st.Y[A1]
    g = prof.base.g
    dipole = g / np.linalg.norm(alpha) ** 2 * np.max(np.abs(R1))
    return {"cross": float(term), "dipole": float(dipole), "ratio": float(term / dipole)}


# --- order scan -----------------------------------------------------------------
def scaled_state(s: ModState, separation: float) -> ModState:
    """Same configuration with the centers moved apart to |alpha| = separation."""
    mid = 0.5 * (s.alpha1 + s.alpha2)
    u = s.alpha / np.linalg.norm(s.alpha)
    return s.replace(alpha1=mid - 0.5 * separation * u, alpha2=mid + 0.5 * separation * u)


def default_scan_state() -> ModState:
    """Generic (non-symmetric) configuration used by the order scan."""
    u = np.array([1.0, 0.6, 0.3])
    u /= np.linalg.norm(u)
    return ModState(-10 * u, 10 * u, [0.12, -0.2, 0.05], [-0.15, 0.1, 0.18],
                    lambda1=1.0, lambda2=1.25, gamma1=0.3, gamma2=-0.7)


def order_scan(gs: GroundState, separations=(20, 30, 45, 67), orders=(0, 1, 2),
               state: ModState | None = None, window_n: int = 128, window_L: float = 16.0,
               corrections: CorrectionSet | None = None) -> dict:
    """Weighted residual against separation for each order, with fitted slopes."""
    state = state or default_scan_state()
    corrections = corrections or build_corrections(gs)
    rows, slopes = [], {}
    for N in orders:
        prof = SolitonProfile(gs, corrections if N else None, N)
        vals = []
        for d in separations:
            rep = residual(prof, scaled_state(state, d), window_n=window_n, window_L=window_L)
            rows.append(rep)
            vals.append(rep.weighted_sup)
            log.info("order %d |alpha|=%g weighted residual %.3e", N, d, rep.weighted_sup)
        slopes[N] = float(np.polyfit(np.log(separations), np.log(vals), 1)[0])
    return {"rows": rows, "slopes": slopes}


def write_scan_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "alpha_norm", "weighted_sup", "l2_norm"])
        for r in rows:
            w.writerow([r.order, repr(r.alpha_norm), repr(r.weighted_sup), repr(r.l2_norm)])
