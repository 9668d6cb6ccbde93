"""Modulation dynamics of two interacting solitons.

State vector layout (16 reals): alpha1(3), alpha2(3), beta1(3), beta2(3),
lambda1, lambda2, gamma1, gamma2.  With alpha = alpha2 - alpha1 and
beta = beta2 - beta1 the leading (Kepler) law reads

    d alpha_j/dt = 2 beta_j
    d beta_1/dt  =  (g/lambda_2) alpha/|alpha|^3
    d beta_2/dt  = -(g/lambda_1) alpha/|alpha|^3
    d gamma_j/dt = -1/lambda_j^2 + |beta_j|^2 + (d beta_j/dt) . alpha_j

The sign of the last phase term is the one that cancels the x-independent
part of i d/dt exp(i beta_j . x) for the phase convention exp(-i gamma + i beta.x).

The refined order-2 system adds the scale drift

    d lambda_j/dt = m2 lambda_j^3/lambda_{j+1} (alpha.beta)/|alpha|^3.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

log = logging.getLogger(__name__)

A1, A2, B1, B2 = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)
L1, L2, G1, G2 = 12, 13, 14, 15
NSTATE = 16


class Regime(str, enum.Enum):
    HYPERBOLIC = "Hyperbolic"
    PARABOLIC = "Parabolic"
    ELLIPTIC = "Elliptic"


class SingularConfiguration(ValueError):
    """alpha = 0: the two centers coincide."""


class CollisionError(RuntimeError):
    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


class NonContractionError(RuntimeError):
    """Picard iterates failed to contract; a larger T0 is needed."""


@dataclass(frozen=True)
class ModState:
    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    lambda1: float = 1.0
    lambda2: float = 1.0
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta1", "beta2"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, v)
        for name in ("lambda1", "lambda2", "gamma1", "gamma2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("scales lambda_j must be positive")

    @property
    def alpha(self) -> np.ndarray:
        return self.alpha2 - self.alpha1

    @property
    def beta(self) -> np.ndarray:
        return self.beta2 - self.beta1

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha1, self.alpha2, self.beta1, self.beta2,
                               [self.lambda1, self.lambda2, self.gamma1, self.gamma2]])

    @classmethod
    def from_vector(cls, y) -> "ModState":
        y = np.asarray(y, float)
        return cls(y[A1], y[A2], y[B1], y[B2], y[L1], y[L2], y[G1], y[G2])

    def soliton(self, j: int):
        """(alpha_j, beta_j, lambda_j, gamma_j) for j in {1, 2}."""
        if j == 1:
            return self.alpha1, self.beta1, self.lambda1, self.gamma1
        return self.alpha2, self.beta2, self.lambda2, self.gamma2

    def replace(self, **kw) -> "ModState":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else float(v))
                for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModState":
        return cls(**d)


@dataclass(frozen=True)
class CouplingConstants:
    """g multiplies the Kepler force; m2_const and b2_const the order-2 laws."""

    g: float
    m2_const: float = 0.0
    b2_const: float | None = None

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("coupling g must be positive")
        if self.b2_const is None:
            object.__setattr__(self, "b2_const", self.g)

    @classmethod
    def from_corrections(cls, corrections, test_mode: bool = False) -> "CouplingConstants":
        """Physical constants, or the g = 1 test mode with ratios preserved."""
        cs = corrections
        if test_mode:
            return cls(1.0, cs.m2_coeff / cs.g, cs.b2_coeff / cs.g)
        return cls(cs.g, cs.m2_coeff, cs.b2_coeff)


def derivative_vector(Y, c: CouplingConstants, refined: bool = False) -> np.ndarray:
    """Time derivative of state vectors of shape (..., 16)."""
    Y = np.asarray(Y, float)
    a1, a2, b1, b2 = Y[..., A1], Y[..., A2], Y[..., B1], Y[..., B2]
    l1, l2 = Y[..., L1], Y[..., L2]
    alpha = a2 - a1
    r = np.linalg.norm(alpha, axis=-1)
    if np.any(r == 0):
        raise SingularConfiguration("alpha = 0: coinciding soliton centers")
    F = alpha / r[..., None] ** 3
    k = c.b2_const if refined else c.g
    db1 = (k / l2)[..., None] * F
    db2 = -(k / l1)[..., None] * F
    out = np.empty_like(Y)
    out[..., A1] = 2 * b1
    out[..., A2] = 2 * b2
    out[..., B1] = db1
    out[..., B2] = db2
    if refined and c.m2_const != 0.0:
        ab = np.sum(alpha * (b2 - b1), axis=-1) / r**3
        out[..., L1] = c.m2_const * l1**3 / l2 * ab
        out[..., L2] = c.m2_const * l2**3 / l1 * ab
    else:
        out[..., L1] = 0.0
        out[..., L2] = 0.0
    out[..., G1] = -1 / l1**2 + np.sum(b1 * b1, axis=-1) + np.sum(db1 * a1, axis=-1)
    out[..., G2] = -1 / l2**2 + np.sum(b2 * b2, axis=-1) + np.sum(db2 * a2, axis=-1)
    return out


@dataclass(frozen=True)
class ModRate:
    """Time derivative of a ModState (same fields, no sign constraints)."""

    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    lambda1: float
    lambda2: float
    gamma1: float
    gamma2: float

    @classmethod
    def from_vector(cls, y) -> "ModRate":
        y = np.asarray(y, float)
        return cls(y[A1].copy(), y[A2].copy(), y[B1].copy(), y[B2].copy(),
                   float(y[L1]), float(y[L2]), float(y[G1]), float(y[G2]))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha1, self.alpha2, self.beta1, self.beta2,
                               [self.lambda1, self.lambda2, self.gamma1, self.gamma2]])


def rhs_kepler(s: ModState, c: CouplingConstants) -> ModRate:
    return ModRate.from_vector(derivative_vector(s.to_vector(), c, False))


def rhs_refined(s: ModState, c: CouplingConstants) -> ModRate:
    return ModRate.from_vector(derivative_vector(s.to_vector(), c, True))


def energy_E0(s, c: CouplingConstants) -> float:
    """E0 = |beta|^2 - g (1/lambda_1 + 1/lambda_2)/|alpha|."""
    Y = s.to_vector() if isinstance(s, ModState) else np.asarray(s)
    return _E0(Y, c)


def _E0(Y, c):
    alpha = Y[..., A2] - Y[..., A1]
    beta = Y[..., B2] - Y[..., B1]
    r = np.linalg.norm(alpha, axis=-1)
    if np.any(r == 0):
        raise SingularConfiguration("alpha = 0")
    return np.sum(beta * beta, axis=-1) - c.g * (1 / Y[..., L1] + 1 / Y[..., L2]) / r


def classify(s, c: CouplingConstants, deadband: float = 1e-12) -> Regime:
    e = energy_E0(s, c)
    if abs(e) <= deadband:
        return Regime.PARABOLIC
    return Regime.HYPERBOLIC if e > 0 else Regime.ELLIPTIC


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    Y: np.ndarray
    E0: np.ndarray
    tag: Regime
    info: dict = field(default_factory=dict)
    sol: object = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def state(self, i: int) -> ModState:
        return ModState.from_vector(self.Y[i])

    def alpha(self) -> np.ndarray:
        return self.Y[:, A2] - self.Y[:, A1]

    def separation(self) -> np.ndarray:
        return np.linalg.norm(self.alpha(), axis=1)

    def to_csv(self, path) -> None:
        head = (["t"] + [f"alpha1_{i}" for i in "xyz"] + [f"alpha2_{i}" for i in "xyz"]
                + [f"beta1_{i}" for i in "xyz"] + [f"beta2_{i}" for i in "xyz"]
                + ["lambda1", "lambda2", "gamma1", "gamma2", "E0"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for ti, yi, ei in zip(self.t, self.Y, self.E0):
                w.writerow([repr(float(v)) for v in (ti, *yi, ei)])


# --- forward integration -------------------------------------------------------
def integrate(s0: ModState, c: CouplingConstants, t0: float, t1: float, tol: float = 1e-10,
              refined: bool = False, t_eval=None, n_samples: int = 1001,
              sampling: str = "linear") -> TrajectoryRecord:
    """Adaptive Dormand-Prince 5(4) integration with dense output."""
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-13, 1e-6], got {tol}")

    def f(t, y):
        return derivative_vector(y, c, refined)

    def collide(t, y):
        return np.linalg.norm(y[A2] - y[A1]) - 1e-3
    collide.terminal = True

    sol = solve_ivp(f, (t0, t1), s0.to_vector(), method="RK45", rtol=tol, atol=tol * 1e-3,
                    dense_output=True, events=collide)
    tag = classify(s0, c)
    t_end = sol.t[-1]
    if t_eval is None:
        if sampling == "log" and t0 > 0:
            t_eval = np.geomspace(t0, t_end, n_samples)
        else:
            t_eval = np.linspace(t0, t_end, n_samples)
    t_eval = np.asarray(t_eval, float)
    t_eval = t_eval[t_eval <= t_end]
    Y = sol.sol(t_eval).T
    rec = TrajectoryRecord(t_eval, Y, _E0(Y, c), tag, {"nfev": sol.nfev}, sol)
    if sol.status == 1:
        raise CollisionError(f"collision approach at t={t_end:.6g}", rec)
    if sol.status < 0:
        raise RuntimeError(sol.message)
    return rec


def kepler_period(s: ModState, c: CouplingConstants) -> float:
    """Period of a bound Kepler orbit from the third law."""
    e0 = energy_E0(s, c)
    if e0 >= 0:
        raise ValueError("orbit is not bound")
    mu = 2 * c.g * (1 / s.lambda1 + 1 / s.lambda2)
    a = mu / (4 * -e0)
    return 2 * np.pi * np.sqrt(a**3 / mu)


def return_time(s0: ModState, c: CouplingConstants, tol: float = 1e-12) -> float:
    """Numerical period: second upward crossing of alpha.beta = 0 (same apsis)."""
    guess = kepler_period(s0, c)

    def radial(t, y):
        return np.dot(y[A2] - y[A1], y[B2] - y[B1])
    radial.direction = 1

    sol = solve_ivp(lambda t, y: derivative_vector(y, c), (0, 2.5 * guess), s0.to_vector(),
                    method="RK45", rtol=tol, atol=tol * 1e-3, events=radial)
    ev = sol.t_events[0]
    ev = ev[ev > 1e-9 * guess]
    if ev.size < 2:
        raise RuntimeError("no recurrence found")
    return float(ev[1] - ev[0])


# --- asymptotic targets ----------------------------------------------------------
class HyperbolicTarget:
    """Kepler solution P_inf through a reference state at time t_ref."""

    def __init__(self, s_ref: ModState, c: CouplingConstants, t_ref: float):
        self.s_ref, self.c, self.t_ref = s_ref, c, t_ref
        if classify(s_ref, c) != Regime.HYPERBOLIC:
            raise ValueError("reference state is not hyperbolic")
        self._sol = None

    def _ensure(self, t_max):
        if self._sol is None or self._sol.t[-1] < t_max:
            self._sol = solve_ivp(lambda t, y: derivative_vector(y, self.c),
                                  (self.t_ref, t_max), self.s_ref.to_vector(), method="DOP853",
                                  rtol=1e-13, atol=1e-14, dense_output=True)

    def states(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        self._ensure(t.max())
        return self._sol.sol(t).T

    def derivs(self, t) -> np.ndarray:
        return derivative_vector(self.states(t), self.c)


@dataclass(frozen=True)
class ParabolicConstants:
    """Constants of the planar reduced system

        alpha'' = -c0 alpha/|alpha|^3 + c1 alpha/|alpha|^4 + 2 c2 (lam - lam_inf) alpha/|alpha|^3
        lam'    = c3 (alpha . beta)/|alpha|^3,   r^2 theta' = a0.
    """

    c0: float
    c1: float
    c2: float
    c3: float
    a0: float
    lambda_inf: float = 1.0

    @property
    def c4(self) -> float:
        return self.c1 - self.c2 * self.c3

    @property
    def omega(self) -> float:
        w2 = 1 + self.c4 / self.a0**2
        if w2 <= 0:
            raise ValueError("reduced orbit is not parabolic-like (1 + c4/a0^2 <= 0)")
        return float(np.sqrt(w2))


def derive_parabolic_constants(c: CouplingConstants, lambda_inf: float, a0: float,
                               c1: float = 0.0) -> ParabolicConstants:
    """Leading constants of the reduced system implied by the refined N = 2 laws.

    Expanding 1/lambda around lambda_inf in the force and lambda^2 in the
    scale drift gives c0 = 4 b2/lambda_inf, c2 = 2 b2/lambda_inf^2 and
    c3 = m2 lambda_inf^2; c1 has no order-2 source and stays an input.
    """
    b2 = c.b2_const
    return ParabolicConstants(4 * b2 / lambda_inf, c1, 2 * b2 / lambda_inf**2,
                              c.m2_const * lambda_inf**2, a0, lambda_inf)


class PolarOrbit:
    """Outgoing branch of the reduced orbit parametrized by theta in (-pi/omega, 0).

    u = 1/r solves a0^2 (u'' + u) = c0 - c4 u with u(0) = u'(0) = 0, so
    u = c0/(a0^2 w^2) (1 - cos(w theta)).  Time follows from dt/dtheta = 1/(a0 u^2),
    normalized so that t - A|theta|^-3 - B|theta|^-1 -> 0 as theta -> 0-.
    ``kepler=True`` gives the pure Kepler parabola (c4 = 0, lambda fixed).
    """

    def __init__(self, pc: ParabolicConstants, kepler: bool = False, n: int = 20001):
        if pc.a0 == 0:
            raise ValueError("angular momentum a0 = 0 gives a degenerate radial orbit")
        self.pc, self.kepler = pc, kepler
        self.w = 1.0 if kepler else pc.omega
        a0, c0, w = pc.a0, pc.c0, self.w
        self.K = c0 / (a0**2 * w**2)
        self.A = 4 * a0**3 / (3 * c0**2)
        self.B = 2 * a0**3 * w**2 / (3 * c0**2)
        # regular part of t(theta) on [theta_min, 0]
        self.theta_min = -0.9 * np.pi / w
        th = np.linspace(self.theta_min, 0.0, n)
        reg = self._regular_integrand(th)
        cum = cumulative_simpson(reg, x=th, initial=0.0)
        self._reg = CubicSpline(th, cum[-1] - cum)

    def u(self, th):
        return 2 * self.K * np.sin(0.5 * self.w * th) ** 2

    def du(self, th):
        return self.K * self.w * np.sin(self.w * th)

    def _regular_integrand(self, th):
        """1/(a0 u^2) minus its two singular terms, as C w^4/16 h(w theta/2)."""
        z = 0.5 * self.w * np.asarray(th, float)
        h = np.empty_like(z)
        small = np.abs(z) < 0.05
        zb = z[~small]
        h[~small] = 1 / np.sin(zb) ** 4 - 1 / zb**4 - 2 / (3 * zb**2)
        h[small] = 11 / 45 + 62 / 945 * z[small] ** 2
        return 3 * self.A * self.w**4 / 16 * h

    def t_of_theta(self, th):
        th = np.asarray(th, float)
        a = np.abs(th)
        # the regular part is integrated from theta to 0, hence the sign
        return self.A / a**3 + self.B / a - self._reg(th)

    def theta_of_t(self, t):
        t = np.atleast_1d(np.asarray(t, float))
        out = np.empty_like(t)
        t_lo = float(self.t_of_theta(self.theta_min))
        for i, ti in enumerate(t):
            if ti <= t_lo:
                raise ValueError(f"t={ti} precedes the tabulated branch (t > {t_lo:.3g})")
            guess = -(self.A / ti) ** (1 / 3)
            lo = max(self.theta_min, 4 * guess)
            hi = guess / 4
            out[i] = brentq(lambda x: self.t_of_theta(x) - ti, lo, hi, xtol=1e-15, rtol=1e-15)
        return out

    def lam(self, th):
        if self.kepler:
            return np.full_like(np.asarray(th, float), self.pc.lambda_inf)
        return self.pc.lambda_inf - 0.5 * self.pc.c3 * self.u(th)

    def states(self, t, gamma0: float = 0.0) -> np.ndarray:
        """Symmetric two-soliton states alpha_2 = -alpha_1 = alpha/2 (gamma left at gamma0)."""
        th = self.theta_of_t(t)
        a0 = self.pc.a0
        u, du = self.u(th), self.du(th)
        r = 1 / u
        er = np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)
        et = np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)
        alpha = r[:, None] * er
        alpha_dot = (-a0 * du)[:, None] * er + (a0 * u)[:, None] * et
        beta = alpha_dot / 2
        Y = np.zeros((th.size, NSTATE))
        Y[:, A1], Y[:, A2] = -alpha / 2, alpha / 2
        Y[:, B1], Y[:, B2] = -beta / 2, beta / 2
        Y[:, L1] = Y[:, L2] = self.lam(th)
        Y[:, G1] = Y[:, G2] = gamma0
        return Y

    def derivs(self, t, Y=None) -> np.ndarray:
        """Time derivative of ``states`` from the reduced law itself."""
        if Y is None:
            Y = self.states(t)
        pc = self.pc
        alpha = Y[:, A2] - Y[:, A1]
        beta = Y[:, B2] - Y[:, B1]
        r = np.linalg.norm(alpha, axis=1)
        lam = Y[:, L1]
        if self.kepler:
            acc = (-pc.c0 / r**3)[:, None] * alpha
            dlam = np.zeros_like(r)
        else:
            acc = ((-pc.c0 + 2 * pc.c2 * (lam - pc.lambda_inf)) / r**3 + pc.c1 / r**4)[:, None] * alpha
            dlam = pc.c3 * np.sum(alpha * beta, axis=1) / r**3
        D = np.zeros_like(Y)
        D[:, A1], D[:, A2] = 2 * Y[:, B1], 2 * Y[:, B2]
        D[:, B1], D[:, B2] = -acc / 4, acc / 4
        D[:, L1] = D[:, L2] = dlam
        return D


class ParabolicTarget:
    """Kepler parabola P_inf together with the reduced orbit P_app of the same (a0, c0)."""

    def __init__(self, pc: ParabolicConstants):
        self.pc = pc
        self.kepler = PolarOrbit(pc, kepler=True)
        self.app = PolarOrbit(pc, kepler=False)

    def states(self, t):
        return self.kepler.states(t)


# --- parabolic reduction -----------------------------------------------------
def parabolic_reduction(pc: ParabolicConstants, t_start: float = 10.0, t_end: float = 1e6,
                        n_samples: int = 400, rtol: float = 1e-12) -> dict:
    """Integrate the planar reduced system and compare with its asymptotics.

    Initial data are taken on the outgoing branch at ``t_start``; the system
    alpha'' = ..., lam' = ... is then integrated in Cartesian form so that
    r^2 theta' and the lambda-u relation are genuine checks.
    """
    if pc.a0 == 0:
        raise ValueError("angular momentum a0 = 0 gives a degenerate radial orbit")
    orbit = PolarOrbit(pc)
    y0 = orbit.states(np.array([t_start]))[0]
    alpha0 = y0[A2] - y0[A1]
    v0 = 2 * (y0[B2] - y0[B1])

    def f(t, y):
        a, v, lam = y[0:2], y[2:4], y[4]
        r = np.hypot(a[0], a[1])
        acc = ((-pc.c0 + 2 * pc.c2 * (lam - pc.lambda_inf)) / r**3 + pc.c1 / r**4) * a
        dlam = pc.c3 * np.dot(a, v / 2) / r**3
        return [v[0], v[1], acc[0], acc[1], dlam]

    sol = solve_ivp(f, (t_start, t_end), [alpha0[0], alpha0[1], v0[0], v0[1], y0[L1]],
                    method="DOP853", rtol=rtol, atol=1e-14, dense_output=True)
    t = np.geomspace(t_start, t_end, n_samples)
    ax, ay, vx, vy, lam = sol.sol(t)
    r = np.hypot(ax, ay)
    theta = np.arctan2(ay, ax)
    ang = ax * vy - ay * vx
    lock = lam - pc.lambda_inf + 0.5 * pc.c3 / r
    c0 = pc.c0
    return {
        "t": t, "r": r, "theta": theta, "lambda": lam,
        "r_pred": (4.5 * c0) ** (1 / 3) * t ** (2 / 3),
        "theta_pred": -(4 * pc.a0**3 / (3 * c0**2 * t)) ** (1 / 3),
        "lambda_pred": pc.lambda_inf - pc.c3 * (4.5 * c0) ** (-1 / 3) * t ** (-2 / 3),
        "angular_momentum": ang,
        "angular_momentum_drift": float(np.max(np.abs(ang / pc.a0 - 1))),
        "lock_residual": float(np.max(np.abs(lock))),
        "r_ratio_final": float(r[-1] / ((4.5 * c0) ** (1 / 3) * t[-1] ** (2 / 3))),
    }


# --- integration from infinity -------------------------------------------------
# leading decay powers p (integrand ~ t^-p) of the three tail integrands;
# hyperbolic: lambda' ~ t^-2, beta' ~ dlambda/t^2, beta - beta_ref ~ t^-2;
# parabolic (r ~ t^(2/3)): second-order mismatches of the reduced law
_TAIL_POWERS = {
    Regime.HYPERBOLIC: {"lambda": 2.0, "beta": 3.0, "alpha": 2.0},
    Regime.PARABOLIC: {"lambda": 7 / 3, "beta": 8 / 3, "alpha": 5 / 3},
}


def _tail_integral(t, f, p: float):
    """I(t_i) = int_{t_i}^inf f on a geometric grid, with an f ~ t^-p tail past t[-1]."""
    s = np.log(t)
    cum = cumulative_simpson(f * t[:, None], x=s, axis=0, initial=0.0)
    return cum[-1][None, :] - cum + (f[-1] * t[-1] / (p - 1))[None, :]


def _fit_exponent(t, d, frac: float = 0.5):
    k0 = int((1 - frac) * t.size)
    sel = d[k0:] > 0
    if sel.sum() < 3:
        return -np.inf
    return float(np.polyfit(np.log(t[k0:][sel]), np.log(d[k0:][sel]), 1)[0])


def integrate_from_infinity(target, c: CouplingConstants, T0: float, regime: Regime,
                            refined: bool = True, T_ratio: float = 100.0, n_t: int = 2001,
                            tol: float = 1e-10, max_iter: int = 80) -> TrajectoryRecord:
    """Fixed point of the integral maps Gamma on [T0, T_ratio*T0].

    Hyperbolic: the reference is the Kepler solution P_inf and
        Gamma beta_j  = beta_j^inf  + int_t^inf (B_j(P_inf) - B_j(P))
        Gamma lam_j   = lam_j^inf   - int_t^inf M_j(P)
        Gamma alpha_j = alpha_j^inf - int_t^inf 2 (beta_j - beta_j^inf)
    One sweep applies the lambda, beta and alpha maps in turn (Gauss-Seidel
    order), so that a perturbation of lambda reaches alpha within one sweep.
    Parabolic: the same maps around the reduced orbit P_app, whose scale
    and force already carry the leading order-2 corrections; deviations are
    reported against the Kepler parabola P_inf with the same (a0, c0).
    """
    regime = Regime(regime)
    t = T0 * T_ratio ** np.linspace(0.0, 1.0, n_t)
    if regime == Regime.HYPERBOLIC:
        ref_Y = target.states(t)
        ref_D = target.derivs(t)
        inf_Y = ref_Y
    elif regime == Regime.PARABOLIC:
        pc = target.pc
        if abs(c.b2_const * 4 / pc.lambda_inf - pc.c0) > 1e-12 * pc.c0:
            raise ValueError("parabolic constants do not match the coupling")
        ref_Y = target.app.states(t)
        ref_D = target.app.derivs(t, ref_Y)
        inf_Y = target.kepler.states(t)
    else:
        raise ValueError("integration from infinity needs a hyperbolic or parabolic target")

    powers = _TAIL_POWERS[regime]

    def _tail(name, f):
        return _tail_integral(t, f, powers[name])

    P = ref_Y.copy()
    beta_idx = np.r_[6:12]
    lam_idx = np.r_[12:14]
    alpha_idx = np.r_[0:6]
    dists, ratios = [], []
    for it in range(1, max_iter + 1):
        # sweep lambda -> beta -> alpha so each map sees the freshest iterate
        new = P.copy()
        D = derivative_vector(new, c, refined)
        new[:, lam_idx] = ref_Y[:, lam_idx] + _tail(
            "lambda", ref_D[:, lam_idx] - D[:, lam_idx])
        D = derivative_vector(new, c, refined)
        new[:, beta_idx] = ref_Y[:, beta_idx] + _tail(
            "beta", ref_D[:, beta_idx] - D[:, beta_idx])
        new[:, alpha_idx] = ref_Y[:, alpha_idx] - _tail(
            "alpha", 2 * (new[:, beta_idx] - ref_Y[:, beta_idx]))
        d = float(np.max(np.abs(new[:, :14] - P[:, :14])))
        P = new
        dists.append(d)
        if len(dists) > 1 and dists[-2] > 1e-13:
            ratios.append(d / dists[-2])
            if ratios[-1] > 0.9 and d > tol:
                raise NonContractionError(
                    f"Picard iterates not contracting at T0={T0:g} (ratio {ratios[-1]:.3f});"
                    " increase T0")
        if d < tol:
            break
    else:
        raise NonContractionError(f"no convergence after {max_iter} iterations at T0={T0:g}")

    # phases follow from the phase law, started from the reference phase at T0
    D = derivative_vector(P, c, refined)
    for gi in (G1, G2):
        P[:, gi] = ref_Y[0, gi] + cumulative_simpson(D[:, gi], x=t, initial=0.0)

    dev_alpha = np.linalg.norm(P[:, alpha_idx] - inf_Y[:, alpha_idx], axis=1)
    dev_beta = np.linalg.norm(P[:, beta_idx] - inf_Y[:, beta_idx], axis=1)
    dev_lam = np.max(np.abs(P[:, lam_idx] - inf_Y[:, lam_idx]), axis=1)
    info = {
        "iterations": len(dists), "distances": dists, "ratios": ratios,
        "max_ratio": max(ratios) if ratios else 0.0, "tail_powers": powers,
        "dev_alpha": dev_alpha, "dev_beta": dev_beta, "dev_lambda": dev_lam,
        "exp_alpha": _fit_exponent(t, dev_alpha), "exp_beta": _fit_exponent(t, dev_beta),
        "exp_lambda": _fit_exponent(t, dev_lam),
        "exp_total": _fit_exponent(t, np.maximum.reduce([dev_alpha, dev_beta, dev_lam])),
    }
    log.info("integration from infinity: %d iterations, max ratio %.3g",
             info["iterations"], info["max_ratio"])
    return TrajectoryRecord(t, P, _E0(P, c), regime, info)
