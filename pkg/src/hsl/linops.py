"""Linearized operators around the ground state and their projected inverses.

    L+ f = -Lap f + f + phi_{Q^2} f + 2 phi_{Q f} Q
    L- f = -Lap f + f + phi_{Q^2} f

Both act sector by sector (l = 0 radial, l = 1 dipole).  The nonlocal term
phi_{Qf} is the sector potential of the density Q f, so inversion is done on
the coupled sparse system for (f, phi_{Qf}).  In sectors with a kernel (Q for
L- at l = 0, Q' for L+ at l = 1) the system is bordered with the
orthogonality constraint, which both removes the kernel and fixes the
solution uniquely.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .radial import RadialGrid, RadialProfile, derivative, laplacian, sector_potential

log = logging.getLogger(__name__)


class SolvabilityError(ValueError):
    """The right-hand side is not orthogonal to the operator kernel."""

    def __init__(self, msg, inner_product):
        super().__init__(msg)
        self.inner_product = inner_product


def _check_sector(ell):
    if ell not in (0, 1):
        raise ValueError(f"unsupported sector ell={ell}")


class SectorOperators:
    """L+ and L- for a fixed background (Q, phi_{Q^2}) on a radial grid."""

    def __init__(self, grid: RadialGrid, Q: np.ndarray, phi: np.ndarray):
        self.grid = grid
        self.Q = np.asarray(Q, float)
        self.phi = np.asarray(phi, float)
        self._lu = {}

    # --- application -----------------------------------------------------
    def apply_Lminus(self, f: np.ndarray, ell: int = 0) -> np.ndarray:
        _check_sector(ell)
        out = -(laplacian(self.grid, ell) @ f) + f + self.phi * f
        if ell == 1:
            out[0] = 0.0
        return out

    def apply_Lplus(self, f: np.ndarray, ell: int = 0) -> np.ndarray:
        out = self.apply_Lminus(f, ell)
        out = out + 2 * self.Q * sector_potential(self.grid, self.Q * f, ell)
        if ell == 1:
            out[0] = 0.0
        return out

    # --- kernels -----------------------------------------------------------
    def kernel(self, which: str, ell: int):
        """Kernel profile of L+/L- in a sector, or None."""
        if which == "minus" and ell == 0:
            return self.Q
        if which == "plus" and ell == 1:
            return derivative(self.grid, self.Q, parity=1)
        return None

    # --- inversion -------------------------------------------------------
    def _system(self, which: str, ell: int):
        key = (which, ell)
        if key in self._lu:
            return self._lu[key]
        g = self.grid
        m = g.m
        lap0 = laplacian(g, ell)
        a = (-lap0 + sp.identity(m) + sp.diags(self.phi)).tolil()
        blocks = [[a, None], [None, None]]
        if which == "plus":
            lap_h = laplacian(g, ell, harmonic_outer=True).tolil()
            if ell == 1:
                lap_h[0, :] = 0.0
                lap_h[0, 0] = -1.0
            blocks = [[a, sp.diags(2 * self.Q)], [sp.diags(self.Q), -lap_h]]
        else:
            blocks = [[a]]
        mat = sp.bmat(blocks, format="lil")
        if ell == 1:
            mat[0, :] = 0.0
            mat[0, 0] = 1.0
            if which == "plus":
                mat[m, :] = 0.0
                mat[m, m] = 1.0
        ker = self.kernel(which, ell)
        if ker is not None:
            n = mat.shape[0]
            col = np.zeros(n)
            col[:m] = ker
            row = np.zeros(n)
            row[:m] = g.weights(ell) * ker
            row = row / np.max(np.abs(row)) * np.max(np.abs(col))
            mat = sp.bmat([[mat, sp.csr_matrix(col[:, None])],
                           [sp.csr_matrix(row[None, :]), None]], format="csc")
        lu = spla.splu(sp.csc_matrix(mat))
        self._lu[key] = (lu, ker)
        return lu, ker

    def _solve(self, which: str, f: np.ndarray, ell: int, solv_tol: float) -> np.ndarray:
        _check_sector(ell)
        g = self.grid
        m = g.m
        f = np.asarray(f, float)
        lu, ker = self._system(which, ell)
        if ker is not None:
            w = g.weights(ell)
            ip = float(np.sum(w * f * ker))
            scale = np.sqrt(np.sum(w * f * f) * np.sum(w * ker * ker))
            if scale > 0 and abs(ip) > solv_tol * scale:
                raise SolvabilityError(
                    f"right side not orthogonal to kernel of L{'+' if which == 'plus' else '-'}"
                    f" (ell={ell}): inner product {ip:.3e}", ip)
        n = lu.shape[0]
        b = np.zeros(n)
        b[:m] = f
        if ell == 1:
            b[0] = 0.0
        return lu.solve(b)[:m]

    def solve_Lplus(self, f, ell: int = 0, solv_tol: float = 1e-6) -> np.ndarray:
        """Solve L+ u = f; at l = 1 the solution is orthogonal to Q'."""
        return self._solve("plus", f, ell, solv_tol)

    def solve_Lminus(self, f, ell: int = 0, solv_tol: float = 1e-6) -> np.ndarray:
        """Solve L- u = f; at l = 0 the solution is orthogonal to Q."""
        return self._solve("minus", f, ell, solv_tol)


def operators(gs) -> SectorOperators:
    """SectorOperators for a solved GroundState (cached on the object)."""
    ops = getattr(gs, "_ops", None)
    if ops is None:
        ops = SectorOperators(gs.Q.grid, gs.Q.values, gs.phi.values)
        object.__setattr__(gs, "_ops", ops)
    return ops


def apply_Lplus(gs, f: RadialProfile) -> RadialProfile:
    return f.with_values(operators(gs).apply_Lplus(f.values, f.ell))


def apply_Lminus(gs, f: RadialProfile) -> RadialProfile:
    return f.with_values(operators(gs).apply_Lminus(f.values, f.ell))


def solve_Lplus(gs, f: RadialProfile) -> RadialProfile:
    return f.with_values(operators(gs).solve_Lplus(f.values, f.ell))


def solve_Lminus(gs, f: RadialProfile) -> RadialProfile:
    return f.with_values(operators(gs).solve_Lminus(f.values, f.ell))


@dataclass(frozen=True)
class CorrectionSet:
    """Order-1 and order-2 profile corrections and modulation coefficients.

    Prefactor conventions, with c_j = lam_j^2 g / (lam_{j+1} |alpha|) and
    g = mass / (4 pi):

      T1_j      = c_j S                                  (S = T1_shape)
      Re T2_j   = c_j^2 A + d_j S,  d_j = 2 c_j c_{j+1} (S,Q)/mass
                  + (-1)^j lam_j^3/(lam_{j+1} |alpha|^2) (alpha_hat . y_hat) T2_real_ell1(|y|)
      Im T2_j   = (lam_j^4 / lam_{j+1}) (alpha.beta)/|alpha|^3 T2_imag
      m_j^(2)   = m2_coeff lam_j^3 / lam_{j+1} (alpha.beta)/|alpha|^3
      b_j^(2)   = (-1)^(j+1) b2_coeff / lam_{j+1} alpha/|alpha|^3

    With b2_coeff = g the dipole forcing cancels and T2_real_ell1 vanishes
    up to round-off; likewise m2_coeff = g makes the Im T2 forcing vanish,
    because Lambda Q = -2 S.
    """

    T1_shape: RadialProfile
    T2_real_A: RadialProfile
    T2_real_ell1: RadialProfile
    T2_imag: RadialProfile
    m2_coeff: float
    b2_coeff: float
    ip_SQ: float
    g: float
    mass: float
    solvability_im: float

    def constants(self) -> dict:
        return {"m2_const": self.m2_coeff, "b2_const": self.b2_coeff, "ip_SQ": self.ip_SQ}

    def export(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        r = self.T1_shape.grid.r
        for name in ("T1_shape", "T2_real_A", "T2_real_ell1", "T2_imag"):
            prof = getattr(self, name)
            np.savetxt(out / f"{name}.csv", np.column_stack([r, prof.values]),
                       delimiter=",", header="r,value", comments="", fmt="%.17g")
        (out / "corrections.json").write_text(json.dumps(self.constants(), indent=2, sort_keys=True))


def build_corrections(gs) -> CorrectionSet:
    """Solve for S, A and the order-2 modulation coefficients."""
    ops = operators(gs)
    grid = gs.Q.grid
    r = grid.r
    Q = gs.Q.values
    mass, g = gs.mass, gs.g
    w0, w1 = grid.weights(0), grid.weights(1)

    S = ops.solve_Lplus(Q, 0)
    ip_SQ = float(np.sum(w0 * S * Q))

    # radial part of Re T2 per unit c_j^2
    phi_QS = sector_potential(grid, Q * S, 0)
    phi_SS = sector_potential(grid, S * S, 0)
    A = ops.solve_Lplus(-2 * phi_QS * S - phi_SS * Q + S, 0)

    # dipole part: the force b2 must cancel the (alpha.y) Q forcing
    dQ = derivative(grid, Q, parity=1)
    rQ = r * Q
    b2 = g * float(np.sum(w1 * rQ * dQ)) / float(np.sum(w1 * rQ * dQ))
    rhs_re = (g - b2) * rQ
    # what survives is round-off along Q'; drop it before inverting
    rhs_re = rhs_re - np.sum(w1 * rhs_re * dQ) / np.sum(w1 * dQ * dQ) * dQ
    ell1 = ops.solve_Lplus(rhs_re, 1)

    # imaginary part: L- Im T2 = -2 g S - m2 Lambda Q must be orthogonal to Q
    lamQ = 2 * Q + r * dQ
    m2 = -2 * g * ip_SQ / float(np.sum(w0 * lamQ * Q))
    rhs_im = -2 * g * S - m2 * lamQ
    solv = float(np.sum(w0 * rhs_im * Q))
    rhs_im = rhs_im - solv / float(np.sum(w0 * Q * Q)) * Q
    imag = ops.solve_Lminus(rhs_im, 0)

    mk = lambda v, ell=0: RadialProfile(grid, v, ell)
    return CorrectionSet(
        T1_shape=mk(S), T2_real_A=mk(A), T2_real_ell1=mk(ell1, 1), T2_imag=mk(imag),
        m2_coeff=m2, b2_coeff=b2, ip_SQ=ip_SQ, g=g, mass=mass, solvability_im=solv,
    )
