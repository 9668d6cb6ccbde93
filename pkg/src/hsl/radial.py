"""Radial grids, profiles and sector-wise finite-difference operators.

Functions of the form f(r) (angular sector l = 0) or f(r) cos(theta)
(sector l = 1) are sampled on a uniform grid 0 = r_0 < ... < r_{m-1} = r_max.
Derivatives use sixth-order central stencils.  Near the origin, values at
negative radius come from the sector parity (even for l = 0, odd for l = 1);
beyond r_max they are either zero or the decaying harmonic r^{-(l+1)}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

# sixth-order central stencils, offsets -3..3
_D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
_D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
_OFFSETS = np.arange(-3, 4)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on [0, r_max] with m nodes."""

    r_max: float = 40.0
    m: int = 8000

    def __post_init__(self):
        if self.r_max < 20:
            raise ValueError(f"r_max must be >= 20, got {self.r_max}")
        if self.m < 2000:
            raise ValueError(f"m must be >= 2000, got {self.m}")

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.m)

    @property
    def h(self) -> float:
        return self.r_max / (self.m - 1)

    def weights(self, ell: int = 0) -> np.ndarray:
        """Quadrature weights for the 3D inner product of two sector-l functions.

        The trapezoidal rule is spectrally accurate here: the integrand
        r^2 f g is even in r and decays at r_max.
        """
        w = np.full(self.m, self.h)
        w[0] = w[-1] = 0.5 * self.h
        ang = 4 * np.pi if ell == 0 else 4 * np.pi / 3
        return ang * self.r**2 * w


@dataclass
class RadialProfile:
    """A real function of radius sampled on a RadialGrid.

    ``ell`` records the angular sector: for ell = 1 the profile stands for
    values(r) * cos(theta) with respect to some fixed axis.
    """

    grid: RadialGrid
    values: np.ndarray
    ell: int = 0
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.m,):
            raise ValueError("profile length does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile has non-finite entries")
        if self.ell not in (0, 1):
            raise ValueError(f"unsupported sector ell={self.ell}")

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def inner(self, other: "RadialProfile") -> float:
        if other.ell != self.ell:
            return 0.0
        return float(np.sum(self.grid.weights(self.ell) * self.values * other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def __call__(self, rr, tail: str = "zero") -> np.ndarray:
        """Cubic-spline evaluation at arbitrary radii.

        tail="zero" returns 0 beyond r_max; tail="coulomb" continues as
        values[-1]*r_max/r (exterior monopole of a potential).
        """
        if self._spline is None:
            r = self.grid.r
            sign = 1.0 if self.ell == 0 else -1.0
            rr_full = np.concatenate([-r[:0:-1], r])
            vv_full = np.concatenate([sign * self.values[:0:-1], self.values])
            self._spline = CubicSpline(rr_full, vv_full)
        rr = np.asarray(rr, dtype=float)
        out = self._spline(np.minimum(rr, self.grid.r_max))
        outside = rr > self.grid.r_max
        if np.any(outside):
            if tail == "coulomb":
                out = np.where(outside, self.values[-1] * self.grid.r_max / np.maximum(rr, 1e-300), out)
            else:
                out = np.where(outside, 0.0, out)
        return out

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile(self.grid, values, self.ell)


def _stencil_matrix(grid: RadialGrid, coef: np.ndarray, parity: float, outer_ell) -> sp.csr_matrix:
    """Assemble a banded stencil with parity ghosts at 0 and an outer closure.

    ``outer_ell`` is None for zero ghosts beyond r_max, or an integer l for
    ghosts following the exterior harmonic r^{-(l+1)}.
    """
    m, r = grid.m, grid.r
    rows, cols, vals = [], [], []
    idx = np.arange(m)
    for off, c in zip(_OFFSETS, coef):
        if c == 0.0:
            continue
        j = idx + off
        inside = (j >= 0) & (j < m)
        rows.append(idx[inside]); cols.append(j[inside]); vals.append(np.full(inside.sum(), c))
        low = j < 0
        if np.any(low):
            rows.append(idx[low]); cols.append(-j[low]); vals.append(np.full(low.sum(), c * parity))
        high = j >= m
        if np.any(high) and outer_ell is not None:
            rj = r[-1] + (j[high] - (m - 1)) * grid.h
            fac = (r[-1] / rj) ** (outer_ell + 1)
            rows.append(idx[high]); cols.append(np.full(high.sum(), m - 1)); vals.append(c * fac)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )
    return mat.tocsr()


@lru_cache(maxsize=32)
def derivative_matrices(grid: RadialGrid, ell: int, harmonic_outer: bool = False):
    """First and second derivative matrices for sector ``ell``."""
    parity = 1.0 if ell == 0 else -1.0
    outer = ell if harmonic_outer else None
    d1 = _stencil_matrix(grid, _D1 / grid.h, parity, outer)
    d2 = _stencil_matrix(grid, _D2 / grid.h**2, parity, outer)
    return d1, d2


@lru_cache(maxsize=32)
def laplacian(grid: RadialGrid, ell: int, harmonic_outer: bool = False) -> sp.csr_matrix:
    """Sector Laplacian f'' + 2f'/r - l(l+1)f/r^2 as a sparse matrix.

    Row 0 holds the regular limit at the origin: 3 f''(0) for l = 0, and
    zero for l = 1 (odd functions have vanishing sector Laplacian at r = 0).
    """
    d1, d2 = derivative_matrices(grid, ell, harmonic_outer)
    r = grid.r
    inv_r = np.zeros_like(r)
    inv_r[1:] = 1.0 / r[1:]
    lap = d2 + sp.diags(2 * inv_r) @ d1 - sp.diags(ell * (ell + 1) * inv_r**2)
    lap = lap.tolil()
    if ell == 0:
        lap[0, :] = 3 * d2[0, :]
    else:
        lap[0, :] = 0.0
    return lap.tocsr()


@lru_cache(maxsize=16)
def _poisson_factor(grid: RadialGrid, ell: int):
    lap = laplacian(grid, ell, harmonic_outer=True).tolil()
    if ell == 1:
        lap[0, 0] = 1.0
    return spla.splu(lap.tocsc())


def sector_potential(grid: RadialGrid, rho: np.ndarray, ell: int = 0) -> np.ndarray:
    """Radial part of the free-space solution of Laplace(psi) = rho in sector ell.

    The density is rho(r) (ell = 0) or rho(r) cos(theta) (ell = 1); the
    returned psi carries the same angular factor and decays like r^{-(l+1)}.
    """
    b = np.array(rho, dtype=float)
    if ell == 1:
        b[0] = 0.0
    return _poisson_factor(grid, ell).solve(b)


def apply_laplacian(grid: RadialGrid, f: np.ndarray, ell: int = 0) -> np.ndarray:
    return laplacian(grid, ell) @ f


def derivative(grid: RadialGrid, f: np.ndarray, parity: int = 1) -> np.ndarray:
    """d f / d r for a function of given parity (+1 even, -1 odd)."""
    d1, _ = derivative_matrices(grid, 0 if parity > 0 else 1)
    return d1 @ f
