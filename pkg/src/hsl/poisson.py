"""Free-space Poisson solve  Lap phi = rho,  phi = -1/(4 pi |x|) * rho.

The convolution runs on the doubled (zero-padded) domain, so the periodic
images of the FFT never reach the physical box.  Two kernel treatments are
available:

``"ewald"`` (default)
    The Green's function is split as -erf(r/a)/(4 pi r) - erfc(r/a)/(4 pi r).
    The smooth long-range part is sampled on the doubled grid (including its
    finite value at r = 0); the short-range part enters through its exact
    Fourier transform -(1 - exp(-k^2 a^2/4))/k^2.  With a = 4 dx the sampled
    part is band-limited to round-off, and the result is spectrally accurate.

``"cell_average"``
    The plain sampled kernel with the singular node replaced by the average
    of -1/(4 pi |x|) over one cell.  Second-order accurate; kept as the
    textbook reference.
"""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import erf

from .field import Grid3D, workers

# integral of 1/|x| over the unit cube centered at the origin
CUBE_INV_R = 3 * np.log(2 + np.sqrt(3)) - np.pi / 2


def _wrapped_axis(n2: int, dx: float) -> np.ndarray:
    i = np.arange(n2)
    return dx * np.minimum(i, n2 - i)


@lru_cache(maxsize=4)
def _kernel_hat(grid: Grid3D, kind: str) -> np.ndarray:
    n, dx = grid.n, grid.dx
    n2 = 2 * n
    try:
        d = _wrapped_axis(n2, dx)
        r = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
        if kind == "ewald":
            a = 4.0 * dx
            with np.errstate(invalid="ignore", divide="ignore"):
                G = -erf(r / a) / (4 * np.pi * r)
            G[0, 0, 0] = -1.0 / (2 * np.pi**1.5 * a)
        elif kind == "cell_average":
            with np.errstate(divide="ignore"):
                G = -1.0 / (4 * np.pi * r)
            G[0, 0, 0] = -CUBE_INV_R / (4 * np.pi * dx)
        else:
            raise ValueError(f"unknown kernel {kind!r}")
        del r
        Kh = sfft.rfftn(G, workers=workers()).real * dx**3
        del G
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate the doubled-domain buffers for n={n}") from exc
    if kind == "ewald":
        k = 2 * np.pi * np.fft.fftfreq(n2, d=dx)
        kz = 2 * np.pi * np.fft.rfftfreq(n2, d=dx)
        k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            short = -(1 - np.exp(-k2 * a * a / 4)) / k2
        short[0, 0, 0] = -a * a / 4
        Kh += short
    return Kh


def central_half_box_fraction(grid: Grid3D, rho: np.ndarray) -> float:
    """Fraction of |rho| lying outside the central half-box |x_i| < L/4."""
    inside = np.abs(grid.x) < grid.L / 4
    tot = np.sum(np.abs(rho))
    if tot == 0:
        return 0.0
    core = np.sum(np.abs(rho)[np.ix_(inside, inside, inside)])
    return float(1 - core / tot)


def solve_potential(grid: Grid3D, rho: np.ndarray, kernel: str = "ewald",
                    check_compact: bool = True) -> np.ndarray:
    """Free-space potential of a real density sampled on ``grid``.

    The transforms are pruned: zero padding is applied one axis at a time so
    that the all-zero blocks of the doubled array are never transformed.
    """
    rho = np.asarray(rho)
    if np.iscomplexobj(rho):
        raise TypeError("solve_potential expects a real density")
    if check_compact:
        frac = central_half_box_fraction(grid, rho)
        if frac > 1e-10:
            warnings.warn(f"source not compact: {frac:.2e} of its mass lies outside the"
                          " central half-box", RuntimeWarning, stacklevel=2)
    n = grid.n
    n2 = 2 * n
    w = workers()
    Kh = _kernel_hat(grid, kernel)
    a = sfft.rfft(rho, n=n2, axis=2, workers=w)
    a = sfft.fft(a, n=n2, axis=1, workers=w)
    a = sfft.fft(a, n=n2, axis=0, workers=w)
    a *= Kh
    a = sfft.ifft(a, axis=0, workers=w)[:n]
    a = sfft.ifft(a, axis=1, workers=w)[:, :n]
    return sfft.irfft(a, n=n2, axis=2, workers=w)[:, :, :n]


def gaussian_density(grid: Grid3D, mass: float, sigma: float, center=(0.0, 0.0, 0.0)):
    r = grid.radius(center)
    return mass * np.exp(-r * r / (2 * sigma**2)) / (2 * np.pi * sigma**2) ** 1.5


def gaussian_potential(grid: Grid3D, mass: float, sigma: float, center=(0.0, 0.0, 0.0)):
    """Exact free-space potential of ``gaussian_density``."""
    r = grid.radius(center)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = -mass * erf(r / (np.sqrt(2) * sigma)) / (4 * np.pi * r)
    phi[r == 0] = -mass / (4 * np.pi) * np.sqrt(2 / np.pi) / sigma
    return phi


def laplacian_residual(grid: Grid3D, rho: np.ndarray, phi: np.ndarray,
                       region: float = 0.25) -> float:
    """max |Lap phi - rho| over the central region |x_i| < region * L.

    The spectral Laplacian needs a periodic function, and phi itself decays
    only like 1/r.  The monopole is therefore carried by the exact potential
    of a Gaussian of equal mass placed at the center of mass, which also
    removes the dipole; the remainder is periodic to high accuracy.
    """
    mass = float(np.sum(rho) * grid.dV)
    X, Y, Z = grid.axes()
    com = [float(np.sum(a * rho) * grid.dV / mass) for a in (X, Y, Z)]
    sigma = 1.0
    ref_rho = gaussian_density(grid, mass, sigma, com)
    ref_phi = gaussian_potential(grid, mass, sigma, com)
    k2 = grid.k2
    lap = sfft.ifftn(-k2 * sfft.fftn(phi - ref_phi, workers=workers()), workers=workers()).real
    res = lap + ref_rho - rho
    inside = np.abs(grid.x) < region * grid.L
    return float(np.max(np.abs(res[np.ix_(inside, inside, inside)])))
