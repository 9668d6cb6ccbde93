"""Uniform periodic 3D grid, complex fields, spectral transforms, checkpoints.

Arrays are indexed values[i, j, k] with i along x, j along y, k along z.
The spectral convention is the unitary DFT (``norm="ortho"``), so
sum |f|^2 = sum |f_hat|^2 exactly and both sides carry the same dx^3.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

_WORKERS = [1]


def set_threads(n: int) -> None:
    """Cap the worker count used by the FFT kernels."""
    _WORKERS[0] = max(1, int(n))


def workers() -> int:
    return _WORKERS[0]


@dataclass(frozen=True)
class Grid3D:
    """Cubic box of side L with n points per axis, centered at the origin."""

    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {n}")
        if not self.L > 0:
            raise ValueError("box length must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dV(self) -> float:
        return self.dx**3

    @cached_property
    def x(self) -> np.ndarray:
        """1D node coordinates -L/2 + i dx."""
        return -0.5 * self.L + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """1D wavenumbers in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k2(self) -> np.ndarray:
        k = self.k
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2

    def axes(self, center=(0.0, 0.0, 0.0)):
        """Broadcastable coordinate arrays shifted by ``center``."""
        x = self.x
        c = np.asarray(center, float)
        return (x - c[0])[:, None, None], (x - c[1])[None, :, None], (x - c[2])[None, None, :]

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        X, Y, Z = self.axes(center)
        return np.sqrt(X * X + Y * Y + Z * Z)

    def integrate(self, f) -> complex | float:
        return np.sum(f) * self.dV


@dataclass
class Field3D:
    """Complex scalar field on a Grid3D."""

    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        n = self.grid.n
        if v.shape != (n, n, n):
            raise ValueError(f"field shape {v.shape} does not match grid n={n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        self.values = v.astype(complex, copy=False)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dV)

    def copy(self) -> "Field3D":
        return Field3D(self.grid, self.values.copy())


@dataclass
class SpectralField:
    grid: Grid3D
    values: np.ndarray


def forward_transform(f: Field3D) -> SpectralField:
    return SpectralField(f.grid, sfft.fftn(f.values, norm="ortho", workers=workers()))


def inverse_transform(s: SpectralField) -> Field3D:
    return Field3D(s.grid, sfft.ifftn(s.values, norm="ortho", workers=workers()))


def fft(a):
    return sfft.fftn(a, workers=workers())


def ifft(a):
    return sfft.ifftn(a, workers=workers())


def gradient(grid: Grid3D, u: np.ndarray):
    """Spectral gradient (three arrays)."""
    uh = fft(u)
    k = grid.k
    return [ifft(1j * k[:, None, None] * uh), ifft(1j * k[None, :, None] * uh),
            ifft(1j * k[None, None, :] * uh)]


def spectral_laplacian(grid: Grid3D, u: np.ndarray) -> np.ndarray:
    out = ifft(-grid.k2 * fft(u))
    return out.real if np.isrealobj(u) else out


# --- checkpoints -------------------------------------------------------------
_MAGIC = b"HRTF"
_HEADER = struct.Struct("<4sIdd")


def write_checkpoint(path, field: Field3D, t: float) -> None:
    """Little-endian header (magic, n, L, t) then n^3 (re, im) float64 pairs, x fastest."""
    g = field.grid
    data = np.empty((g.n**3, 2), dtype="<f8")
    flat = field.values.ravel(order="F")
    data[:, 0] = flat.real
    data[:, 1] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.n, g.L, float(t)))
        fh.write(data.tobytes())


def read_checkpoint(path) -> tuple[Field3D, float]:
    raw = Path(path).read_bytes()
    magic, n, L, t = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a field checkpoint")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * n**3:
        raise ValueError(f"{path}: truncated checkpoint")
    vals = (data[0::2] + 1j * data[1::2]).reshape((n, n, n), order="F")
    return Field3D(Grid3D(n, L), vals), t
