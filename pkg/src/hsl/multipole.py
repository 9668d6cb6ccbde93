"""Multipole expansion of 1/|alpha - zeta| and the approximate far fields.

    1/|alpha - zeta| = sum_k F_k(alpha, zeta),
    F_{k+1} = |zeta|^k P_k(cos theta) / |alpha|^{k+1},  cos theta = alpha_hat . zeta_hat.

|zeta|^k P_k(cos theta) is evaluated as a polynomial in (alpha_hat . zeta,
|zeta|^2) with Bonnet's recurrence, which is regular at zeta = 0.
"""
from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre


def _check_alpha(alpha):
    alpha = np.asarray(alpha, float)
    na = float(np.linalg.norm(alpha))
    if na == 0.0:
        raise ValueError("alpha must be nonzero")
    return alpha, na


def _solid_legendre(kmax: int, c, z2):
    """p_k = |zeta|^k P_k(cos theta) for k = 0..kmax, given c = a_hat.zeta, z2 = |zeta|^2."""
    p = [np.ones_like(c), c]
    for k in range(1, kmax):
        p.append(((2 * k + 1) * c * p[k] - k * z2 * p[k - 1]) / (k + 1))
    return p[: kmax + 1]


def eval_F(k: int, alpha, zeta):
    """F_k(alpha, zeta); ``zeta`` may be an array of shape (..., 3)."""
    if k < 1:
        raise ValueError("order k must be >= 1")
    alpha, na = _check_alpha(alpha)
    zeta = np.asarray(zeta, float)
    c = zeta @ (alpha / na)
    z2 = np.sum(zeta * zeta, axis=-1)
    return _solid_legendre(k - 1, c, z2)[k - 1] / na**k


def truncated_kernel(N: int, alpha, zeta, check: bool = True):
    """sum_{k<=N} F_k(alpha, zeta), valid for |zeta| <= |alpha|/2."""
    alpha, na = _check_alpha(alpha)
    zeta = np.asarray(zeta, float)
    if check and np.any(np.linalg.norm(zeta, axis=-1) > na / 2):
        raise ValueError("expansion requires |zeta| <= |alpha|/2")
    c = zeta @ (alpha / na)
    z2 = np.sum(zeta * zeta, axis=-1)
    p = _solid_legendre(N - 1, c, z2)
    return sum(p[k] / na ** (k + 1) for k in range(N))


def remainder(N: int, alpha, zeta):
    alpha = np.asarray(alpha, float)
    zeta = np.asarray(zeta, float)
    exact = 1.0 / np.linalg.norm(alpha - zeta, axis=-1)
    return exact - truncated_kernel(N, alpha, zeta)


def remainder_bound_check(N: int, alpha_norms=(10, 20, 40, 80, 160), samples: int = 400,
                          seed: int = 0) -> dict:
    """Fit C_N in |remainder| <= C_N (1+|zeta|)^{N+1} / |alpha|^{N+1}.

    zeta is scanned over random directions with |zeta| <= |alpha|/2 for
    alpha along random directions of the given norms.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for na in alpha_norms:
        a = rng.normal(size=3)
        alpha = na * a / np.linalg.norm(a)
        z = rng.normal(size=(samples, 3))
        z *= (rng.random(samples) ** (1 / 3) * na / 2 / np.linalg.norm(z, axis=1))[:, None]
        rem = np.abs(remainder(N, alpha, z))
        ratio = rem * na ** (N + 1) / (1 + np.linalg.norm(z, axis=1)) ** (N + 1)
        worst = max(worst, float(np.max(ratio)))
    return {"N": N, "C_N": worst}


def remainder_slope(N: int, zeta, alpha_norms=(10, 20, 40, 80, 160), direction=(1.0, 0, 0)) -> float:
    """Log-log slope of |remainder| against |alpha| for fixed zeta."""
    d = np.asarray(direction, float)
    d /= np.linalg.norm(d)
    t = np.asarray(alpha_norms, float)
    rem = [abs(float(remainder(N, ti * d, np.asarray(zeta, float)))) for ti in t]
    return float(np.polyfit(np.log(t), np.log(rem), 1)[0])


def _product_rule(radial_grid, source, n_mu: int, n_phi: int):
    """Nodes xi and weights w for int f(xi) source(|xi|) d^3 xi."""
    r = radial_grid.r
    wr = np.full(r.size, radial_grid.h)
    wr[0] = wr[-1] = 0.5 * radial_grid.h
    source = np.asarray(source)
    keep = np.abs(source) > 1e-300
    r, wr, s = r[keep], wr[keep], np.asarray(source)[keep]
    mu, wmu = roots_legendre(n_mu)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    wph = np.full(n_phi, 2 * np.pi / n_phi)
    st = np.sqrt(1 - mu**2)
    dirs = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                     np.outer(mu, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    wang = np.outer(wmu, wph).ravel()
    return r, wr * r * r * s, dirs, wang


def approx_field(N: int, k: int, source, lambda_j: float, lambda_j1: float, alpha, j: int, y,
                 n_mu: int = 16, n_phi: int = 32) -> float:
    """-(lam_j^2/(4 pi lam_{j+1})) int |v(xi)|^2 F_k((-1)^j alpha, lam_{j+1} xi - lam_j y) dxi.

    ``source`` is a RadialProfile holding the radial density |v|^2.  The
    quadrature is the trapezoidal rule in r times a Gauss-Legendre x uniform
    product rule on the sphere, exact for the polynomial angular dependence
    of F_k up to degree n_mu - 1.  The source must have a finite moment of
    order N + 1.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    dens = source.values
    r = source.grid.r
    with np.errstate(over="ignore"):
        moment = np.sum(source.grid.weights(0) * dens * (1 + r) ** (N + 1))
    if not np.isfinite(moment):
        raise ValueError("source has a divergent moment")
    a = ((-1) ** j) * np.asarray(alpha, float)
    y = np.asarray(y, float)
    rr, wr, dirs, wang = _product_rule(source.grid, dens, n_mu, n_phi)
    total = 0.0
    for s0 in range(0, rr.size, 512):
        zeta = lambda_j1 * rr[s0:s0 + 512, None, None] * dirs[None] - lambda_j * y
        total += np.sum(wr[s0:s0 + 512, None] * wang[None] * eval_F(k, a, zeta))
    return float(-(lambda_j**2) / (4 * np.pi * lambda_j1) * total)
