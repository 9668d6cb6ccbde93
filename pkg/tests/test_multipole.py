import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from hsl.multipole import (approx_field, eval_F, remainder, remainder_bound_check,
                           remainder_slope, truncated_kernel)
from hsl.radial import RadialProfile

vec = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


def test_first_terms():
    assert eval_F(1, [2.0, 0, 0], [0.3, -1.0, 0.2]) == pytest.approx(0.5)
    assert eval_F(2, [1.0, 0, 0], [0, 1.0, 0]) == 0.0


def test_collinear_geometric_series():
    s = truncated_kernel(3, [10.0, 0, 0], [1.0, 0, 0])
    assert s == pytest.approx(0.111, abs=1e-14)
    assert 1 / 9 - s == pytest.approx(remainder(3, [10.0, 0, 0], [1.0, 0, 0]), abs=1e-15)


def test_expansion_domain_checked():
    with pytest.raises(ValueError):
        truncated_kernel(2, [4.0, 0, 0], [3.0, 0, 0])
    with pytest.raises(ValueError):
        eval_F(0, [1.0, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        eval_F(1, [0.0, 0, 0], [0, 0, 0])


def test_remainder_zero_at_origin():
    assert remainder(1, [7.0, 1.0, -2.0], [0.0, 0, 0]) == pytest.approx(0.0, abs=1e-16)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_remainder_slope(N):
    s = remainder_slope(N, [0.6, 0.5, -0.4], (10, 20, 40, 80), (1.0, 0.2, 0.1))
    assert abs(s + (N + 1)) <= 0.1 * (N + 1)


def test_successive_remainders():
    a = 40 * np.array([1.0, 0.3, -0.2]) / np.linalg.norm([1.0, 0.3, -0.2])
    z = np.array([0.5, -0.6, 0.62])
    z /= np.linalg.norm(z)
    ratio = abs(remainder(3, a, z)) / abs(remainder(2, a, z))
    assert 1 / 120 <= ratio <= 3 / 40


def test_remainder_bound_constant_is_moderate():
    rep = remainder_bound_check(2, samples=200)
    # frozen order of magnitude; a wrong expansion makes C_N grow with |alpha|
    assert 0 < rep["C_N"] < 2


@settings(max_examples=40, deadline=None)
@given(a=vec, z=vec, s=st.floats(0.2, 5.0), k=st.integers(1, 6))
def test_homogeneity(a, z, s, k):
    if np.linalg.norm(a) < 0.1:
        return
    assert eval_F(k, s * a, z) == pytest.approx(s**-k * eval_F(k, a, z), rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(a=vec, z=vec, seed=st.integers(0, 2**31), k=st.integers(1, 6))
def test_rotation_invariance(a, z, seed, k):
    if np.linalg.norm(a) < 0.1:
        return
    R = Rotation.random(random_state=seed).as_matrix()
    assert eval_F(k, R @ a, R @ z) == pytest.approx(eval_F(k, a, z), rel=1e-9, abs=1e-12)


def test_approx_field_monopole(gs):
    src = RadialProfile(gs.grid, gs.Q.values**2)
    alpha = np.array([12.0, 5.0, 0.0])
    for lj, lj1 in ((1.0, 1.0), (1.3, 0.8)):
        v = approx_field(2, 1, src, lj, lj1, alpha, 1, [0.4, -0.2, 0.1])
        expect = -(lj**2) * gs.mass / (4 * np.pi * lj1 * np.linalg.norm(alpha))
        assert v == pytest.approx(expect, rel=1e-8)


@pytest.mark.parametrize("j", [1, 2])
def test_approx_field_dipole(gs, j):
    src = RadialProfile(gs.grid, gs.Q.values**2)
    alpha = np.array([12.0, 5.0, 0.0])
    y = np.array([0.4, -0.2, 0.7])
    lj, lj1 = 1.2, 0.9
    v = approx_field(3, 2, src, lj, lj1, alpha, j, y)
    expect = (-1) ** j * lj**3 * gs.mass / (4 * np.pi * lj1 * np.linalg.norm(alpha) ** 3) * (alpha @ y)
    assert v == pytest.approx(expect, rel=1e-8)


def test_approx_field_third_order_against_brute_force():
    # Gaussian source: the k = 3 term at y = 0 is the quadrupole pairing, compared
    # with a brute-force Cartesian quadrature of the exact kernel minus lower orders
    from hsl.radial import RadialGrid

    grid = RadialGrid(20.0, 4000)
    src = RadialProfile(grid, np.exp(-grid.r**2 / 2) / (2 * np.pi) ** 1.5)
    alpha = np.array([6.0, 2.0, -1.0])
    v = approx_field(3, 3, src, 1.0, 1.0, alpha, 2, np.zeros(3))
    x = np.linspace(-3.5, 3.5, 71)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    w = np.exp(-np.sum(X * X, 1) / 2) / (2 * np.pi) ** 1.5 * (x[1] - x[0]) ** 3
    exact = 1 / np.linalg.norm(alpha - X, axis=1)
    low = eval_F(1, alpha, X) + eval_F(2, alpha, X)
    rest = np.sum(w * (exact - low))
    # F_3 carries the spherical average of (3 c^2 - r^2)/2, which vanishes for a
    # radial source; both sides are then the O(|alpha|^-5) leftovers
    assert abs(v) < 1e-12
    assert abs(rest) < 1e-3 / np.linalg.norm(alpha) ** 3


def test_approx_field_rejects_divergent_moment(gs):
    # a tail too heavy for the requested moment overflows the weighted sum
    vals = np.ones(gs.grid.m)
    vals[-10:] = 1e306
    src = RadialProfile(gs.grid, vals)
    with pytest.raises(ValueError):
        approx_field(2, 1, src, 1.0, 1.0, [10.0, 0, 0], 1, [0, 0, 0])
