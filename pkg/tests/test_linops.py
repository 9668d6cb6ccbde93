import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsl.linops import SolvabilityError, apply_Lplus, operators, solve_Lplus
from hsl.radial import RadialProfile, derivative, sector_potential

# frozen at r_max = 40, m = 8000
M2_COEFF = 3.5053297026
B2_COEFF = 3.5053297041
IP_SQ = -11.0123180421


def _rel(v, ref, w):
    return np.sqrt(np.sum(w * v * v) / np.sum(w * ref * ref))


def _core(gs, v, rc=15.0):
    return np.where(gs.Q.grid.r < rc, v, 0.0)


def test_Lminus_kills_Q(gs):
    ops = operators(gs)
    w = gs.Q.grid.weights(0)
    assert _rel(ops.apply_Lminus(gs.Q.values, 0), gs.Q.values, w) < 1e-6


def test_Lplus_kills_dQ_in_dipole_sector(gs):
    ops = operators(gs)
    dQ = derivative(gs.Q.grid, gs.Q.values, parity=1)
    w = gs.Q.grid.weights(1)
    assert _rel(_core(gs, ops.apply_Lplus(dQ, 1)), dQ, w) < 1e-5


def test_Lplus_on_Q(gs):
    # the nonlocal term doubles: L+ Q = 2 phi_{Q^2} Q
    ops = operators(gs)
    w = gs.Q.grid.weights(0)
    ref = 2 * gs.phi.values * gs.Q.values
    assert _rel(ops.apply_Lplus(gs.Q.values, 0) - ref, ref, w) < 1e-6


def test_scaling_generator(gs):
    # L+ (2Q + r Q') = -2 Q
    ops = operators(gs)
    r = gs.Q.grid.r
    lamQ = 2 * gs.Q.values + r * derivative(gs.Q.grid, gs.Q.values, parity=1)
    w = gs.Q.grid.weights(0)
    res = _core(gs, ops.apply_Lplus(lamQ, 0) + 2 * gs.Q.values)
    assert _rel(res, gs.Q.values, w) < 1e-5


def test_sector_potential_matches_background(gs):
    phi = sector_potential(gs.Q.grid, gs.Q.values**2, 0)
    assert np.max(np.abs(phi - gs.phi.values)) < 1e-9 * np.max(np.abs(gs.phi.values))


@pytest.mark.parametrize("ell", [0, 1])
@pytest.mark.parametrize("which", ["plus", "minus"])
def test_solve_residual(gs, rng, ell, which):
    ops = operators(gs)
    g = gs.Q.grid
    r = g.r
    f = np.exp(-((r - 1.5) ** 2)) * (r**ell) * (1 + 0.3 * np.cos(2 * r))
    ker = ops.kernel(which, ell)
    w = g.weights(ell)
    if ker is not None:
        f = f - np.sum(w * f * ker) / np.sum(w * ker * ker) * ker
    solve = ops.solve_Lplus if which == "plus" else ops.solve_Lminus
    apply = ops.apply_Lplus if which == "plus" else ops.apply_Lminus
    u = solve(f, ell)
    res = apply(u, ell) - f
    if ell == 1:
        res[0] = 0.0
    assert _rel(res, f, w) < 1e-8
    if ker is not None:
        assert abs(np.sum(w * u * ker)) < 1e-8 * np.sqrt(np.sum(w * u * u) * np.sum(w * ker * ker))


def test_solvability_error(gs):
    ops = operators(gs)
    with pytest.raises(SolvabilityError) as exc:
        ops.solve_Lminus(gs.Q.values, 0)
    assert exc.value.inner_product > 0
    dQ = derivative(gs.Q.grid, gs.Q.values, parity=1)
    with pytest.raises(SolvabilityError):
        ops.solve_Lplus(dQ, 1)


def test_unsupported_sector(gs):
    with pytest.raises(ValueError):
        operators(gs).apply_Lminus(gs.Q.values, 2)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.3, 3.0), b=st.floats(0.3, 3.0), c=st.floats(-2, 2), ell=st.sampled_from([0, 1]))
def test_self_adjoint(gs, a, b, c, ell):
    ops = operators(gs)
    g = gs.Q.grid
    r = g.r
    f = r**ell * np.exp(-a * r * r) * (1 + c * r)
    h = r**ell * np.exp(-b * r) * (1 + r) ** 2 * np.exp(-r * r / 8)
    w = g.weights(ell)
    for apply in (ops.apply_Lplus, ops.apply_Lminus):
        lhs = np.sum(w * apply(f, ell) * h)
        rhs = np.sum(w * f * apply(h, ell))
        assert lhs == pytest.approx(rhs, rel=1e-4, abs=1e-8)


def test_S_solves_Q(gs, corrections):
    S = corrections.T1_shape
    res = apply_Lplus(gs, S).values - gs.Q.values
    assert _rel(res, gs.Q.values, gs.Q.grid.weights(0)) < 1e-8
    wrapped = solve_Lplus(gs, RadialProfile(gs.Q.grid, gs.Q.values))
    np.testing.assert_allclose(wrapped.values, S.values)


def test_frozen_constants(corrections):
    assert corrections.m2_coeff == pytest.approx(M2_COEFF, abs=1e-9)
    assert corrections.b2_coeff == pytest.approx(B2_COEFF, abs=1e-9)
    assert corrections.ip_SQ == pytest.approx(IP_SQ, abs=1e-8)


def test_dipole_and_imaginary_forcings_cancel(gs, corrections):
    assert corrections.b2_coeff * 4 * np.pi / gs.mass == pytest.approx(1.0, abs=1e-12)
    assert corrections.m2_coeff / gs.g == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(corrections.T2_real_ell1.values)) < 1e-10
    assert np.max(np.abs(corrections.T2_imag.values)) < 1e-7
    assert abs(corrections.solvability_im) < 1e-8


def test_export(corrections, tmp_path):
    corrections.export(tmp_path)
    data = np.loadtxt(tmp_path / "T1_shape.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], corrections.T1_shape.values)
    assert (tmp_path / "corrections.json").exists()
