import numpy as np
import pytest

from hsl.ansatz import (SolitonProfile, assemble_R, cross_term_ratio, default_scan_state,
                        finite_difference_check, grid_points, residual, residual_points,
                        residual_spectral, scaled_state, time_derivative, write_scan_csv)
from hsl.field import Grid3D
from hsl.groundstate import lift_to_box
from hsl.twobody import ModState


@pytest.fixture(scope="module")
def profiles(gs, corrections):
    return {N: SolitonProfile(gs, corrections if N else None, N) for N in (0, 1, 2)}


def _state(sep=20.0):
    return scaled_state(default_scan_state(), sep)


def _probe_points(s, rng, n=400, spread=2.5):
    pts = [s.alpha1 + spread * rng.standard_normal((n // 2, 3)),
           s.alpha2 + spread * rng.standard_normal((n // 2, 3))]
    return np.concatenate(pts)


def test_profile_validation(gs):
    with pytest.raises(ValueError):
        SolitonProfile(gs, None, 3)
    with pytest.raises(ValueError):
        SolitonProfile(gs, None, 1)


def test_system_pairing(profiles):
    X = np.zeros((1, 3))
    with pytest.raises(ValueError):
        residual_points(profiles[2], _state(), X, system="kepler")
    with pytest.raises(ValueError):
        residual_points(profiles[0], _state(), X, system="refined")
    with pytest.raises(ValueError):
        residual_points(profiles[0], _state(), X, solitons=(3,))


@pytest.mark.parametrize("N", [0, 1, 2])
def test_single_soliton_is_exact(profiles, rng, N):
    # a lone soliton of any order with zero correction coefficients is Q itself
    s = ModState([0.3, -0.2, 0.1], [50.0, 0, 0], [0.2, 0.1, -0.3], [0, 0, 0], 1.2, 1.0, 0.4, 0.0)
    X = s.alpha1 + 2.0 * rng.standard_normal((300, 3))
    res = residual_points(profiles[0], s, X, solitons=(1,))
    assert np.max(np.abs(res)) < 1e-6


def test_assembly_matches_lift(gs, profiles):
    grid = Grid3D(64, 40.0)
    s = ModState([1.0, -0.5, 0.25], [60, 0, 0], [0.3, 0, -0.1], [0, 0, 0], 1.1, 1.0, 0.7, 0.0)
    R = assemble_R(profiles[0], s, grid, solitons=(1,))
    ref = lift_to_box(gs, grid, s.alpha1, s.lambda1, s.beta1, s.gamma1)
    assert np.max(np.abs(R.values - ref.values)) < 1e-8 * np.max(np.abs(ref.values))


def test_two_soliton_mass(gs, profiles):
    grid = Grid3D(128, 72.0)
    s = ModState([-12.0, 0, 0], [12.0, 0, 0], [0.1, 0, 0], [-0.1, 0.2, 0], 1.0, 1.3)
    R = assemble_R(profiles[0], s, grid)
    assert R.mass() == pytest.approx(gs.mass * (1 + 1 / 1.3), rel=1e-5)


def test_gauge_covariance(profiles, rng):
    s = _state()
    X = _probe_points(s, rng)
    r0 = residual_points(profiles[2], s, X)
    r1 = residual_points(profiles[2], s.replace(gamma1=s.gamma1 + 0.9, gamma2=s.gamma2 + 0.9), X)
    np.testing.assert_allclose(r1, np.exp(-0.9j) * r0, atol=1e-14 * np.max(np.abs(r0)))


def _translated(s, d):
    # u(x - d) carries the phases exp(-i beta_j . d), absorbed into gamma_j
    return s.replace(alpha1=s.alpha1 + d, alpha2=s.alpha2 + d,
                     gamma1=s.gamma1 + s.beta1 @ d, gamma2=s.gamma2 + s.beta2 @ d)


@pytest.mark.parametrize("N", [0, 1, 2])
def test_translation_covariance(profiles, rng, N):
    s = _state()
    d = np.array([3.0, -1.0, 2.0])
    X = _probe_points(s, rng)
    r0 = residual_points(profiles[N], s, X)
    r1 = residual_points(profiles[N], _translated(s, d), X + d)
    np.testing.assert_allclose(r1, r0, rtol=1e-10, atol=1e-12 * np.max(np.abs(r0)))


def test_translation_covariance_of_norms(profiles):
    s = _state(30.0)
    d = np.array([-7.0, 4.0, 1.5])
    a = residual(profiles[2], s, window_n=32)
    b = residual(profiles[2], _translated(s, d), window_n=32)
    assert b.weighted_sup == pytest.approx(a.weighted_sup, rel=1e-10)
    assert b.l2_norm == pytest.approx(a.l2_norm, rel=1e-10)


@pytest.mark.parametrize("N", [0, 1, 2])
def test_time_derivative_finite_difference(profiles, rng, N):
    s = _state()
    X = _probe_points(s, rng, 200)
    assert finite_difference_check(profiles[N], s, X) < 1e-4


def test_time_derivative_shapes(profiles):
    X = grid_points(Grid3D(8, 4.0), shift=(1.0, 0, 0))
    assert X.shape == (8, 8, 8, 3)
    assert time_derivative(profiles[1], _state(), X).shape == (8, 8, 8)


def test_residual_decreases_with_order(profiles):
    s = _state(30.0)
    vals = [residual(profiles[N], s, window_n=64).weighted_sup for N in (0, 1, 2)]
    assert vals[0] > vals[1] > vals[2]


def test_residual_decreases_with_separation(profiles):
    vals = [residual(profiles[2], _state(d), window_n=64).weighted_sup for d in (20, 40, 80)]
    assert vals[0] > vals[1] > vals[2]


def test_residual_window_check(profiles):
    with pytest.raises(ValueError):
        residual(profiles[0], _state(), window_L=6.0)


def test_spectral_matches_pointwise(profiles):
    s = ModState([-8.0, 0, 0], [8.0, 0, 0], [0.1, 0, 0], [-0.1, 0, 0], 1.0, 1.0)
    grid = Grid3D(64, 40.0)
    spec, point = residual_spectral(profiles[1], s, grid)
    X = grid_points(grid)
    near = np.min([np.linalg.norm(X - a, axis=-1) for a in (s.alpha1, s.alpha2)], axis=0) < 4
    gap = np.max(np.abs(spec - point)[near])
    assert gap < 0.05 * np.max(np.abs(point[near])) + 1e-6


@pytest.mark.slow
def test_cross_term_is_exponentially_small(profiles):
    s = ModState([-20.0, 0, 0], [20.0, 0, 0], [0.0, 0, 0], [0, 0, 0], 1.0, 1.0)
    rep = cross_term_ratio(profiles[1], s, Grid3D(128, 80.0))
    assert rep["ratio"] < 1e-8


def test_overlap_warning(profiles):
    s = ModState([-2.0, 0, 0], [2.0, 0, 0], [0, 0, 0], [0, 0, 0])
    with pytest.warns(RuntimeWarning, match="overlap"):
        residual(profiles[0], s, window_n=16, window_L=10.0)


def test_write_scan_csv(profiles, tmp_path):
    rows = [residual(profiles[0], _state(), window_n=32)]
    write_scan_csv(rows, tmp_path / "scan.csv")
    text = (tmp_path / "scan.csv").read_text().splitlines()
    assert text[0] == "N,alpha_norm,weighted_sup,l2_norm"
    assert len(text) == 2
