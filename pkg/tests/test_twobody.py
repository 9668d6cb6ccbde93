import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsl.acceptance import hyperbolic_reference, hyperbolic_test_state, parabolic_test_state
from hsl.twobody import (CollisionError, CouplingConstants, HyperbolicTarget, ModState,
                         NonContractionError, ParabolicConstants, ParabolicTarget, PolarOrbit,
                         Regime, SingularConfiguration, TrajectoryRecord, classify,
                         derivative_vector, derive_parabolic_constants, energy_E0,
                         integrate, integrate_from_infinity, kepler_period,
                         parabolic_reduction, return_time, rhs_kepler, rhs_refined)

G1 = CouplingConstants(1.0)
vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


def _bound_state():
    return ModState([-3.0, 0, 0], [3.0, 0, 0], [0, -0.2, 0], [0, 0.2, 0.05], 1.0, 1.4, 0.3, -0.1)


def test_state_roundtrips():
    s = _bound_state()
    back = ModState.from_vector(s.to_vector())
    np.testing.assert_array_equal(back.to_vector(), s.to_vector())
    assert isinstance(back.lambda2, float)
    np.testing.assert_array_equal(ModState.from_dict(s.to_dict()).to_vector(), s.to_vector())
    assert s.to_vector().size == 16
    with pytest.raises(ValueError):
        s.replace(lambda1=0.0)
    with pytest.raises(ValueError):
        CouplingConstants(0.0)


def test_kepler_rhs_values():
    s = hyperbolic_test_state()
    r = rhs_kepler(s, G1)
    np.testing.assert_allclose(r.alpha2, [1.0, 0, 0])
    np.testing.assert_allclose(r.beta1, [0.01, 0, 0])
    np.testing.assert_allclose(r.beta2, [-0.01, 0, 0])
    # -1/lam^2 + |beta|^2 + beta' . alpha = -1 + 0.25 - 0.05
    assert r.gamma1 == pytest.approx(-0.8)
    assert r.gamma2 == pytest.approx(-0.8)
    assert r.lambda1 == 0.0


def test_refined_scale_drift():
    c = CouplingConstants(1.0, m2_const=2.0, b2_const=1.5)
    s = _bound_state().replace(beta2=np.array([0.3, 0.2, 0.05]))
    r = rhs_refined(s, c)
    a, b = s.alpha, s.beta
    ab = a @ b / np.linalg.norm(a) ** 3
    assert r.lambda1 == pytest.approx(2.0 * 1.0 / 1.4 * ab)
    assert r.lambda2 == pytest.approx(2.0 * 1.4**3 / 1.0 * ab)
    np.testing.assert_allclose(r.beta1, 1.5 / 1.4 * a / np.linalg.norm(a) ** 3)


def test_singular_configuration():
    s = _bound_state().replace(alpha2=np.array([-3.0, 0, 0]))
    with pytest.raises(SingularConfiguration):
        derivative_vector(s.to_vector(), G1)
    with pytest.raises(SingularConfiguration):
        energy_E0(s, G1)


@settings(max_examples=30, deadline=None)
@given(a1=vec3, a2=vec3, b1=vec3, b2=vec3, l1=st.floats(0.5, 2), l2=st.floats(0.5, 2))
def test_weighted_momentum_conserved(a1, a2, b1, b2, l1, l2):
    if np.linalg.norm(a2 - a1) < 0.5:
        return
    d = derivative_vector(ModState(a1, a2, b1, b2, l1, l2).to_vector(), G1)
    np.testing.assert_allclose(d[6:9] / l1 + d[9:12] / l2, 0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(v=vec3)
def test_common_boost_leaves_relative_motion(v):
    s = _bound_state()
    b = s.replace(beta1=s.beta1 + v, beta2=s.beta2 + v)
    d0 = derivative_vector(s.to_vector(), G1)
    d1 = derivative_vector(b.to_vector(), G1)
    np.testing.assert_allclose(d1[3:6] - d1[0:3], d0[3:6] - d0[0:3], atol=1e-12)
    np.testing.assert_allclose(d1[6:12], d0[6:12], atol=1e-14)
    assert energy_E0(b, G1) == pytest.approx(energy_E0(s, G1))


def test_classification():
    assert classify(hyperbolic_test_state(), G1) is Regime.HYPERBOLIC
    assert energy_E0(hyperbolic_test_state(), G1) == pytest.approx(0.8)
    assert classify(parabolic_test_state(), G1) is Regime.PARABOLIC
    assert classify(_bound_state(), G1) is Regime.ELLIPTIC


def test_energy_conserved_and_period():
    s = _bound_state()
    T = kepler_period(s, G1)
    rec = integrate(s, G1, 0.0, 3 * T, tol=1e-12)
    assert np.ptp(rec.E0) < 1e-9 * abs(rec.E0[0])
    assert return_time(s, G1) == pytest.approx(T, rel=1e-8)
    with pytest.raises(ValueError):
        kepler_period(hyperbolic_test_state(), G1)


def test_hyperbolic_asymptotic_speed():
    s = hyperbolic_test_state()
    rec = integrate(s, G1, 0.0, 1e4, tol=1e-12)
    speed = rec.separation()[-1] / 1e4
    assert speed == pytest.approx(2 * np.sqrt(0.8), rel=2e-3)


def test_parabolic_growth_exponent():
    rec = integrate(parabolic_test_state(), G1, 1.0, 1e5, tol=1e-12, sampling="log")
    t, r = rec.t, rec.separation()
    k = t > 1e4
    slope = np.polyfit(np.log(t[k]), np.log(r[k]), 1)[0]
    assert slope == pytest.approx(2 / 3, abs=5e-3)


def test_time_reversal():
    s = _bound_state()
    fwd = integrate(s, G1, 0.0, 5.0, tol=1e-12).state(-1)
    back = fwd.replace(beta1=-fwd.beta1, beta2=-fwd.beta2)
    rec = integrate(back, G1, 0.0, 5.0, tol=1e-12)
    end = rec.state(-1)
    np.testing.assert_allclose(end.alpha1, s.alpha1, atol=1e-8)
    np.testing.assert_allclose(end.beta2, -s.beta2, atol=1e-8)


def test_collision_and_tolerance():
    s = ModState([-1.0, 0, 0], [1.0, 0, 0], [0, 0, 0], [0, 0, 0])
    with pytest.raises(CollisionError) as exc:
        integrate(s, G1, 0.0, 10.0)
    assert exc.value.record is not None
    with pytest.raises(ValueError):
        integrate(s, G1, 0.0, 1.0, tol=1e-3)


def test_record_validation(tmp_path):
    with pytest.raises(ValueError):
        TrajectoryRecord(np.array([0.0, 0.0]), np.zeros((2, 16)), np.zeros(2), Regime.HYPERBOLIC)
    rec = integrate(hyperbolic_test_state(), G1, 0.0, 10.0, n_samples=11)
    rec.to_csv(tmp_path / "t.csv")
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert data.shape == (11, 18)


def test_parabolic_constants():
    c = CouplingConstants(1.0, 1.0, 1.0)
    pc = derive_parabolic_constants(c, 1.0, 2.0)
    assert (pc.c0, pc.c2, pc.c3) == (4.0, 2.0, 1.0)
    assert pc.c4 == -2.0
    assert pc.omega == pytest.approx(np.sqrt(0.5))
    with pytest.raises(ValueError):
        ParabolicConstants(4.0, 0.0, 2.0, 1.0, 1.0).omega


def test_polar_orbit_time_map():
    pc = derive_parabolic_constants(CouplingConstants(1.0, 1.0, 1.0), 1.0, 2.0)
    orb = PolarOrbit(pc)
    t = np.geomspace(50, 5e4, 7)
    th = orb.theta_of_t(t)
    np.testing.assert_allclose(orb.t_of_theta(th), t, rtol=1e-10)
    # outgoing: theta increases towards 0 from below
    assert np.all(np.diff(th) > 0) and np.all(th < 0)
    Y = orb.states(t)
    D = orb.derivs(t, Y)
    h = 1e-4 * t
    fd = (orb.states(t + h) - orb.states(t - h)) / (2 * h[:, None])
    np.testing.assert_allclose(fd[:, :14], D[:, :14], rtol=1e-5, atol=1e-9)


def test_parabolic_reduction_invariants():
    pc = derive_parabolic_constants(CouplingConstants(1.0, 1.0, 1.0), 1.0, 2.0)
    rep = parabolic_reduction(pc, t_end=1e5)
    assert rep["angular_momentum_drift"] < 1e-8
    assert rep["r_ratio_final"] == pytest.approx(1.0, abs=0.05)


def test_from_infinity_hyperbolic():
    c = CouplingConstants(1.0, 1.0, 1.0)
    s_ref = hyperbolic_reference(100.0)
    rec = integrate_from_infinity(HyperbolicTarget(s_ref, c, 100.0), c, 100.0, Regime.HYPERBOLIC)
    assert rec.info["max_ratio"] < 0.1
    assert rec.info["exp_lambda"] == pytest.approx(-1.0, abs=0.1)
    # the scale law is solved: lambda' matches along the whole window
    D = derivative_vector(rec.Y, c, True)
    dl = np.gradient(rec.Y[:, 12], rec.t)
    assert np.max(np.abs(dl - D[:, 12])[5:-5]) < 1e-3 * np.max(np.abs(D[:, 12]))


def test_from_infinity_rejects():
    c = CouplingConstants(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        HyperbolicTarget(_bound_state(), c, 100.0)
    pc = derive_parabolic_constants(CouplingConstants(1.0, 1.0, 2.0), 1.0, 2.0)
    with pytest.raises(ValueError):
        integrate_from_infinity(ParabolicTarget(pc), c, 100.0, Regime.PARABOLIC)
    with pytest.raises(ValueError):
        integrate_from_infinity(None, c, 100.0, Regime.ELLIPTIC)


def test_from_infinity_contraction_weakens_at_small_T0():
    c = CouplingConstants(1.0, 1.0, 1.0)
    target = ParabolicTarget(derive_parabolic_constants(c, 1.0, 2.0))
    far = integrate_from_infinity(target, c, 100.0, Regime.PARABOLIC)
    near = integrate_from_infinity(target, c, 0.05, Regime.PARABOLIC)
    assert near.info["max_ratio"] > far.info["max_ratio"]
    assert near.info["iterations"] > far.info["iterations"]
    with pytest.raises(NonContractionError):
        integrate_from_infinity(target, c, 0.05, Regime.PARABOLIC, max_iter=3)


def test_physical_couplings(corrections):
    phys = CouplingConstants.from_corrections(corrections)
    test = CouplingConstants.from_corrections(corrections, test_mode=True)
    assert phys.g == pytest.approx(3.5053297041, abs=1e-9)
    assert test.g == 1.0
    assert test.m2_const == pytest.approx(1.0, abs=1e-8)
    assert test.b2_const == pytest.approx(1.0, abs=1e-12)
