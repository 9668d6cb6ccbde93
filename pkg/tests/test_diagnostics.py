import json

import numpy as np
import pytest

from hsl.ansatz import SolitonProfile, assemble_R
from hsl.diagnostics import (CutoffPair, EpsilonLayer, coercivity_probe, energy_functional_G,
                             epsilon_decompose, orthogonality_inner_products, random_epsilon,
                             smoothstep_cutoff)
from hsl.field import Field3D, Grid3D
from hsl.linops import operators
from hsl.twobody import ModState, Regime

pytestmark = pytest.mark.filterwarnings("ignore:soliton . too close to the box faces")


def _lone(lam=1.0, beta=(0.0, 0.0, 0.0)):
    return ModState([0.3, -0.2, 0.1], [200.0, 0, 0], beta, [0, 0, 0], lam, 1.0, 0.4, 0.0)


@pytest.fixture(scope="module")
def single(gs):
    s = _lone()
    R = assemble_R(SolitonProfile(gs, None, 0), s, Grid3D(64, 24.0), solitons=(1,))
    return EpsilonLayer(gs, s, R, None, solitons=(1,))


@pytest.fixture(scope="module")
def moving(gs):
    s = _lone(1.2, (0.3, -0.1, 0.2))
    R = assemble_R(SolitonProfile(gs, None, 0), s, Grid3D(64, 28.0), solitons=(1,))
    return EpsilonLayer(gs, s, R, None, solitons=(1,))


def _small(layer, rng, amp=1e-3):
    eps = layer.project(random_epsilon(layer, rng))
    return Field3D(layer.grid, eps.values * amp / np.sqrt(layer.h1_norm_sq(eps)))


def test_smoothstep():
    s = np.linspace(-1.5, 1.5, 3001)
    p = smoothstep_cutoff(s)
    assert p[0] == 1.0 and p[-1] == 0.0
    assert smoothstep_cutoff(0.0) == pytest.approx(0.5)
    assert np.all(np.diff(p) <= 0)
    np.testing.assert_allclose(p + smoothstep_cutoff(-s), 1.0, atol=1e-15)
    slope = np.max(np.abs(np.gradient(p, s)))
    assert slope == pytest.approx(15 / 16, rel=1e-4)


def test_cutoff_pair():
    g = Grid3D(32, 40.0)
    c = CutoffPair("Hyperbolic", 5.0)
    np.testing.assert_allclose(c.psi(g, 1) + c.psi(g, 2), 1.0)
    assert c.psi(g, 1)[0, 0, 0] == 1.0 and c.psi(g, 2)[-1, 0, 0] == 1.0
    assert c.zeta(g, 1) is not None and np.array_equal(c.zeta(g, 2), c.psi(g, 2))
    assert CutoffPair("Parabolic", 5.0).zeta(g, 1) == 0.5
    assert c.grad_bound() == pytest.approx(15 / 16 / 5.0)
    assert CutoffPair.at_time("Hyperbolic", 0.1, 100.0).scale == pytest.approx(10.0)
    assert CutoffPair.at_time(Regime.PARABOLIC, 0.1, 1000.0).scale == pytest.approx(10.0)
    with pytest.raises(ValueError):
        CutoffPair("Elliptic", 5.0)
    with pytest.raises(ValueError):
        CutoffPair("Hyperbolic", 0.0)


def test_zero_error_has_zero_energy(single):
    eps = epsilon_decompose(single.R, single.R)
    rep = single.energy(eps)
    assert rep.G == 0.0 and rep.h1_norm == 0.0
    p = rep.pairings[1]
    assert p["re_Q"] == 0 and not np.any(p["re_yQ"]) and not np.any(p["im_gradQ"])
    with pytest.raises(ValueError):
        epsilon_decompose(single.R, Field3D(Grid3D(32, 24.0), np.zeros((32,) * 3, complex)))


@pytest.mark.parametrize("lam", [1.0, 1.3])
def test_mass_direction_pairing(gs, lam):
    s = _lone(lam, (0.2, 0.0, -0.1))
    R = assemble_R(SolitonProfile(gs, None, 0), s, Grid3D(64, 28.0), solitons=(1,))
    eps = Field3D(R.grid, 1e-3 * R.values)
    p = orthogonality_inner_products(eps, s, gs, solitons=(1,))[1]
    assert p["re_Q"] == pytest.approx(1e-3 * gs.mass, rel=1e-5)
    assert abs(p["im_LambdaQ"]) < 1e-10
    assert np.max(np.abs(p["re_yQ"])) < 1e-5 * p["re_Q"]


def test_projection(single, rng):
    eps = random_epsilon(single, rng)
    assert np.max(np.abs(single.pairing_vector(eps))) > 1e-3
    pe = single.project(eps)
    assert np.max(np.abs(single.pairing_vector(pe))) < 1e-12 * np.sqrt(single.h1_norm_sq(eps))
    np.testing.assert_allclose(single.project(pe).values, pe.values, atol=1e-14)


def test_quadratic_scaling(moving, rng):
    eps = _small(moving, rng, 1e-4)
    g1 = moving.energy(eps).G
    g2 = moving.energy(Field3D(moving.grid, 2 * eps.values)).G
    assert g2 / g1 == pytest.approx(4.0, rel=1e-3)


def test_phase_direction_is_null(single):
    # i R is the generator of the phase symmetry: G vanishes to second order
    eps = Field3D(single.grid, 1e-3j * single.R.values)
    assert abs(single.quotient(eps)) < 1e-5


def test_radial_sector_matches_Lplus(gs, single):
    # real radial eps orthogonal to Q: G = (L+ v, v) up to O(amp^3)
    ops = operators(gs)
    r = gs.grid.r
    w = gs.grid.weights(0)
    v = np.exp(-r * r / 2) * (1 - 0.3 * r)
    v -= np.sum(w * v * gs.Q.values) / np.sum(w * gs.Q.values ** 2) * gs.Q.values
    from hsl.radial import RadialProfile
    vp = RadialProfile(gs.grid, v)
    a = single.s.alpha1
    X, Y, Z = single.grid.axes(a)
    rho = np.sqrt(X * X + Y * Y + Z * Z)
    x, y, z = single.grid.axes()
    amp = 1e-4
    eps = Field3D(single.grid, amp * vp(rho) * np.exp(-1j * single.s.gamma1))
    rep = single.energy(eps)
    sector = float(np.sum(w * ops.apply_Lplus(v, 0) * v))
    assert rep.G / amp**2 == pytest.approx(sector, rel=1e-2)
    assert abs(rep.pairings[1]["re_Q"]) < 1e-3 * amp


def test_layer_requires_cutoffs_for_two(gs, single):
    with pytest.raises(ValueError):
        EpsilonLayer(gs, single.s, single.R, None, solitons=(1, 2))


def test_energy_wrapper_and_json(gs, single, rng, tmp_path):
    eps = _small(single, rng)
    rep = energy_functional_G(eps, single.R, single.s, None, gs, solitons=(1,))
    assert rep.G == pytest.approx(single.energy(eps).G, rel=1e-12)
    rep.to_json(tmp_path / "e.json")
    d = json.loads((tmp_path / "e.json").read_text())
    assert set(d) == {"G", "G1", "G2", "G3", "h1_norm", "pairings"}
    assert len(d["pairings"]["1"]["re_yQ"]) == 3


def test_probe_rejects_few_trials(single):
    with pytest.raises(ValueError):
        coercivity_probe(single, trials=10)


def test_single_soliton_coercivity(moving, tmp_path):
    rep = coercivity_probe(moving, trials=100, seed=3)
    assert rep.minimum > 0.1
    assert rep.info["max_pairing"] < 1e-15
    rep.to_csv(tmp_path / "c.csv")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 101


def test_unprojected_errors_can_be_negative(single):
    # without the orthogonality conditions the iQ and LambdaQ directions
    # make the quotient drop well below the projected values
    rep = coercivity_probe(single, trials=100, seed=1, project=False)
    proj = coercivity_probe(single, trials=100, seed=1)
    assert rep.minimum < proj.minimum
