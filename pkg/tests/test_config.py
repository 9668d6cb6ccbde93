import json

import pytest

from hsl.config import (CONFIG_TYPES, PRESETS, AnsatzConfig, DiagnoseConfig, GroundStateConfig,
                        TwoBodyConfig, dump_config, load_config, preset)
from hsl.evolve import SimConfig


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_load_and_roundtrip(name, tmp_path):
    kind, cfg = preset(name)
    assert isinstance(cfg, CONFIG_TYPES[kind])
    dump_config(cfg, tmp_path / "c.json")
    again = load_config(kind, tmp_path / "c.json")
    assert again.to_dict() == cfg.to_dict()


def test_defaults():
    assert load_config("groundstate", None) == GroundStateConfig()
    assert load_config("ansatz", {}).orders == [0, 1, 2]
    assert isinstance(load_config("diagnose", None), DiagnoseConfig)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown"):
        load_config("groundstate", {"r_maxx": 30})
    with pytest.raises(TypeError):
        load_config("evolve", {"state": None, "checkpoint": "x.bin", "bogus": 1})


def test_validation():
    with pytest.raises(ValueError):
        TwoBodyConfig(mode="forward")
    with pytest.raises(ValueError):
        TwoBodyConfig(g_mode="weird", mode="infinity")
    with pytest.raises(ValueError):
        AnsatzConfig(mode="other")
    with pytest.raises(KeyError):
        preset("nope")


def test_state_from_json(tmp_path):
    _, cfg = preset("twobody-hyperbolic")
    d = cfg.to_dict()
    path = tmp_path / "t.json"
    path.write_text(json.dumps(d))
    back = load_config("twobody", path)
    assert back.state.alpha2[0] == 5.0 and back.state.lambda1 == 1.0


def test_evolve_preset_is_the_acceptance_run():
    from hsl.acceptance import two_soliton_run_state

    _, cfg = preset("evolve-two-soliton")
    assert isinstance(cfg, SimConfig)
    assert cfg.until_doubling
    assert cfg.state.to_dict() == two_soliton_run_state().to_dict()
