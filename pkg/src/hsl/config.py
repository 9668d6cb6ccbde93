"""JSON run configurations for the command-line interface.

Every subcommand reads one JSON object.  Missing keys take the dataclass
defaults; unknown keys are an error so that typos do not pass silently.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .evolve import SimConfig
from .twobody import ModState


def _build(cls, d: dict):
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(extra)}")
    return cls(**d)


def _state_dict(s):
    return None if s is None else s.to_dict()


@dataclass
class GroundStateConfig:
    r_max: float = 40.0
    m: int = 8000
    tol: float = 1e-9
    max_iter: int = 400
    corrections: bool = True

    def to_dict(self):
        return asdict(self)


@dataclass
class TwoBodyConfig:
    """mode "forward" integrates from ``state``; mode "infinity" solves the
    fixed point around an asymptotic target (``state`` is then the Kepler
    reference at t = T0 for the hyperbolic regime)."""

    g_mode: str = "test"
    mode: str = "forward"
    regime: str | None = None
    state: ModState | None = None
    t0: float = 0.0
    t1: float = 1e4
    tol: float = 1e-10
    refined: bool = False
    n_samples: int = 1001
    sampling: str = "log"
    T0: float = 100.0
    lambda_inf: float = 1.0
    a0: float = 2.0

    def __post_init__(self):
        if isinstance(self.state, dict):
            self.state = ModState.from_dict(self.state)
        if self.g_mode not in ("test", "physical"):
            raise ValueError("g_mode must be 'test' or 'physical'")
        if self.mode not in ("forward", "infinity"):
            raise ValueError("mode must be 'forward' or 'infinity'")
        if self.mode == "forward" and self.state is None:
            raise ValueError("forward integration needs an initial state")

    def to_dict(self):
        d = asdict(self)
        d["state"] = _state_dict(self.state)
        return d


@dataclass
class AnsatzConfig:
    mode: str = "scan"
    separations: list = field(default_factory=lambda: [20, 30, 45, 67])
    orders: list = field(default_factory=lambda: [0, 1, 2])
    window_n: int = 128
    window_L: float = 16.0
    state: ModState | None = None

    def __post_init__(self):
        if isinstance(self.state, dict):
            self.state = ModState.from_dict(self.state)
        if self.mode not in ("scan", "residual"):
            raise ValueError("mode must be 'scan' or 'residual'")

    def to_dict(self):
        d = asdict(self)
        d["state"] = _state_dict(self.state)
        return d


@dataclass
class DiagnoseConfig:
    n: int = 128
    L: float = 48.0
    separation: float = 20.0
    trials: int = 100
    amplitude: float = 1e-3
    regime: str = "Hyperbolic"
    scale: float | None = None
    state: ModState | None = None

    def __post_init__(self):
        if isinstance(self.state, dict):
            self.state = ModState.from_dict(self.state)

    def to_dict(self):
        d = asdict(self)
        d["state"] = _state_dict(self.state)
        return d


CONFIG_TYPES = {
    "groundstate": GroundStateConfig,
    "twobody": TwoBodyConfig,
    "ansatz": AnsatzConfig,
    "evolve": SimConfig,
    "diagnose": DiagnoseConfig,
}


def _hyp_state():
    return {"alpha1": [-5.0, 0, 0], "alpha2": [5.0, 0, 0], "beta1": [-0.5, 0, 0],
            "beta2": [0.5, 0, 0], "lambda1": 1.0, "lambda2": 1.0, "gamma1": 0.0, "gamma2": 0.0}


PRESETS = {
    "groundstate": ("groundstate", {}),
    "twobody-hyperbolic": ("twobody", {"state": _hyp_state(), "t1": 1e4, "tol": 1e-12}),
    "twobody-parabolic": ("twobody", {
        "state": {"alpha1": [-5.0, 0, 0], "alpha2": [5.0, 0, 0],
                  "beta1": [-0.13416407864998739, -0.17888543819998318, 0.0],
                  "beta2": [0.13416407864998739, 0.17888543819998318, 0.0],
                  "lambda1": 1.0, "lambda2": 1.0, "gamma1": 0.0, "gamma2": 0.0},
        "t1": 1e5, "tol": 1e-12}),
    "twobody-infinity-parabolic": ("twobody", {
        "mode": "infinity", "regime": "Parabolic", "refined": True, "T0": 100.0,
        "lambda_inf": 1.0, "a0": 2.0}),
    "ansatz-order-scan": ("ansatz", {}),
    "evolve-two-soliton": ("evolve", {
        "n": 128, "L": 80.0, "dt": 1e-3, "t_end": 6.0, "cadence": 100, "window": 6.0,
        "until_doubling": True, "checkpoint_every": 1000,
        "state": {"alpha1": [-10.0, 0, 0], "alpha2": [10.0, 0, 0], "beta1": [-1.5, 0, 0],
                  "beta2": [1.5, 0, 0], "lambda1": 1.5, "lambda2": 1.5,
                  "gamma1": 0.0, "gamma2": 0.0}}),
    "diagnose-coercivity": ("diagnose", {}),
}


def load_config(kind: str, source) -> object:
    """Build the config for ``kind`` from a path, a dict or None (defaults)."""
    cls = CONFIG_TYPES[kind]
    if source is None:
        d = {}
    elif isinstance(source, dict):
        d = dict(source)
    else:
        d = json.loads(Path(source).read_text())
    if cls is SimConfig:
        return SimConfig.from_dict(d)
    return _build(cls, d)


def preset(name: str):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kind, d = PRESETS[name]
    return kind, load_config(kind, json.loads(json.dumps(d)))


def dump_config(cfg, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
