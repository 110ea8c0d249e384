"""Experiment configuration: one JSON document, overridable key by key."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

EXPERIMENTS = ("correction-demo", "afai-baseline", "nh-afai", "zero-disorder-test", "localization")


class ConfigError(ValueError):
    pass


@dataclass
class Geometry:
    Lx: int = 2
    Ly: int = 4


@dataclass
class Physics:
    J: float = 1.25
    delta: float = 0.4
    T: float = 2 * np.pi
    W: float = 1.5
    W_T: float = 0.2
    gamma: float = 0.01
    gamma2: float = 0.01


@dataclass
class Run:
    cycles: int = 100
    realizations: int = 20
    M_q: int = 40
    M: int = 1000
    base_seed: int = 0
    correction_enabled: bool = True
    # afai-baseline start: "top-half" fills every top-half site, "two-particle" uses `sites`.
    initial: str = "top-half"
    sites: list | None = None


@dataclass
class Localization:
    x0: int = 0
    y0: int | None = None
    record_stride: int = 100
    method: str = "ancilla"


@dataclass
class Correction:
    qubits: int = 4
    input: str = "mixed"
    target: str = "zero"
    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0
    placement: str = "before_probe"


@dataclass
class Output:
    directory: str = "results"


@dataclass
class ExperimentConfig:
    experiment: str = "nh-afai"
    geometry: Geometry = field(default_factory=Geometry)
    physics: Physics = field(default_factory=Physics)
    run: Run = field(default_factory=Run)
    localization: Localization = field(default_factory=Localization)
    correction: Correction = field(default_factory=Correction)
    output: Output = field(default_factory=Output)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig) if f.name != "experiment"}


def _coerce(section: str, key: str, value: Any, default: Any):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    return value


def _build_section(name: str, data: dict):
    cls = _SECTIONS[name]
    obj = cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown key {name}.{key}")
        setattr(obj, key, _coerce(name, key, value, getattr(obj, key)))
    return obj


def from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, value in data.items():
        if key == "experiment":
            cfg.experiment = value
        elif key in _SECTIONS:
            setattr(cfg, key, _build_section(key, value))
        else:
            raise ConfigError(f"unknown key {key}")
    validate(cfg)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Set dotted keys such as ``"physics.gamma"``; ``None`` values are skipped."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        if dotted == "experiment":
            cfg.experiment = value
            continue
        section, key = dotted.split(".")
        obj = getattr(cfg, section)
        setattr(obj, key, _coerce(section, key, value, getattr(obj, key)))
    validate(cfg)
    return cfg


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    data = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    cfg = from_dict(data)
    return apply_overrides(cfg, overrides or {})


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate(cfg: ExperimentConfig) -> None:
    g, p, r = cfg.geometry, cfg.physics, cfg.run
    _require(cfg.experiment in EXPERIMENTS, f"experiment must be one of {', '.join(EXPERIMENTS)}, got {cfg.experiment!r}")
    _require(g.Lx >= 1, f"geometry.Lx = {g.Lx} must be >= 1")
    _require(g.Ly >= 2, f"geometry.Ly = {g.Ly} must be >= 2")
    _require(p.J > 0, f"physics.J = {p.J} must be > 0")
    _require(p.delta > 0, f"physics.delta = {p.delta} must be > 0")
    _require(p.T > 0, f"physics.T = {p.T} must be > 0")
    _require(p.W >= 0, f"physics.W = {p.W} must be >= 0")
    _require(0 <= p.W_T <= 1, f"physics.W_T = {p.W_T} must lie in [0, 1] (step durations stay non-negative)")
    _require(0 <= p.gamma <= 0.5, f"physics.gamma = {p.gamma} must lie in [0, 1/2] (CPTP weight budget)")
    _require(0 <= p.gamma2 <= 1 / 16, f"physics.gamma2 = {p.gamma2} must lie in [0, 1/16] (CPTP weight budget)")
    _require(r.cycles >= 0, f"run.cycles = {r.cycles} must be >= 0")
    _require(r.realizations >= 1, f"run.realizations = {r.realizations} must be >= 1")
    _require(r.M_q >= 1, f"run.M_q = {r.M_q} must be >= 1")
    _require(r.M >= 1, f"run.M = {r.M} must be >= 1")
    _require(0 <= r.base_seed < 2**64, f"run.base_seed = {r.base_seed} must be an unsigned 64-bit integer")
    _require(r.initial in ("top-half", "two-particle"), f"run.initial must be 'top-half' or 'two-particle', got {r.initial!r}")
    n_sites = 2 * g.Lx * g.Ly
    if r.sites is not None:
        _require(
            isinstance(r.sites, list) and len(r.sites) == 2 and all(isinstance(s, int) and 0 <= s < n_sites for s in r.sites),
            f"run.sites must be two site indices in [0, {n_sites})",
        )
    if cfg.experiment in ("nh-afai", "zero-disorder-test"):
        _require(n_sites <= 36, f"two-particle runs need 2*Lx*Ly <= 36 sites, got {n_sites}")
    loc = cfg.localization
    _require(loc.record_stride >= 1, f"localization.record_stride = {loc.record_stride} must be >= 1")
    _require(loc.method in ("ancilla", "projector"), f"localization.method must be 'ancilla' or 'projector', got {loc.method!r}")
    _require(loc.y0 is None or loc.y0 in (0, g.Ly - 1), f"localization.y0 must be 0 or {g.Ly - 1}")
    c = cfg.correction
    _require(c.qubits >= 1, f"correction.qubits = {c.qubits} must be >= 1")
    _require(c.input in ("mixed", "random", "bad"), f"correction.input must be 'mixed', 'random' or 'bad', got {c.input!r}")
    _require(c.target in ("zero", "random"), f"correction.target must be 'zero' or 'random', got {c.target!r}")
    for name in ("p_x", "p_y", "p_z"):
        v = getattr(c, name)
        _require(0 <= v <= 1, f"correction.{name} = {v} must lie in [0, 1]")
    _require(c.p_x + c.p_y + c.p_z <= 1, "correction.p_x + p_y + p_z must not exceed 1")
    _require(
        c.placement in ("none", "before_probe", "after_correction", "both"),
        f"correction.placement must be none, before_probe, after_correction or both, got {c.placement!r}",
    )


def effective(cfg: ExperimentConfig) -> ExperimentConfig:
    """The configuration actually run: ``zero-disorder-test`` forces a noiseless, uncorrected sweep."""
    if cfg.experiment == "zero-disorder-test":
        return replace(
            cfg,
            physics=replace(cfg.physics, gamma=0.0, gamma2=0.0),
            run=replace(cfg.run, correction_enabled=False),
        )
    return cfg
