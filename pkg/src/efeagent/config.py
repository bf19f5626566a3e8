"""Trial configuration: defaults, file format, and model builders.

The config file is flat ``key = value`` text (arrays bracketed, ``#``
comments allowed); unknown keys are rejected so stale files fail loudly.
Defaults reproduce the navigation benchmark setup.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .distributions import MatrixNormalWishart
from .filtering import ArxBeliefs, Buffers
from .planning import ControlBox, ControlPrior, GoalPrior
from .sim import PlantConfig

D_U = 2
D_Y = 2

AGENTS = ("efe", "mpc")


@dataclass(frozen=True)
class TrialConfig:
    agent: str = "efe"
    steps: int = 10_000
    horizon: int = 3
    m_u: int = 2
    m_y: int = 2
    nu0: float = 100.0
    m0_scale: float | None = None  # None -> 1 / (d_x * d_y)
    lambda0_scale: float = 1e-2
    omega0_scale: float = 1.0
    upsilon_scale: float = 1e-6
    goal_mean: tuple[float, float] = (0.0, 1.0)
    s_star_scale: float = 1e-6
    box_lo: tuple[float, float] = (-1.0, -1.0)
    box_hi: tuple[float, float] = (1.0, 1.0)
    plant: PlantConfig = field(default_factory=PlantConfig)
    seed: int = 0
    sweeps: int = 1

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ValueError(f"agent must be one of {AGENTS}, got {self.agent!r}")
        for name in ("steps", "horizon", "sweeps"):
            value = getattr(self, name)
            if name != "sweeps" and value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
            if name == "sweeps" and value < 0:
                raise ValueError(f"sweeps must be >= 0, got {value}")
        if self.m_u < 0 or self.m_y < 0:
            raise ValueError("buffer lengths must be nonnegative")
        for name in ("nu0", "lambda0_scale", "omega0_scale", "upsilon_scale", "s_star_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def d_x(self) -> int:
        return D_U * (self.m_u + 1) + D_Y * self.m_y

    @property
    def resolved_m0_scale(self) -> float:
        if self.m0_scale is not None:
            return float(self.m0_scale)
        return 1.0 / (self.d_x * D_Y)

    def initial_beliefs(self) -> ArxBeliefs:
        prior = MatrixNormalWishart(
            mean=self.resolved_m0_scale * np.eye(self.d_x, D_Y),
            row_precision=self.lambda0_scale * np.eye(self.d_x),
            scatter=self.omega0_scale * np.eye(D_Y),
            dof=self.nu0,
        )
        return ArxBeliefs(prior, D_U, D_Y, self.m_u, self.m_y)

    def initial_buffers(self) -> Buffers:
        return Buffers.zeros(D_U, D_Y, self.m_u, self.m_y)

    def goal_prior(self) -> GoalPrior:
        return GoalPrior(np.asarray(self.goal_mean), self.s_star_scale * np.eye(D_Y))

    def control_prior(self) -> ControlPrior:
        return ControlPrior(self.upsilon_scale * np.eye(D_U))

    def control_box(self) -> ControlBox:
        return ControlBox(np.asarray(self.box_lo), np.asarray(self.box_hi))


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (tuple, list, np.ndarray)):
        return "[" + ", ".join(repr(float(v)) for v in value) + "]"
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    return repr(float(value))


def config_items(cfg: TrialConfig) -> list[tuple[str, object]]:
    """Flat (key, value) view of a config, plant fields inlined and the
    coefficient-prior scale resolved to its numeric value."""
    return [
        ("agent", cfg.agent),
        ("steps", cfg.steps),
        ("horizon", cfg.horizon),
        ("m_u", cfg.m_u),
        ("m_y", cfg.m_y),
        ("nu0", cfg.nu0),
        ("m0_scale", cfg.resolved_m0_scale),
        ("lambda0_scale", cfg.lambda0_scale),
        ("omega0_scale", cfg.omega0_scale),
        ("upsilon_scale", cfg.upsilon_scale),
        ("goal_mean", cfg.goal_mean),
        ("s_star_scale", cfg.s_star_scale),
        ("box_lo", cfg.box_lo),
        ("box_hi", cfg.box_hi),
        ("dt", cfg.plant.dt),
        ("process_noise", cfg.plant.process_noise),
        ("measurement_noise", cfg.plant.measurement_noise),
        ("z0", cfg.plant.z0),
        ("seed", cfg.seed),
        ("sweeps", cfg.sweeps),
    ]


def format_config(cfg: TrialConfig) -> str:
    return "\n".join(f"{k} = {_format_value(v)}" for k, v in config_items(cfg)) + "\n"


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(float(part) for part in inner.split(","))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


_INT_KEYS = {"steps", "horizon", "m_u", "m_y", "seed", "sweeps"}
_FLOAT_KEYS = {
    "nu0",
    "m0_scale",
    "lambda0_scale",
    "omega0_scale",
    "upsilon_scale",
    "s_star_scale",
    "dt",
}
_TUPLE_KEYS = {
    "goal_mean",
    "box_lo",
    "box_hi",
    "process_noise",
    "measurement_noise",
    "z0",
}
_PLANT_KEYS = {"dt", "process_noise", "measurement_noise", "z0"}
KNOWN_KEYS = {"agent"} | _INT_KEYS | _FLOAT_KEYS | _TUPLE_KEYS


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        value = _parse_value(value_text)
        if key in _INT_KEYS:
            if not isinstance(value, int):
                raise ConfigError(f"line {lineno}: {key} must be an integer")
        elif key in _FLOAT_KEYS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"line {lineno}: {key} must be a number")
            value = float(value)
        elif key in _TUPLE_KEYS:
            if not isinstance(value, tuple):
                raise ConfigError(f"line {lineno}: {key} must be a bracketed array")
        values[key] = value
    return values


def config_from_dict(values: dict, base: TrialConfig | None = None) -> TrialConfig:
    base = base if base is not None else TrialConfig()
    plant_updates = {k: values.pop(k) for k in list(values) if k in _PLANT_KEYS}
    unknown = set(values) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    plant = replace(base.plant, **plant_updates) if plant_updates else base.plant
    return replace(base, plant=plant, **values)


def load_config(path: str | Path, base: TrialConfig | None = None) -> TrialConfig:
    return config_from_dict(parse_config_text(Path(path).read_text()), base)
