"""Run configuration: JSON with a versioned schema and strict validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .continuation import TRIAL_MODES, FrequencyGrid
from .curvekit import ConstraintParams
from .forward import ScatteringSetup
from .sfopt import FILTERS, METHODS, OptimizerSettings

SCHEMA = "softscat-run"
SCHEMA_VERSION = 1
MODES = ("cif", "scif", "random-init-cif")


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    k_min: float = 1.0
    dk: float = 0.25
    n: int = 117

    def build(self) -> FrequencyGrid:
        return FrequencyGrid(self.k_min, self.dk, self.n)


@dataclass
class SensorConfig:
    direction_factor: float = 10.0  # N_d = floor(direction_factor * k)
    receivers_per_direction: float = 1.0  # N_r = round(ratio * N_d)
    radius: float = 10.0

    def setup(self, k: float) -> ScatteringSetup:
        nd = max(1, int(math.floor(self.direction_factor * k + 1e-9)))
        nr = max(1, int(round(self.receivers_per_direction * nd)))
        return ScatteringSetup(k, nd, nr, self.radius)


@dataclass
class OptimizerConfig:
    method: str = "sd"
    filter: str = "gaussian"
    n_sd: int = 5
    maxit: int = 100
    eps_c: float = 1e-3
    eps_r: float = 1e-5
    n_filter: int = 10
    n_h: int | None = None
    eps_kappa: float = 0.1
    floor_modes: int = 20

    def build(self) -> OptimizerSettings:
        return OptimizerSettings(
            method=self.method,
            filter=self.filter,
            n_sd=self.n_sd,
            maxit=self.maxit,
            eps_c=self.eps_c,
            eps_r=self.eps_r,
            n_filter=self.n_filter,
            constraint=ConstraintParams(self.eps_kappa, self.floor_modes),
            n_h=self.n_h,
        )


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    mode: str = "cif"
    seed: int = 0
    n_trials: int = 1
    p: float = 0.603
    max_path_len: int | None = None
    noise: float = 0.0
    synthesis_nodes: int | None = None

    def validate(self) -> "RunConfig":
        g, s, o = self.grid, self.sensors, self.optimizer
        checks = [
            (g.k_min > 0, "grid.k_min must be positive"),
            (g.dk > 0, "grid.dk must be positive"),
            (isinstance(g.n, int) and g.n >= 1, "grid.n must be a positive integer"),
            (s.direction_factor > 0, "sensors.direction_factor must be positive"),
            (s.receivers_per_direction > 0, "sensors.receivers_per_direction must be positive"),
            (s.radius > 0, "sensors.radius must be positive"),
            (o.method in METHODS, f"optimizer.method must be one of {METHODS}"),
            (o.filter in FILTERS, f"optimizer.filter must be one of {FILTERS}"),
            (isinstance(o.n_sd, int) and o.n_sd >= 0, "optimizer.n_sd must be a non-negative integer"),
            (isinstance(o.maxit, int) and o.maxit >= 1, "optimizer.maxit must be at least 1"),
            (o.eps_c > 0 and o.eps_r > 0, "optimizer tolerances must be positive"),
            (isinstance(o.n_filter, int) and o.n_filter >= 0, "optimizer.n_filter must be a non-negative integer"),
            (o.n_h is None or (isinstance(o.n_h, int) and o.n_h >= 1), "optimizer.n_h must be null or >= 1"),
            (0 < o.eps_kappa < 1, "optimizer.eps_kappa must lie in (0, 1)"),
            (isinstance(o.floor_modes, int) and o.floor_modes >= 1, "optimizer.floor_modes must be >= 1"),
            (self.mode in MODES, f"mode must be one of {MODES}"),
            (isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer"),
            (isinstance(self.n_trials, int) and self.n_trials >= 1, "n_trials must be at least 1"),
            (0.5 < self.p <= 1.0, "p must lie in (1/2, 1]"),
            (self.max_path_len is None or self.max_path_len >= g.n, "max_path_len must be null or >= grid.n"),
            (self.noise >= 0, "noise must be non-negative"),
            (self.synthesis_nodes is None or self.synthesis_nodes >= 1, "synthesis_nodes must be null or positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "version": SCHEMA_VERSION, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        schema = data.pop("schema", SCHEMA)
        version = data.pop("version", SCHEMA_VERSION)
        if schema != SCHEMA:
            raise ConfigError(f"unexpected schema {schema!r}")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config version {version} (expected {SCHEMA_VERSION})")
        subs = {"grid": GridConfig, "sensors": SensorConfig, "optimizer": OptimizerConfig}
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in subs:
                if not isinstance(value, dict):
                    raise ConfigError(f"{key} must be an object")
                sub_known = {f.name for f in fields(subs[key])}
                extra = set(value) - sub_known
                if extra:
                    raise ConfigError(f"unknown keys in {key}: {sorted(extra)}")
                kwargs[key] = subs[key](**value)
            else:
                kwargs[key] = value
        return cls(**kwargs).validate()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def setup_factory(self):
        return self.sensors.setup


assert set(TRIAL_MODES) <= set(MODES)
