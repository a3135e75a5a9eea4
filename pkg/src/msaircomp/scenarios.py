"""Node populations and configuration files."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import RayleighFading

__all__ = [
    "Scenario",
    "generate_profiles",
    "node_distances",
    "Config",
    "ConfigError",
    "OptimizerSettings",
    "SimSettings",
    "read_config",
    "load_config",
    "save_config",
    "split_config",
    "DEFAULT_PTH",
]

DEFAULT_PTH = (0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99)
MIN_DISTANCE_M = 1.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class Scenario:
    kind: str = "equal_gain"
    k_nodes: int = 100
    mean_gain_db: float = 10.0
    area_side_m: float = 200.0
    path_loss_exponent: float = 3.5
    placement_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("equal_gain", "placed"):
            raise ValueError(f"kind must be 'equal_gain' or 'placed', got {self.kind!r}")
        if int(self.k_nodes) != self.k_nodes or self.k_nodes < 1:
            raise ValueError(f"k_nodes must be a positive integer, got {self.k_nodes!r}")
        if not math.isfinite(self.mean_gain_db):
            raise ValueError("mean_gain_db must be finite")
        if self.kind == "placed":
            if not self.area_side_m > 2 * MIN_DISTANCE_M:
                raise ValueError(f"area_side_m must exceed {2 * MIN_DISTANCE_M} m")
            if not self.path_loss_exponent > 0:
                raise ValueError("path_loss_exponent must be positive")


def node_distances(scenario: Scenario) -> np.ndarray:
    """Node-to-sink distances for uniform placement in the square, sink at the
    centre. Nodes closer than 1 m are re-drawn."""
    rng = np.random.default_rng(np.random.SeedSequence([int(scenario.placement_seed), 0xA1C0]))
    half = scenario.area_side_m / 2.0
    d = np.empty(scenario.k_nodes)
    for k in range(scenario.k_nodes):
        while True:
            x, y = rng.uniform(-half, half, size=2)
            r = math.hypot(x, y)
            if r >= MIN_DISTANCE_M:
                d[k] = r
                break
    return d


def generate_profiles(scenario: Scenario) -> list[RayleighFading]:
    if scenario.kind == "equal_gain":
        return [RayleighFading(db_to_linear(scenario.mean_gain_db))] * scenario.k_nodes
    d = node_distances(scenario)
    loss_db = -10.0 * scenario.path_loss_exponent * np.log10(d)
    gains_db = loss_db - loss_db.mean() + scenario.mean_gain_db
    return [RayleighFading(db_to_linear(g)) for g in gains_db]


# -- configuration file ---------------------------------------------------------


class ConfigError(ValueError):
    """Configuration could not be parsed or validated."""


class Config(BaseModel):
    """On-disk configuration (YAML or JSON). Defaults: 100 nodes, average gain
    10 (= 10 dB), P_max = 10, unit noise variance."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Literal["equal_gain", "placed"] = "equal_gain"
    k_nodes: int = Field(100, ge=1)
    mean_gain_db: Optional[float] = None
    mean_gain_linear: Optional[float] = Field(None, gt=0)
    area_side_m: float = Field(200.0, gt=2.0)
    path_loss_exponent: float = Field(3.5, gt=0)
    placement_seed: int = 0

    p_max: float = Field(10.0, gt=0)
    noise_var: float = Field(1.0, gt=0)
    p_th: List[float] = Field(default_factory=lambda: list(DEFAULT_PTH))
    beta: float = Field(0.0, ge=0)
    beta_optsel: Optional[float] = Field(None, ge=0)
    n_slots_range: Tuple[int, int] = (1, 8)
    alpha_step: float = Field(0.05, gt=0)
    alpha_refine_step: float = Field(0.005, gt=0)

    policies: List[Literal["aircomp", "selfirst", "optsel"]] = Field(
        default_factory=lambda: ["aircomp", "selfirst", "optsel"]
    )
    n_runs: int = Field(100_000, ge=1)
    seed: int = 0

    @field_validator("p_th")
    @classmethod
    def _pth_open_unit(cls, v):
        for p in v:
            if not 0.0 < p < 1.0:
                raise ValueError(f"each p_th must lie in (0, 1), got {p}")
        return v

    @field_validator("n_slots_range")
    @classmethod
    def _range_ordered(cls, v):
        lo, hi = v
        if lo < 1 or hi < lo:
            raise ValueError(f"n_slots_range must satisfy 1 <= A <= B, got {v}")
        return v

    @model_validator(mode="after")
    def _one_gain_unit(self):
        if self.mean_gain_db is not None and self.mean_gain_linear is not None:
            raise ValueError("give mean_gain_db or mean_gain_linear, not both")
        return self

    @property
    def gain_db(self) -> float:
        if self.mean_gain_linear is not None:
            return 10.0 * math.log10(self.mean_gain_linear)
        return 10.0 if self.mean_gain_db is None else self.mean_gain_db

    def to_scenario(self) -> Scenario:
        return Scenario(
            kind=self.scenario,
            k_nodes=self.k_nodes,
            mean_gain_db=self.gain_db,
            area_side_m=self.area_side_m,
            path_loss_exponent=self.path_loss_exponent,
            placement_seed=self.placement_seed,
        )

    def digest(self) -> str:
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class OptimizerSettings:
    p_th: tuple
    n_slots: tuple
    p_max: float
    noise_var: float
    beta: float
    beta_optsel: float
    alpha_step: float
    refine_step: float


@dataclass(frozen=True)
class SimSettings:
    policies: tuple
    n_runs: int
    seed: int


def split_config(cfg: Config):
    """``(Scenario, SimSettings, OptimizerSettings)`` from a validated config."""
    lo, hi = cfg.n_slots_range
    opt = OptimizerSettings(
        p_th=tuple(cfg.p_th),
        n_slots=tuple(range(lo, hi + 1)),
        p_max=cfg.p_max,
        noise_var=cfg.noise_var,
        beta=cfg.beta,
        beta_optsel=cfg.beta if cfg.beta_optsel is None else cfg.beta_optsel,
        alpha_step=cfg.alpha_step,
        refine_step=cfg.alpha_refine_step,
    )
    sim = SimSettings(tuple(cfg.policies), cfg.n_runs, cfg.seed)
    return cfg.to_scenario(), sim, opt


def _format_errors(err: ValidationError, source) -> str:
    lines = [f"invalid configuration in {source}:"]
    for e in err.errors():
        key = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {key}: {e['msg']}")
    return "\n".join(lines)


def read_config(path) -> Config:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration {path} must be a mapping at the top level")
    try:
        return Config.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, path)) from exc


def load_config(path):
    """``(Scenario, SimSettings, OptimizerSettings)`` from a config file."""
    return split_config(read_config(path))


def save_config(config: Config, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.model_dump(mode="json"), sort_keys=True))
