"""Experiment configuration files (YAML or JSON).

Every block and key is optional and has a default; unknown keys are an
error.  All randomness derives from the top-level ``seed`` unless a block
overrides it explicitly.

.. code-block:: yaml

    seed: 7
    scenario:              # diagnosis runs
      participants: 100
      cheaters: 5          # or cheater_fraction: 0.05
      coalitions: 1        # or coalition_sizes: [3, 2]
      strategy: consistent_collusion
      strategy_params: {}
    graph:                 # resilient-graph supply for diagnosis
      verify_limit: 24
      max_attempts: 200
    econ:
      B: 1.0
      C: 1.0
      L: 100.0
      S: 1.0
      G: 1.0
      tolerance: 1.0e-9
      cdf: [[1, 0.5], [10, 0.5]]   # (value, point mass) pairs for U
    simulation:
      population: 10000
      coalition_fraction: 0.05
      n_tasks: 1000000
      replication_prob: 1.0
      cheat_prob: 1.0
      P: 0.5
      G: 0.95
      ramp: 20
      initial_completed: 0
      fresh_identity_completed: 0
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .engine import Scenario


class ConfigError(ValueError):
    pass


@dataclass
class GraphConfig:
    verify_limit: int = 24
    max_attempts: int = 200
    seed: int | None = None


@dataclass
class EconConfig:
    B: float = 1.0
    C: float = 1.0
    L: float = 100.0
    S: float = 1.0
    G: float = 1.0
    tolerance: float = 1e-9
    cdf: list[list[float]] = field(default_factory=lambda: [[float(i), 0.1] for i in range(1, 11)])


@dataclass
class SimulationConfig:
    population: int = 10_000
    coalition_fraction: float = 0.05
    n_tasks: int = 1_000_000
    replication_prob: float = 1.0
    cheat_prob: float = 1.0
    P: float = 0.5
    G: float = 0.95
    ramp: int = 20
    initial_completed: int = 0
    fresh_identity_completed: int = 0


@dataclass
class ExperimentConfig:
    seed: int = 0
    scenario: dict[str, Any] = field(default_factory=lambda: {"participants": 100, "cheaters": 5})
    graph: GraphConfig = field(default_factory=GraphConfig)
    econ: EconConfig = field(default_factory=EconConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def build_scenario(self, seed: int | None = None) -> Scenario:
        data = dict(self.scenario)
        if seed is not None:
            data["seed"] = seed
        else:
            data.setdefault("seed", self.seed)
        try:
            return Scenario.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario: {exc}") from None


def _block(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise ConfigError(f"{name} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    return cls(**data)


SCENARIO_KEYS = {f for f in Scenario.__dataclass_fields__} | {"cheater_fraction"}


def parse_config(data: Mapping[str, Any] | None) -> ExperimentConfig:
    data = dict(data or {})
    if "participants" in data:
        # bare scenario file
        seed = data.get("seed", 0)
        unknown = set(data) - SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return ExperimentConfig(seed=seed, scenario=data)
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    scenario = data.get("scenario", ExperimentConfig().scenario)
    if not isinstance(scenario, Mapping):
        raise ConfigError("scenario must be a mapping")
    unknown = set(scenario) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return ExperimentConfig(
        seed=int(data.get("seed", 0)),
        scenario=dict(scenario),
        graph=_block(GraphConfig, data.get("graph"), "graph"),
        econ=_block(EconConfig, data.get("econ"), "econ"),
        simulation=_block(SimulationConfig, data.get("simulation"), "simulation"),
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data)
