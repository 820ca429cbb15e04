"""Experiment configuration files.

A config is a JSON object with ``"schema": "tolfalsify.experiment/v1"``.
Every field is optional except ``system``::

    {
      "schema": "tolfalsify.experiment/v1",
      "system": "watertank",
      "controller": {"file": "my_pid.json"},
      "spec": null,
      "model": {"deviation": {"upper": [1.8, 0.8]}},
      "mode": "two-layer-heuristic",
      "upper_budget": 100,
      "lower_budget": 100,
      "repetitions": 3,
      "seed": 7
    }

``controller`` is ``null`` (the shipped controller), ``{"file": path}``
(resolved relative to the config file) or an inline policy object.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .control import PolicyFormatError, default_policy, load_policy, policy_from_dict
from .envs import SYSTEMS, make_model
from .falsify import CampaignConfig, derive_seed

SCHEMA = "tolfalsify.experiment/v1"
MODES = {
    "two-layer-plain": "plain",
    "plain": "plain",
    "two-layer-heuristic": "heuristic",
    "heuristic": "heuristic",
    "one-layer": "one-layer",
    "grid": "grid",
}


class ConfigError(ValueError):
    pass


@dataclass
class GridSettings:
    dims: list = field(default_factory=lambda: [0, 1])
    resolution: int = 20
    lower_budget: int = 50
    overlay: Optional[str] = None


@dataclass
class ExperimentConfig:
    system: str
    controller: Any = None
    spec: Optional[str] = None
    model: Dict[str, Any] = field(default_factory=dict)
    mode: str = "two-layer-plain"
    upper_budget: int = 100
    upper_iterations: Optional[int] = None
    lower_budget: int = 100
    budget: int = 10_000
    popsize: Optional[int] = None
    sigma0: float = 0.2
    penalty: float = 1.0
    w_gamma: float = 1.0
    w_sim: float = 0.5
    norm: Any = 2
    optimizer: str = "cmaes"
    lower_optimizer: str = "cmaes"
    repetitions: int = 1
    seed: int = 0
    name: Optional[str] = None
    output: Optional[str] = None
    grid: GridSettings = field(default_factory=GridSettings)
    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}; choose from {sorted(SYSTEMS)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {sorted(MODES)}")
        if isinstance(self.grid, dict):
            try:
                self.grid = GridSettings(**self.grid)
            except TypeError as exc:
                raise ConfigError(f"grid: {exc}") from None
        for name in ("upper_budget", "lower_budget", "budget"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be a non-negative integer")
        if self.lower_budget < 1:
            raise ConfigError("lower_budget must be at least 1")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.norm not in (1, 2, "inf"):
            raise ConfigError("norm must be 1, 2 or \"inf\"")

    @property
    def campaign_mode(self) -> str:
        return MODES[self.mode]

    @property
    def run_name(self) -> str:
        return self.name or f"{self.system}-{self.campaign_mode}"

    def rep_seed(self, rep: int) -> int:
        return derive_seed(self.seed, rep)

    def build_model(self):
        try:
            return make_model(self.system, self.model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model overrides: {exc}") from None

    def build_policy(self):
        c = self.controller
        try:
            if c is None:
                return default_policy(self.system)
            if isinstance(c, dict) and "file" in c:
                path = Path(c["file"])
                if not path.is_absolute():
                    path = Path(self.base_dir) / path
                if not path.is_file():
                    raise ConfigError(f"controller file not found: {path}")
                return load_policy(path)
            if isinstance(c, dict):
                return policy_from_dict(c)
        except PolicyFormatError as exc:
            raise ConfigError(f"controller: {exc}") from None
        raise ConfigError("controller must be null, {\"file\": ...} or a policy object")

    def campaign(self, rep: int = 0) -> CampaignConfig:
        mode = self.campaign_mode
        return CampaignConfig(
            mode="plain" if mode == "grid" else mode,
            upper_budget=self.upper_budget,
            upper_iterations=self.upper_iterations,
            lower_budget=self.lower_budget,
            budget=self.budget,
            popsize=self.popsize,
            sigma0=self.sigma0,
            penalty=self.penalty,
            w_gamma=self.w_gamma,
            w_sim=self.w_sim,
            norm=self.norm,
            seed=self.rep_seed(rep),
            optimizer=self.optimizer,
            lower_optimizer=self.lower_optimizer,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return {"schema": SCHEMA, **d}


def config_from_dict(data: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    schema = data.pop("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    if "system" not in data:
        raise ConfigError("config needs a 'system' field")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"base_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    try:
        return ExperimentConfig(**data, base_dir=str(base_dir))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read a config file (or start from ``{}`` when ``path`` is None) and
    apply ``key=value`` overrides."""
    if path is None:
        data, base = {}, Path.cwd()
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from None
        base = path.parent
    for item in overrides:
        data = apply_override(data, item)
    return config_from_dict(data, base)


def apply_override(data: dict, item: str) -> dict:
    """Set a dotted key from ``key=value``; the value is parsed as JSON when
    possible and kept as a string otherwise."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    data = copy.deepcopy(data)
    node = data
    parts = key.strip().split(".")
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            node[p] = nxt
        node = nxt
    node[parts[-1]] = value
    return data
