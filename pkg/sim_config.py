#!/usr/bin/env python3
"""
Experiment configuration and logging setup
Every key carries a default and where that default comes from; config files
are flat `key = value` text and environment variables override them.
"""

import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from loguru import logger

from advising import advice_sensitivity
from environments import REWARD_HIT, REWARD_TARGET, load_grid_map

SCENARIOS = ("grid", "load")
METHODS = ("da-rl", "sa-rl", "rl")
SETTINGS = ("static", "dynamic1", "dynamic2")
TOPOLOGIES = ("complete", "ring")
DECAYS = ("harmonic", "constant")

DEFAULT_OUTPUT_DIR = os.getenv("DASIM_OUTPUT_DIR", "results")
DEFAULT_LOG_LEVEL = "INFO"


class ConfigError(ValueError):
    """Invalid configuration; `key` names the offending entry"""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# key -> (default, provenance); "reference" marks values from the published setup,
# "reference range" a default inside a studied range, "chosen" a value decided here
CONFIG_KEYS: Dict[str, tuple] = {
    "scenario": ("grid", "reference: grid = robots and targets, load = factory load balancing"),
    "setting": ("static", "reference: grid dynamics static | dynamic1 (targets spawn) | dynamic2 (targets move)"),
    "method": ("da-rl", "reference: da-rl | sa-rl | rl"),
    "width": (12, "reference range: grid width 12..24"),
    "height": (8, "reference range: grid height 8..16"),
    "agents": (2, "reference range: agent count 2..6"),
    "targets": (20, "reference range: initial targets per round 20..60"),
    "obstacles": (15, "reference range: obstacle count 15..35"),
    "fixed_layout": (False, "chosen: keep the obstacle layout for the whole run"),
    "map_file": ("", "chosen: optional text map with . # T"),
    "p_spawn": (0.02, "chosen: dynamic1 spawn probability per step"),
    "p_move": (0.1, "chosen: dynamic2 move probability per target and step"),
    "max_round_steps": (200000, "chosen: cap on one grid round"),
    "item_types": (2, "reference range: load item types k 2..6"),
    "max_stock": (3, "reference range: load maximum stock M per type 3..7"),
    "p_process": (0.5, "reference range: load processing probability p_s 0.2..0.6"),
    "p_arrive": (0.4, "reference: load arrival probability p_a"),
    "round_length": (50, "chosen: load steps per learning round"),
    "alpha0": (0.2, "reference: initial learning rate"),
    "gamma": (0.8, "reference: discount factor"),
    "zeta": (0.1, "reference: policy learning rate"),
    "alpha_decay": ("harmonic", "reference: harmonic = alpha0/t; constant is a diagnostic"),
    "policy_floor": (0.01, "chosen: lower bound beta on every policy entry"),
    "epsilon": (1.0, "reference: privacy budget"),
    "delta_q": ("auto", "reference: advice sensitivity, auto = 3 on grid (alpha0 * 15), 1 on load; "
                        "chosen alternative: track = the auto value scaled by alpha_t / alpha0"),
    "self_advice": (True, "reference: advise from an own neighboring state without spending budget"),
    "ask_threshold": (3, "chosen: N, visits before an agent may ask"),
    "budget": (500, "chosen: communication budget C per agent and run"),
    "v_ask": (0.4, "reference: SA-RL ask parameter"),
    "v_give": (0.9, "reference: SA-RL give parameter"),
    "topology": ("complete", "chosen: who advises whom, complete | ring"),
    "runs": (500, "reference: replicas averaged"),
    "rounds": (30, "chosen: learning rounds per replica"),
    "seed": (1, "chosen: base seed"),
    "workers": (1, "chosen: replica processes"),
    "audit_log": (False, "chosen: write one advising audit log per replica"),
}

INT_KEYS = {"width", "height", "agents", "targets", "obstacles", "max_round_steps", "item_types",
            "max_stock", "round_length", "ask_threshold", "budget", "runs", "rounds", "seed", "workers"}
FLOAT_KEYS = {"p_spawn", "p_move", "p_process", "p_arrive", "alpha0", "gamma", "zeta",
              "policy_floor", "epsilon", "v_ask", "v_give"}
BOOL_KEYS = {"fixed_layout", "audit_log", "self_advice"}
DELTA_Q_MODES = ("auto", "track")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "grid"
    setting: str = "static"
    method: str = "da-rl"
    width: int = 12
    height: int = 8
    agents: int = 2
    targets: int = 20
    obstacles: int = 15
    fixed_layout: bool = False
    map_file: str = ""
    p_spawn: float = 0.02
    p_move: float = 0.1
    max_round_steps: int = 200000
    item_types: int = 2
    max_stock: int = 3
    p_process: float = 0.5
    p_arrive: float = 0.4
    round_length: int = 50
    alpha0: float = 0.2
    gamma: float = 0.8
    zeta: float = 0.1
    alpha_decay: str = "harmonic"
    policy_floor: float = 0.01
    epsilon: float = 1.0
    delta_q: Union[str, float] = "auto"
    self_advice: bool = True
    ask_threshold: int = 3
    budget: int = 500
    v_ask: float = 0.4
    v_give: float = 0.9
    topology: str = "complete"
    runs: int = 500
    rounds: int = 30
    seed: int = 1
    workers: int = 1
    audit_log: bool = False

    def __post_init__(self):
        validate_config(self)

    @property
    def action_count(self) -> int:
        return 4 if self.scenario == "grid" else 2

    @property
    def tracks_step_size(self) -> bool:
        return self.delta_q == "track"

    def resolved_delta_q(self) -> float:
        """dQ at the first step; `track` starts from the `auto` value"""
        if self.delta_q not in DELTA_Q_MODES:
            return float(self.delta_q)
        if self.scenario == "grid":
            return advice_sensitivity(self.alpha0, REWARD_TARGET, REWARD_HIT)
        return 1.0

    def to_mapping(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_value(self, key: str, value: Any) -> "ExperimentConfig":
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        return replace(self, **{key: parse_value(key, value)})


def _choice(key: str, value: str, allowed: tuple) -> None:
    if value not in allowed:
        raise ConfigError(key, f"'{value}' not one of {', '.join(allowed)}")


def validate_config(config: ExperimentConfig) -> None:
    _choice("scenario", config.scenario, SCENARIOS)
    _choice("setting", config.setting, SETTINGS)
    _choice("method", config.method, METHODS)
    _choice("topology", config.topology, TOPOLOGIES)
    _choice("alpha_decay", config.alpha_decay, DECAYS)
    for key in ("width", "height", "agents", "targets", "max_round_steps", "item_types", "max_stock",
                "round_length", "ask_threshold", "runs", "rounds", "workers"):
        if getattr(config, key) < 1:
            raise ConfigError(key, f"must be a positive count, got {getattr(config, key)}")
    for key in ("obstacles", "budget", "seed"):
        if getattr(config, key) < 0:
            raise ConfigError(key, f"must be non-negative, got {getattr(config, key)}")
    for key in ("p_spawn", "p_move", "p_process", "p_arrive"):
        if not 0.0 <= getattr(config, key) <= 1.0:
            raise ConfigError(key, f"must be a probability, got {getattr(config, key)}")
    for key in ("gamma", "zeta"):
        if not 0.0 < getattr(config, key) < 1.0:
            raise ConfigError(key, f"must lie in (0,1), got {getattr(config, key)}")
    if not 0.0 < config.alpha0 <= 1.0:
        raise ConfigError("alpha0", f"must lie in (0,1], got {config.alpha0}")
    if not config.policy_floor > 0 or config.policy_floor * config.action_count >= 1.0:
        raise ConfigError("policy_floor", f"{config.policy_floor} invalid for {config.action_count} actions")
    for key in ("epsilon", "v_ask", "v_give"):
        if not getattr(config, key) > 0:
            raise ConfigError(key, f"must be positive, got {getattr(config, key)}")
    if config.delta_q not in DELTA_Q_MODES and not (isinstance(config.delta_q, (int, float))
                                                    and config.delta_q > 0):
        raise ConfigError("delta_q", f"must be positive, auto or track, got {config.delta_q}")
    if config.scenario == "grid" and not config.map_file:
        cells = config.width * config.height
        if config.obstacles + config.targets + config.agents > cells:
            raise ConfigError("obstacles", f"obstacles, targets and agents exceed {cells} cells")
    if config.scenario == "grid" and config.map_file:
        _validate_map(config)


def _validate_map(config: ExperimentConfig) -> None:
    try:
        layout = load_grid_map(config.map_file)
    except (OSError, ValueError) as e:
        raise ConfigError("map_file", f"cannot use {config.map_file}: {e}") from None
    if not layout.targets:
        raise ConfigError("map_file", f"{config.map_file} has no targets")
    free = layout.width * layout.height - len(layout.obstacles) - len(layout.targets)
    if config.agents > free:
        raise ConfigError("map_file", f"{config.agents} agents do not fit {free} free cells")


def parse_value(key: str, raw: Any) -> Any:
    """Turn a text (or already typed) value into the key's type"""
    try:
        if key in BOOL_KEYS:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("true", "1", "yes", "on"):
                return True
            if text in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if key in INT_KEYS:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
        if key == "delta_q":
            text = str(raw).strip()
            return text if text in DELTA_Q_MODES else float(text)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse '{raw}'") from None


def config_from_mapping(values: Dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    parsed = {}
    for key, raw in values.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        parsed[key] = parse_value(key, raw)
    return replace(base or ExperimentConfig(), **parsed)


def parse_config_text(text: str) -> Dict[str, str]:
    values = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        values[key] = value
    return values


def load_config_file(path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from None
    return config_from_mapping(parse_config_text(text), base)


def apply_env_overrides(config: ExperimentConfig) -> ExperimentConfig:
    """DASIM_SEED and DASIM_WORKERS win over file values"""
    overrides = {}
    if os.getenv("DASIM_SEED"):
        overrides["seed"] = os.getenv("DASIM_SEED")
    if os.getenv("DASIM_WORKERS"):
        overrides["workers"] = os.getenv("DASIM_WORKERS")
    return config_from_mapping(overrides, config) if overrides else config


PRESETS: Dict[str, Dict[str, Any]] = {
    "grid-desk": {"scenario": "grid", "width": 12, "height": 8, "agents": 2, "targets": 20,
                  "obstacles": 15, "runs": 200, "rounds": 30, "delta_q": "track"},
    "grid-large": {"scenario": "grid", "width": 18, "height": 12, "agents": 4, "targets": 40,
                   "obstacles": 25, "runs": 500, "rounds": 30},
    "load-desk": {"scenario": "load", "agents": 3, "item_types": 2, "max_stock": 3, "p_process": 0.5,
                  "p_arrive": 0.4, "runs": 200, "rounds": 30, "delta_q": "track"},
    "load-simple": {"scenario": "load", "agents": 3, "item_types": 2, "max_stock": 3, "p_process": 0.5,
                    "p_arrive": 0.4, "runs": 500, "rounds": 30},
    "load-complex": {"scenario": "load", "agents": 5, "item_types": 3, "max_stock": 5, "p_process": 0.5,
                     "p_arrive": 0.4, "runs": 500, "rounds": 30},
}


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset '{name}', choose from {', '.join(PRESETS)}")
    return config_from_mapping(PRESETS[name])


def describe_keys() -> str:
    """Config reference: one `key = default  # provenance` line per key"""
    return "\n".join(f"{key} = {default}  # {doc}" for key, (default, doc) in CONFIG_KEYS.items())


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or os.getenv("DASIM_LOG_LEVEL", DEFAULT_LOG_LEVEL)).upper()
    logger.remove()
    logger.add(sys.stderr, level=level, format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}")
