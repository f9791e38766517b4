"""Experiment configuration: JSON files mapped onto dataclasses.

The schema is documented in ``docs/config.md``; :func:`load_config` rejects
unknown keys so typos fail loudly instead of silently using defaults.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..environments import ENVIRONMENTS
from ..learning import MemoryMode, RewardStrategy
from ..network import ConfigError, NetworkConfig

REWARD_SOURCES = ("env_reward", "novelty_firing", "novelty_frames")
STDP_MODES = ("plain", "reward_modulated", "off")
ENCODINGS = ("population", "direct", "pixels")
FRAME_ENVS = ("pattern_stream", "runner")
OUTPUT_ENV_VAR = "NIBOX_OUTPUT_DIR"


@dataclass
class EvalProtocol:
    trials: int = 0  # frozen-evaluation episodes run after training


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    environment: str = "xor"
    env_params: dict = field(default_factory=dict)
    encoding: str = "population"
    bins: int = 10
    reward_source: str = "env_reward"
    stdp: str = "plain"
    direct_reward: bool = True
    novelty_scale: float = 1.0
    reward_baseline: float = 0.0  # running-mean rate subtracted from the learning signal; 0 = off
    baseline_init: float | None = None  # starting value of that running mean; None = first signal
    episodes: int = 100
    max_steps: int = 1000
    steps_per_decision: int = 5
    eval: EvalProtocol = field(default_factory=EvalProtocol)
    output_dir: str = "runs"
    seeds: list = field(default_factory=lambda: [0])

    def validate(self) -> None:
        self.network.validate()
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.reward_source not in REWARD_SOURCES:
            raise ConfigError(f"reward_source must be one of {REWARD_SOURCES}")
        if self.reward_source == "novelty_frames" and self.environment not in FRAME_ENVS:
            raise ConfigError("novelty_frames needs a frame-producing environment")
        if self.stdp not in STDP_MODES:
            raise ConfigError(f"stdp must be one of {STDP_MODES}")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}")
        try:
            RewardStrategy(self.network.reward_strategy)
            MemoryMode(self.network.memory_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.episodes < 0 or self.max_steps < 1 or self.steps_per_decision < 1:
            raise ConfigError("episodes >= 0, max_steps >= 1 and steps_per_decision >= 1 required")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if not 0.0 <= self.reward_baseline <= 1.0:
            raise ConfigError("reward_baseline is a rate in [0, 1]")
        if not self.seeds or any(int(s) != s for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of integers")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["network"] = self.network.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        data = dict(data)
        try:
            data["network"] = NetworkConfig.from_dict(data.get("network", {}))
            data["eval"] = EvalProtocol(**data.get("eval", {}))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV_VAR) or self.output_dir)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ExperimentConfig.from_dict(data)
