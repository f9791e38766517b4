"""Spatially embedded binary-threshold networks.

Neurons live in the unit cube. Input neurons sit on a grid on the x=0 face,
output neurons on the plane x = ``output_distance``, everything else is
scattered uniformly. A directed connection i -> j exists with probability
``exp(-dist(i, j) / connection_scale)``.

Matrix convention throughout the package: ``C[i, j]`` is the strength of the
connection from presynaptic neuron ``i`` (row) to postsynaptic neuron ``j``
(column).
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, fields
from enum import IntEnum

import numpy as np


class Role(IntEnum):
    INPUT = 0
    NOISE = 1
    HIDDEN = 2
    OUTPUT = 3
    REWARD = 4


class ConfigError(ValueError):
    """Raised for inconsistent network or experiment configuration."""


@dataclass
class NetworkConfig:
    n_input: int = 100
    n_noise: int = 50
    n_hidden: int = 600
    n_output: int = 50
    reward_neuron: bool = False
    connection_scale: float = 0.25
    firing_threshold: float = 1.0
    noise_rate: float = 0.05
    learning_rate: float = 0.01
    c_max: float | None = None  # defaults to 4 * firing_threshold
    init_strength_scale: float = 1.0
    reward_strategy: str = "action_inputs_both_fired"
    memory_mode: str = "off"
    consolidation_threshold: float | None = None  # defaults to 50 * learning_rate
    consolidation_sigma: float = 1.0
    aging_rate: float = 1e-4
    output_distance: float = 0.8
    input_shape: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c_max is None:
            self.c_max = 4.0 * self.firing_threshold
        if self.consolidation_threshold is None:
            self.consolidation_threshold = 50.0 * self.learning_rate
        if self.input_shape is not None:
            self.input_shape = tuple(int(v) for v in self.input_shape)

    @property
    def n(self) -> int:
        return (self.n_input + self.n_noise + self.n_hidden + self.n_output
                + int(self.reward_neuron))

    def validate(self) -> None:
        counts = (self.n_input, self.n_noise, self.n_hidden, self.n_output)
        if any(int(c) != c or c < 0 for c in counts):
            raise ConfigError(f"neuron counts must be non-negative integers, got {counts}")
        if self.n == 0:
            raise ConfigError("network must contain at least one neuron")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError(f"noise_rate must lie in [0, 1], got {self.noise_rate}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.firing_threshold <= 0:
            raise ConfigError("firing_threshold must be positive")
        if self.c_max <= 0:
            raise ConfigError("c_max must be positive")
        if self.connection_scale <= 0:
            raise ConfigError("connection_scale must be positive (use math.inf for full connectivity)")
        if self.init_strength_scale < 0:
            raise ConfigError("init_strength_scale must be non-negative")
        if not 0.0 <= self.output_distance <= 1.0:
            raise ConfigError("output_distance must lie inside the unit box")
        if self.input_shape is not None and math.prod(self.input_shape) != self.n_input:
            raise ConfigError(f"input_shape {self.input_shape} does not hold {self.n_input} inputs")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["input_shape"] is not None:
            d["input_shape"] = list(d["input_shape"])
        if math.isinf(d["connection_scale"]):
            d["connection_scale"] = "inf"
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown network config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("connection_scale") in ("inf", "Infinity"):
            data["connection_scale"] = math.inf
        return cls(**data)


def _grid_shape(n: int) -> tuple[int, int]:
    rows = max(1, math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


class Network:
    """Connection, plasticity and change-accumulator matrices plus firing state.

    Build instances with :func:`build_topology`.
    """

    def __init__(self, config: NetworkConfig, positions: np.ndarray, roles: np.ndarray,
                 connections: np.ndarray, plasticity: np.ndarray, exists: np.ndarray,
                 rng: np.random.Generator):
        self.config = config
        self.positions = positions
        self.roles = roles
        self.C = connections
        self.P = plasticity
        self.A = np.zeros_like(connections)
        self.exists = exists
        self.firing_threshold = float(config.firing_threshold)
        self.c_max = float(config.c_max)
        self.rng = rng
        n = len(roles)
        self.last_firings = np.zeros(n, dtype=bool)
        self.current_firings = np.zeros(n, dtype=bool)

        self.input_idx = np.flatnonzero(roles == Role.INPUT)
        self.noise_idx = np.flatnonzero(roles == Role.NOISE)
        self.output_idx = np.flatnonzero(roles == Role.OUTPUT)
        self.driven_idx = np.flatnonzero((roles == Role.HIDDEN) | (roles == Role.OUTPUT)
                                         | (roles == Role.REWARD))
        reward = np.flatnonzero(roles == Role.REWARD)
        self.reward_idx = int(reward[0]) if len(reward) else None

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def n_input(self) -> int:
        return len(self.input_idx)

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def reset_activity(self) -> None:
        self.last_firings[:] = False
        self.current_firings[:] = False

    def drive(self, firing: np.ndarray) -> np.ndarray:
        """Weighted input sum into every neuron given a presynaptic firing vector."""
        active = np.flatnonzero(firing)
        if len(active) == 0:
            return np.zeros(self.n)
        return self.C[active].sum(axis=0)

    def step(self, external_input) -> np.ndarray:
        """Advance one timestep and return the new firing state."""
        x = np.asarray(external_input, dtype=float).reshape(-1)
        if x.shape[0] != self.n_input:
            raise ValueError(f"expected {self.n_input} input values, got {x.shape[0]}")

        new = np.zeros(self.n, dtype=bool)
        new[self.input_idx] = x > 0.5
        if len(self.noise_idx):
            new[self.noise_idx] = self.rng.random(len(self.noise_idx)) < self.config.noise_rate
        if len(self.driven_idx):
            total = self.drive(self.current_firings)
            new[self.driven_idx] = total[self.driven_idx] >= self.firing_threshold

        self.last_firings = self.current_firings
        self.current_firings = new
        return new.copy()


def build_topology(config: NetworkConfig) -> Network:
    """Place neurons, wire them by distance and draw initial strengths."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    roles = np.concatenate([
        np.full(config.n_input, Role.INPUT),
        np.full(config.n_noise, Role.NOISE),
        np.full(config.n_hidden, Role.HIDDEN),
        np.full(config.n_output, Role.OUTPUT),
        np.full(int(config.reward_neuron), Role.REWARD),
    ]).astype(np.int8)
    n = len(roles)

    positions = rng.random((n, 3))
    if config.n_input:
        rows, cols = config.input_shape or _grid_shape(config.n_input)
        r, c = np.divmod(np.arange(config.n_input), cols)
        positions[:config.n_input, 0] = 0.0
        positions[:config.n_input, 1] = (r + 0.5) / rows
        positions[:config.n_input, 2] = (c + 0.5) / cols
    positions[roles == Role.OUTPUT, 0] = config.output_distance

    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        prob = np.exp(-dist / config.connection_scale)
    exists = rng.random((n, n)) < prob
    np.fill_diagonal(exists, False)
    exists[:, (roles == Role.INPUT) | (roles == Role.NOISE)] = False

    s = config.init_strength_scale
    strengths = rng.uniform(-s, s, size=(n, n))
    C = np.where(exists, np.clip(strengths, -config.c_max, config.c_max), 0.0)
    P = exists.astype(float)
    return Network(config, positions, roles, C, P, exists, rng)


def _output_counts(firing, roles) -> tuple[int, int]:
    out = np.asarray(roles) == Role.OUTPUT
    total = int(out.sum())
    if total == 0:
        raise ValueError("network has no output neurons")
    return int(np.asarray(firing, dtype=bool)[out].sum()), total


def output_fraction(firing, roles) -> float:
    fired, total = _output_counts(firing, roles)
    return fired / total


def read_action_discrete(firing, roles, n_actions: int) -> int:
    """Map the fraction of firing output neurons onto ``range(n_actions)``."""
    if n_actions < 1:
        raise ValueError("n_actions must be >= 1")
    fired, total = _output_counts(firing, roles)
    # integer floor avoids p * n_actions landing a hair below a bin edge
    return min(fired * n_actions // total, n_actions - 1)


def read_action_continuous(firing, roles, lo: float, hi: float) -> float:
    if not lo < hi:
        raise ValueError("need lo < hi")
    return lo + output_fraction(firing, roles) * (hi - lo)
