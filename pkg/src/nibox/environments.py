"""Self-contained task environments sharing one reset/step interface.

Classic-control dynamics follow the usual public definitions of the tasks;
every constant lives on the instance so a run's settings can be audited.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class EpisodeDone(RuntimeError):
    """Raised when ``step`` is called on a finished episode."""


@dataclass
class Observation:
    values: np.ndarray
    bounds: np.ndarray  # shape (d, 2): per-dimension (low, high)

    def normalized(self) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.clip((self.values - lo) / (hi - lo), 0.0, 1.0)


@dataclass
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class Environment:
    """Base class: subclasses implement ``_reset`` and ``_step``."""

    name = "base"
    action_kind = "discrete"  # or "continuous"
    n_actions = 2
    action_low = 0.0
    action_high = 1.0
    max_steps = 1000
    frame_shape: tuple[int, int] | None = None

    def __init__(self, seed: int = 0, max_steps: int | None = None):
        self.rng = np.random.default_rng(seed)
        if max_steps is not None:
            self.max_steps = int(max_steps)
        self.steps = 0
        self.done = True
        self.goal_reached = False

    @property
    def bounds(self) -> np.ndarray:
        raise NotImplementedError

    def _observe(self, values) -> Observation:
        b = self.bounds
        v = np.clip(np.asarray(values, dtype=float), b[:, 0], b[:, 1])
        return Observation(v, b)

    def reset(self) -> Observation:
        self.steps = 0
        self.done = False
        self.goal_reached = False
        return self._observe(self._reset())

    def step(self, action) -> StepResult:
        if self.done:
            raise EpisodeDone(f"{self.name}: episode finished, call reset()")
        values, reward, terminal = self._step(action)
        self.steps += 1
        if terminal and self._goal_is_terminal:
            self.goal_reached = True
        self.done = terminal or self.steps >= self.max_steps
        return StepResult(self._observe(values), float(reward), self.done,
                          {"step": self.steps, "goal": self.goal_reached})

    # environments whose terminal state means success set this
    _goal_is_terminal = False

    def _reset(self):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


class XorEnv(Environment):
    """One-shot XOR: observe two random bits, answer, episode ends."""

    name = "xor"
    n_actions = 2
    max_steps = 1

    @property
    def bounds(self):
        return np.array([[0.0, 1.0], [0.0, 1.0]])

    def _reset(self):
        self.bits = self.rng.integers(0, 2, size=2)
        return self.bits.astype(float)

    def set_bits(self, b0: int, b1: int) -> Observation:
        """Start an episode with chosen bits (used for exhaustive evaluation)."""
        self.reset()
        self.bits = np.array([b0, b1])
        return self._observe(self.bits.astype(float))

    def _step(self, action):
        target = int(self.bits[0]) ^ int(self.bits[1])
        reward = 1.0 if int(action) == target else 0.0
        return self.bits.astype(float), reward, True


class MountainCarDiscrete(Environment):
    name = "mountain_car"
    n_actions = 3
    max_steps = 1000
    _goal_is_terminal = True

    min_position = -1.2
    max_position = 0.6
    max_speed = 0.07
    goal_position = 0.5
    force = 0.001
    gravity = 0.0025

    @property
    def bounds(self):
        return np.array([[self.min_position, self.max_position],
                         [-self.max_speed, self.max_speed]])

    def _reset(self):
        self.state = np.array([self.rng.uniform(-0.6, -0.4), 0.0])
        return self.state.copy()

    def _push(self, action) -> float:
        a = int(action)
        if a not in (0, 1, 2):
            raise ValueError(f"action must be 0, 1 or 2, got {action}")
        return (a - 1) * self.force

    def _step(self, action):
        x, v = self.state
        v += self._push(action) - self.gravity * math.cos(3 * x)
        v = min(max(v, -self.max_speed), self.max_speed)
        x += v
        x = min(max(x, self.min_position), self.max_position)
        if x == self.min_position and v < 0:
            v = 0.0
        self.state = np.array([x, v])
        goal = x >= self.goal_position
        return self.state.copy(), -1.0, goal


class MountainCarContinuous(MountainCarDiscrete):
    name = "mountain_car_continuous"
    action_kind = "continuous"
    action_low = -1.0
    action_high = 1.0
    goal_position = 0.45
    power = 0.0015

    def _push(self, action) -> float:
        u = min(max(float(action), self.action_low), self.action_high)
        return u * self.power


def wrap_angle(theta: float) -> float:
    """Map an angle onto (-pi, pi]."""
    return math.pi - ((math.pi - theta) % (2 * math.pi))


class Pendulum(Environment):
    name = "pendulum"
    action_kind = "continuous"
    action_low = -2.0
    action_high = 2.0
    max_steps = 1000

    max_speed = 8.0
    g = 10.0
    m = 1.0
    length = 1.0
    dt = 0.05

    @property
    def bounds(self):
        return np.array([[-math.pi, math.pi], [-self.max_speed, self.max_speed]])

    def _reset(self):
        self.theta = self.rng.uniform(-math.pi, math.pi)
        self.theta_dot = self.rng.uniform(-1.0, 1.0)
        return self._obs()

    def _obs(self):
        return np.array([wrap_angle(self.theta), self.theta_dot])

    @staticmethod
    def reward_of(theta: float, theta_dot: float, u: float) -> float:
        return -(wrap_angle(theta) ** 2 + 0.1 * theta_dot ** 2 + 0.001 * u ** 2)

    def _step(self, action):
        u = min(max(float(action), self.action_low), self.action_high)
        reward = self.reward_of(self.theta, self.theta_dot, u)
        acc = 3 * self.g / (2 * self.length) * math.sin(self.theta) + 3.0 / (self.m * self.length ** 2) * u
        self.theta_dot = min(max(self.theta_dot + acc * self.dt, -self.max_speed), self.max_speed)
        self.theta = self.theta + self.theta_dot * self.dt
        return self._obs(), reward, False


def _disk(size: int) -> np.ndarray:
    c = (size - 1) / 2
    yy, xx = np.mgrid[:size, :size]
    return (((yy - c) ** 2 + (xx - c) ** 2) <= (size / 2) ** 2).astype(float)


def _ring(size: int) -> np.ndarray:
    c = (size - 1) / 2
    yy, xx = np.mgrid[:size, :size]
    r2 = (yy - c) ** 2 + (xx - c) ** 2
    return ((r2 <= (size / 2) ** 2) & (r2 >= (size / 2 - 1.2) ** 2)).astype(float)


class PatternStream(Environment):
    """Frames showing one of two glyphs; the shown glyph alternates in stages.

    Glyph A is a filled disk, glyph B a ring, both placed at a random offset
    on a ``width x height`` canvas with additive uniform pixel noise. With
    ``control=True`` glyph A is shown in both stages, so stage labels carry
    no visual information.
    """

    name = "pattern_stream"
    n_actions = 1
    max_steps = 10_000

    def __init__(self, seed: int = 0, max_steps: int | None = None, width: int = 10,
                 height: int = 10, glyph_size: int = 6, noise: float = 0.1,
                 stage_duration: tuple[int, int] = (20, 60), control: bool = False,
                 fixed_offset: tuple[int, int] | None = None):
        super().__init__(seed, max_steps)
        if glyph_size > min(width, height):
            raise ValueError("glyph does not fit on the canvas")
        self.width, self.height = width, height
        self.frame_shape = (height, width)
        self.noise = noise
        self.stage_duration = (int(stage_duration[0]), int(stage_duration[1]))
        self.control = control
        self.fixed_offset = fixed_offset
        self.glyphs = (_disk(glyph_size), _ring(glyph_size))
        self.stage = 0
        self._left = 0
        self.durations: list[int] = []

    @property
    def bounds(self):
        return np.tile([0.0, 1.0], (self.width * self.height, 1))

    def _new_stage(self, first: bool = False) -> None:
        if not first:
            self.stage = 1 - self.stage
        lo, hi = self.stage_duration
        self._left = int(self.rng.integers(lo, hi + 1))
        self.durations.append(self._left)

    def glyph_for(self, stage: int) -> np.ndarray:
        return self.glyphs[0 if self.control else stage]

    def next_frame(self) -> np.ndarray:
        if self._left == 0:
            self._new_stage(first=not self.durations)
        self._left -= 1
        self.current_stage = self.stage
        glyph = self.glyph_for(self.stage)
        gh, gw = glyph.shape
        if self.fixed_offset is not None:
            oy, ox = self.fixed_offset
        else:
            oy = int(self.rng.integers(0, self.height - gh + 1))
            ox = int(self.rng.integers(0, self.width - gw + 1))
        frame = np.zeros((self.height, self.width))
        frame[oy:oy + gh, ox:ox + gw] = glyph
        if self.noise > 0:
            frame = frame + self.rng.uniform(-self.noise, self.noise, frame.shape)
        return np.clip(frame, 0.0, 1.0).reshape(-1)

    def _reset(self):
        return self.next_frame()

    def _step(self, action):
        return self.next_frame(), 0.0, False

    def step(self, action) -> StepResult:
        result = super().step(action)
        result.info["stage"] = self.current_stage
        return result


class RunnerEnv(Environment):
    """Minimal side-scrolling obstacle runner with pixel observations.

    The player stands in column ``player_col`` of a ``width x height`` grid.
    Unit-width obstacles slide left one column per step; gaps between them are
    drawn uniformly from ``gap_range``. Action 1 jumps: the jump starts in the
    same step, the player is airborne for ``jump_duration`` collision checks and
    must then spend one step on the ground before jumping again. Touching an
    obstacle while grounded ends the episode and shows an inverted game-over
    frame. Reward is +1 per step survived.

    Within a step the order is: launch, scroll, collision check, airtime
    countdown. Jumping while an obstacle sits in the adjacent column clears it.
    """

    name = "runner"
    n_actions = 2
    max_steps = 1000

    def __init__(self, seed: int = 0, max_steps: int | None = None, width: int = 10,
                 height: int = 10, player_col: int = 1, jump_duration: int = 3,
                 gap_range: tuple[int, int] = (5, 12), first_obstacle: int | None = None):
        super().__init__(seed, max_steps)
        self.width, self.height = width, height
        self.frame_shape = (height, width)
        self.player_col = player_col
        self.jump_duration = jump_duration
        self.gap_range = (int(gap_range[0]), int(gap_range[1]))
        self.first_obstacle = first_obstacle
        self.crashed = False

    @property
    def bounds(self):
        return np.tile([0.0, 1.0], (self.width * self.height, 1))

    def _gap(self) -> int:
        lo, hi = self.gap_range
        return int(self.rng.integers(lo, hi + 1))

    def _reset(self):
        self.air = 0
        self.cooldown = 0
        self.crashed = False
        start = self.first_obstacle if self.first_obstacle is not None else self.width
        self.obstacles = [start]
        self._fill()
        return self.render()

    def _fill(self) -> None:
        while self.obstacles[-1] < 2 * self.width:
            self.obstacles.append(self.obstacles[-1] + self._gap())

    def height_of(self, air: int) -> int:
        """Drawn height of the player with ``air`` airborne checks still to come."""
        return min(air, self.height - 2)

    def render(self) -> np.ndarray:
        frame = np.zeros((self.height, self.width))
        ground = self.height - 1
        for ob in self.obstacles:
            if 0 <= ob < self.width:
                frame[ground, ob] = 1.0
        frame[ground - 1 - self.height_of(self.air), self.player_col] = 1.0
        if self.crashed:
            frame = 1.0 - frame
        return frame.reshape(-1)

    def _step(self, action):
        a = int(action)
        if a not in (0, 1):
            raise ValueError("runner action must be 0 (none) or 1 (jump)")
        if a == 1 and self.air == 0 and self.cooldown == 0:
            self.air = self.jump_duration
        self.obstacles = [ob - 1 for ob in self.obstacles if ob - 1 >= 0]
        self._fill()
        if self.air == 0 and self.player_col in self.obstacles:
            self.crashed = True
            return self.render(), 0.0, True
        if self.air > 0:
            self.air -= 1
            self.cooldown = int(self.air == 0)
        else:
            self.cooldown = 0
        return self.render(), 1.0, False

    @property
    def score(self) -> int:
        return self.steps - int(self.crashed)


ENVIRONMENTS = {
    cls.name: cls
    for cls in (XorEnv, MountainCarDiscrete, MountainCarContinuous, Pendulum, PatternStream, RunnerEnv)
}


def make_env(name: str, seed: int = 0, **params) -> Environment:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(seed=seed, **params)
