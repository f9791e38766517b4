"""The train loop binding a network, its learning rules and an environment."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..environments import Environment, Observation, make_env
from ..learning import (MemoryMode, RewardStrategy, apply_delta, consolidate, direct_reward,
                        inject_reward_neuron, novelty_frames, transition_sums)
from ..network import ConfigError, Network, build_topology, read_action_continuous, read_action_discrete
from .config import ExperimentConfig
from .persist import save_network, write_jsonl, write_learning_curve

log = logging.getLogger(__name__)

ENV_SEED_OFFSET = 1_000_003


@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    steps: int
    total_reward: float
    mean_reward: float
    total_novelty: float
    goal_reached: bool
    wall_ms: float = 0.0

    def log_dict(self) -> dict:
        """Deterministic fields only; wall-clock time is logged separately."""
        d = asdict(self)
        del d["wall_ms"]
        return d


def encode_population(obs: Observation, bins: int) -> np.ndarray:
    """One-hot bin per observation dimension after min-max normalisation."""
    v = obs.normalized()
    idx = np.minimum((v * bins).astype(int), bins - 1)
    x = np.zeros(len(v) * bins)
    x[np.arange(len(v)) * bins + idx] = 1.0
    return x


class Agent:
    """One seeded network learning in one environment."""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        self.net: Network = build_topology(replace(config.network, seed=self.seed))
        params = dict(config.env_params)
        if config.environment != "xor":
            params.setdefault("max_steps", config.max_steps)
        self.env: Environment = make_env(config.environment, seed=self.seed + ENV_SEED_OFFSET, **params)
        self.strategy = RewardStrategy(config.network.reward_strategy)
        self.memory = MemoryMode(config.network.memory_mode)
        self.gamma = config.network.learning_rate
        self.baseline = config.baseline_init or 0.0
        self.baseline_ready = config.baseline_init is not None
        # instrumentation: counts weight updates that consumed the environment's reward
        self.env_reward_updates = 0
        self._check_input_size()

    def _check_input_size(self) -> None:
        obs = self.env.reset()
        n = len(self.encode(obs))
        if n != self.net.n_input:
            raise ConfigError(f"{self.config.environment} with {self.config.encoding} encoding "
                              f"produces {n} inputs but the network has {self.net.n_input}")

    def encode(self, obs: Observation) -> np.ndarray:
        if self.config.encoding == "population":
            return encode_population(obs, self.config.bins)
        return obs.normalized()

    def read_action(self, firing):
        env = self.env
        if env.action_kind == "continuous":
            return read_action_continuous(firing, self.net.roles, env.action_low, env.action_high)
        return read_action_discrete(firing, self.net.roles, env.n_actions)

    def decide(self, obs: Observation):
        """Run the micro-steps for one decision; returns the action and firing history."""
        x = self.encode(obs)
        k = self.config.steps_per_decision
        history = np.empty((k + 1, self.net.n), dtype=bool)
        history[0] = self.net.current_firings
        for t in range(1, k + 1):
            history[t] = self.net.step(x)
        return self.read_action(self.net.current_firings), history

    def novelty(self, abs_delta: np.ndarray, transitions: int) -> float:
        """Mean |delta o C o P| per transition, averaged over the decision's transitions."""
        net = self.net
        return float((abs_delta * np.abs(net.C * net.P)).sum() / (net.n * net.n * transitions))

    def learning_signal(self, result, prev_obs: Observation, novelty: float) -> float:
        source = self.config.reward_source
        if source == "env_reward":
            self.env_reward_updates += 1
            return result.reward
        if source == "novelty_firing":
            return self.config.novelty_scale * novelty
        return self.config.novelty_scale * novelty_frames(prev_obs.values, result.observation.values)

    def learn(self, history: np.ndarray, delta: np.ndarray, signal: float) -> None:
        net, cfg = self.net, self.config
        if net.reward_idx is not None:
            inject_reward_neuron(net, signal)
            history[-1] = net.current_firings
            delta, _ = transition_sums(history)

        modulation = signal
        if cfg.reward_baseline > 0 or cfg.baseline_init is not None:
            if not self.baseline_ready:
                self.baseline, self.baseline_ready = signal, True
            modulation = signal - self.baseline
            self.baseline += cfg.reward_baseline * (signal - self.baseline)

        if cfg.stdp == "plain":
            apply_delta(net, delta, self.gamma, 1.0)
        elif cfg.stdp == "reward_modulated":
            apply_delta(net, delta, self.gamma, modulation)
        if cfg.direct_reward:
            direct_reward(net, self.strategy, modulation, self.gamma)

    def run_episode(self, index: int, learn: bool = True) -> EpisodeRecord:
        start = time.perf_counter()
        self.net.reset_activity()
        obs = self.env.reset()
        total_reward = total_novelty = 0.0
        steps = 0
        done = False
        while not done:
            action, history = self.decide(obs)
            result = self.env.step(action)
            if learn:
                delta, abs_delta = transition_sums(history)
                novelty = self.novelty(abs_delta, len(history) - 1)
                total_novelty += novelty
                self.learn(history, delta, self.learning_signal(result, obs, novelty))
            total_reward += result.reward
            steps += 1
            obs = result.observation
            done = result.done
        if learn and self.memory is not MemoryMode.OFF:
            consolidate(self.net, self.memory)
        return EpisodeRecord(self.seed, index, steps, total_reward, total_reward / steps,
                             total_novelty, bool(self.env.goal_reached),
                             (time.perf_counter() - start) * 1000.0)

    def evaluate(self, trials: int) -> float:
        """Mean reward per step over ``trials`` frozen episodes (no learning at all)."""
        rewards = [self.run_episode(i, learn=False).mean_reward for i in range(trials)]
        return float(np.mean(rewards)) if rewards else float("nan")


@dataclass
class SeedResult:
    seed: int
    records: list
    network: Network
    eval_score: float | None
    env_reward_updates: int


def run_seed(config: ExperimentConfig, seed: int) -> SeedResult:
    agent = Agent(config, seed)
    records = []
    for ep in range(config.episodes):
        rec = agent.run_episode(ep)
        records.append(rec)
        log.debug("seed %d episode %d: steps=%d reward=%.3f goal=%s", seed, ep, rec.steps,
                  rec.total_reward, rec.goal_reached)
    score = agent.evaluate(config.eval.trials) if config.eval.trials else None
    return SeedResult(seed, records, agent.net, score, agent.env_reward_updates)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: Path
    seeds: list = field(default_factory=list)

    @property
    def records(self) -> list:
        return [r for s in self.seeds for r in s.records]

    @property
    def eval_scores(self) -> list:
        return [s.eval_score for s in self.seeds if s.eval_score is not None]


def run_experiment(config: ExperimentConfig, output_dir=None) -> ExperimentResult:
    """Run every seed and persist the config echo, logs, curves and final networks.

    Layout under ``<output_dir>/<name>/``: ``config.json``, ``episodes.jsonl``
    (deterministic), ``timing.jsonl`` (wall clock), ``eval.json`` when a
    frozen evaluation is configured, and per seed ``seed_<s>/learning_curve.csv``
    plus ``seed_<s>/network.npz``.
    """
    config.validate()
    out = Path(output_dir) if output_dir is not None else config.resolved_output_dir() / config.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")

    result = ExperimentResult(config, out)
    for seed in config.seeds:
        res = run_seed(config, seed)
        result.seeds.append(res)
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        write_learning_curve(seed_dir / "learning_curve.csv", res.records)
        save_network(res.network, seed_dir / "network.npz")
        log.info("seed %d done: %d episodes", seed, len(res.records))

    write_jsonl(out / "episodes.jsonl", [r.log_dict() for r in result.records])
    write_jsonl(out / "timing.jsonl", [{"seed": r.seed, "episode": r.episode, "wall_ms": r.wall_ms}
                                       for r in result.records])
    if config.eval.trials:
        scores = result.eval_scores
        report = {"trials": config.eval.trials, "seeds": list(config.seeds), "scores": scores,
                  "mean": float(np.mean(scores)), "variance": float(np.var(scores))}
        (out / "eval.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return result
