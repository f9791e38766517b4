"""Post-hoc analysis: run summaries, preferred stimuli, stage selectivity and reward-neuron drift."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..network import Network, Role
from .config import ExperimentConfig
from .persist import read_jsonl
from .runner import Agent

CHANCE = {"xor": 0.5}
MOVING_WINDOW = 10


def quartile_split(values) -> tuple[np.ndarray, np.ndarray]:
    """First and last quarter of a sequence (at least one element each)."""
    v = np.asarray(values)
    q = max(1, len(v) // 4)
    return v[:q], v[-q:]


def moving_average(values, window: int = MOVING_WINDOW) -> list[tuple[int, float]]:
    """``(index of window end, mean)`` points; the window shrinks for short series."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return []
    w = min(window, len(v))
    avg = np.convolve(v, np.ones(w) / w, mode="valid")
    return [(int(i + w - 1), float(a)) for i, a in enumerate(avg)]


def _series_summary(recs: list[dict]) -> dict:
    recs = sorted(recs, key=lambda r: r["episode"])
    steps = [r["steps"] for r in recs]
    rewards = [r["mean_reward"] for r in recs]
    first, last = quartile_split(steps)
    rfirst, rlast = quartile_split(rewards)
    best_steps = min(recs, key=lambda r: (r["steps"], r["episode"]))
    best_reward = max(recs, key=lambda r: (r["mean_reward"], -r["episode"]))
    return {
        "episodes": len(recs),
        "goals": int(sum(bool(r["goal_reached"]) for r in recs)),
        "first_quartile_median_steps": float(np.median(first)),
        "last_quartile_median_steps": float(np.median(last)),
        "steps_improved": bool(np.median(last) < np.median(first)),
        "first_quartile_mean_reward": float(np.mean(rfirst)),
        "last_quartile_mean_reward": float(np.mean(rlast)),
        "reward_improved": bool(np.mean(rlast) > np.mean(rfirst)),
        "best_steps_episode": {"episode": best_steps["episode"], "steps": best_steps["steps"]},
        "best_reward_episode": {"episode": best_reward["episode"],
                                "mean_reward": best_reward["mean_reward"]},
        "moving_average_steps": moving_average(steps),
        "moving_average_reward": moving_average(rewards),
    }


def summarize_records(records: list[dict], eval_report: dict | None = None,
                      environment: str | None = None) -> dict:
    if not records:
        raise ValueError("no episode records to summarize")
    seeds = sorted({r["seed"] for r in records})
    per_seed = {str(s): _series_summary([r for r in records if r["seed"] == s]) for s in seeds}
    # pooled quartiles: the quartile windows of every seed, concatenated
    firsts, lasts = [], []
    for s in seeds:
        steps = [r["steps"] for r in sorted((r for r in records if r["seed"] == s),
                                            key=lambda r: r["episode"])]
        f, l = quartile_split(steps)
        firsts.extend(f.tolist())
        lasts.extend(l.tolist())
    report = {
        "seeds": seeds,
        "per_seed": per_seed,
        "pooled": {"first_quartile_median_steps": float(np.median(firsts)),
                   "last_quartile_median_steps": float(np.median(lasts)),
                   "steps_improved": bool(np.median(lasts) < np.median(firsts))},
    }
    if eval_report is not None:
        scores = [float(x) for x in eval_report["scores"]]
        report["eval"] = {"scores": scores, "mean": float(np.mean(scores)),
                          "variance": float(np.var(scores))}
        if environment in CHANCE:
            report["eval"]["chance"] = CHANCE[environment]
            report["eval"]["above_chance"] = report["eval"]["mean"] > CHANCE[environment]
    return report


def summarize(path) -> dict:
    """Summarize a run directory (or a bare ``episodes.jsonl``)."""
    path = Path(path)
    run_dir = path if path.is_dir() else path.parent
    log_path = path / "episodes.jsonl" if path.is_dir() else path
    if not log_path.exists():
        raise FileNotFoundError(f"no episode log at {log_path}")
    records = read_jsonl(log_path)
    for r in records:
        missing = {"seed", "episode", "steps", "mean_reward", "goal_reached"} - set(r)
        if missing:
            raise ValueError(f"{log_path}: record missing {sorted(missing)}")
    eval_path = run_dir / "eval.json"
    eval_report = json.loads(eval_path.read_text()) if eval_path.exists() else None
    env = None
    cfg_path = run_dir / "config.json"
    if cfg_path.exists():
        env = json.loads(cfg_path.read_text()).get("environment")
    return summarize_records(records, eval_report, env)


# ---------------------------------------------------------------- stimuli

def input_image_shape(net: Network) -> tuple[int, int]:
    shape = net.config.input_shape
    if shape is None:
        raise ValueError("network input layer is not image-shaped (set input_shape)")
    return tuple(shape)


def batch_activation(net: Network, frames: np.ndarray, neuron: int, steps: int = 1) -> np.ndarray:
    """Pre-threshold drive into ``neuron`` after presenting each frame for ``steps`` steps.

    Frames are held fixed from a silent start; noise neurons stay silent so the
    result is deterministic. ``steps=1`` is the direct input-to-neuron drive.
    """
    frames = np.asarray(frames, dtype=float)
    fired_in = frames > 0.5
    state = np.zeros((len(frames), net.n), dtype=bool)
    driven = net.driven_idx
    for _ in range(steps):
        drive = state.astype(float) @ net.C
        new = np.zeros_like(state)
        new[:, net.input_idx] = fired_in
        new[:, driven] = drive[:, driven] >= net.firing_threshold
        state = new
    return state.astype(float) @ net.C[:, neuron]


def preferred_stimulus(net: Network, neuron: int, n_samples: int = 1000, n_rounds: int = 5,
                       n_repeats: int = 1, steps: int = 1, seed: int = 0):
    """Noise-search estimate of the input image that most excites / inhibits ``neuron``.

    Each round draws ``n_samples`` uniform noise frames, averages them with the
    frame kept from the previous round, and keeps the one with the highest
    (lowest) activation. The kept frames of ``n_repeats`` independent searches
    are averaged. Returns ``(stimulating, inhibitory)`` images.
    """
    if not 0 <= neuron < net.n:
        raise IndexError(f"neuron {neuron} out of range for a {net.n}-neuron network")
    shape = input_image_shape(net)
    if n_samples < 1 or n_rounds < 1 or n_repeats < 1:
        raise ValueError("n_samples, n_rounds and n_repeats must be >= 1")
    rng = np.random.default_rng(seed)
    n_in = net.n_input
    hi_sum = np.zeros(n_in)
    lo_sum = np.zeros(n_in)
    for _ in range(n_repeats):
        hi = lo = None
        for _ in range(n_rounds):
            noise = rng.random((n_samples, n_in))
            cand_hi = noise if hi is None else (noise + hi) / 2
            cand_lo = noise if lo is None else (noise + lo) / 2
            hi = cand_hi[np.argmax(batch_activation(net, cand_hi, neuron, steps))]
            lo = cand_lo[np.argmin(batch_activation(net, cand_lo, neuron, steps))]
        hi_sum += hi
        lo_sum += lo
    return (hi_sum / n_repeats).reshape(shape), (lo_sum / n_repeats).reshape(shape)


# ---------------------------------------------------- stage differentiation

def stage_rates(agent: Agent, frames: int) -> np.ndarray:
    """Per-neuron firing rate during each of the two stages, with learning off.

    Rates are read at the last micro-step of each frame; returns shape (2, n).
    """
    net, env = agent.net, agent.env
    net.reset_activity()
    obs = env.reset()
    sums = np.zeros((2, net.n))
    counts = np.zeros(2)
    for _ in range(frames):
        stage = env.current_stage
        _, history = agent.decide(obs)
        sums[stage] += history[-1]
        counts[stage] += 1
        result = env.step(0)
        obs = result.observation
        if result.done:
            obs = env.reset()
    if counts.min() == 0:
        raise ValueError("evaluation window did not cover both stages; use more frames")
    return sums / counts[:, None]


def stage_differentiation(config: ExperimentConfig, seed: int, eval_frames: int = 2000) -> dict:
    """Train on the stream, then find the hidden/output neuron whose rate differs most by stage."""
    agent = Agent(config, seed)
    for ep in range(config.episodes):
        agent.run_episode(ep)
    rates = stage_rates(agent, eval_frames)
    roles = agent.net.roles
    candidates = np.flatnonzero((roles == Role.HIDDEN) | (roles == Role.OUTPUT))
    diff = np.abs(rates[0, candidates] - rates[1, candidates])
    best = int(np.argmax(diff))
    return {"seed": seed, "neuron": int(candidates[best]), "difference": float(diff[best]),
            "rates": rates[:, candidates[best]].tolist()}


def differentiation_vs_control(config: ExperimentConfig, seeds, eval_frames: int = 2000) -> dict:
    control = replace(config, env_params={**config.env_params, "control": True})
    trained = [stage_differentiation(config, s, eval_frames) for s in seeds]
    ctrl = [stage_differentiation(control, s, eval_frames) for s in seeds]
    t = np.array([r["difference"] for r in trained])
    c = np.array([r["difference"] for r in ctrl])
    ratio = float(t.mean() / c.mean()) if c.mean() > 0 else float("inf")
    return {"trained": trained, "control": ctrl, "ratio": ratio}


# ------------------------------------------------------ reward-neuron drift

def forced_pair_drift(q: float, c0: float, steps: int = 10_000, gamma: float = 0.01,
                      c_max: float = 4.0, seed: int = 0) -> float:
    """Drift of the B -> r weight when both firings are forced externally.

    Each step B fires with probability ``q``; r fires with probability ``q`` on
    the step after B fired and stays silent otherwise. The discrete STDP rule is
    applied to every consecutive pair of states. Returns ``c_final - c0``.
    """
    rng = np.random.default_rng(seed)
    b = rng.random(steps) < q
    r = np.zeros(steps, dtype=bool)
    r[1:] = b[:-1] & (rng.random(steps - 1) < q)
    # entry [B, r] of f0 * f1 for every transition (alpha = t-1, beta = t)
    a_b, a_r, b_b, b_r = b[:-1], r[:-1], b[1:], r[1:]
    f0 = b_r.astype(int) - (1 - a_b.astype(int))
    f1 = (b_b & a_r) | (a_b & b_r)
    d = f0 * f1
    c = c0
    for step in d[d != 0]:
        c = min(max(c + gamma * step, -c_max), c_max)
    return c - c0


def rescorla_wagner_sign(q: float, v: float) -> int:
    """Sign of the error term in V' = V + a (r - V) with r the reward rate q."""
    return int(np.sign(q - v))
