"""Plasticity rules for :class:`~nibox.network.Network`.

The discrete STDP kernel works on two consecutive binary firing windows,
``alpha`` (older) and ``beta`` (newer)::

    f0[i, j] = beta[j] - (1 - alpha[i])                  predictivity
    f1[i, j] = (beta[i] & alpha[j]) | (alpha[i] & beta[j])   co-occurrence
    delta    = f0 * f1, diagonal zeroed

Expanding the product, ``delta[i, j]`` is +1 exactly when ``alpha[i]`` and
``beta[j]`` and -1 exactly when ``beta[i] & alpha[j] & ~alpha[i] & ~beta[j]``.
:func:`stdp_update` uses that block structure so it only touches rows and
columns of neurons that fired; :func:`stdp_delta` is the dense matrix form.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .network import Network, Role


class RewardStrategy(str, Enum):
    ALL_CONNECTIONS = "all_connections"
    OUTPUTS_OF_FIRED = "outputs_of_fired"
    USED_CONNECTIONS = "used_connections"
    ACTION_INPUTS = "action_inputs"
    ACTION_INPUTS_BOTH_FIRED = "action_inputs_both_fired"


class MemoryMode(str, Enum):
    OFF = "off"
    UNIFORM_AGING = "uniform_aging"
    DECAY_ACCUMULATION = "decay_accumulation"


def _pair(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(alpha).astype(bool).reshape(-1)
    b = np.asarray(beta).astype(bool).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"firing windows differ in length: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def stdp_predictivity(alpha, beta) -> np.ndarray:
    """``f0[i, j] = beta[j] - (1 - alpha[i])``; entries in {-1, 0, 1}."""
    a, b = _pair(alpha, beta)
    a, b = a.astype(np.int8), b.astype(np.int8)
    return b[None, :] - (1 - a[:, None])


def stdp_cooccurrence(alpha, beta) -> np.ndarray:
    """Symmetric co-firing mask ``(beta alpha^T) | (alpha beta^T)`` as 0/1 ints."""
    a, b = _pair(alpha, beta)
    mask = np.outer(b, a) | np.outer(a, b)
    return mask.astype(np.int8)


def stdp_delta(alpha, beta) -> np.ndarray:
    d = stdp_predictivity(alpha, beta) * stdp_cooccurrence(alpha, beta)
    np.fill_diagonal(d, 0)
    return d


@dataclass
class StdpUpdate:
    """Signed unscaled update for one transition, held in block form.

    ``delta[i, j] = +1`` for ``i in pos_rows, j in pos_cols`` and ``-1`` for
    ``i in neg_rows, j in neg_cols``, diagonal excluded.
    """

    n: int
    pos_rows: np.ndarray
    pos_cols: np.ndarray
    neg_rows: np.ndarray
    neg_cols: np.ndarray

    @classmethod
    def from_firings(cls, alpha, beta) -> "StdpUpdate":
        a, b = _pair(alpha, beta)
        return cls(len(a), np.flatnonzero(a), np.flatnonzero(b),
                   np.flatnonzero(b & ~a), np.flatnonzero(a & ~b))

    @property
    def delta(self) -> np.ndarray:
        d = np.zeros((self.n, self.n), dtype=np.int8)
        d[np.ix_(self.pos_rows, self.pos_cols)] = 1
        d[np.ix_(self.neg_rows, self.neg_cols)] = -1
        np.fill_diagonal(d, 0)
        return d

    def blocks(self):
        """Yield ``(index, sign_matrix)`` pairs, diagonal already zeroed."""
        for rows, cols, sign in ((self.pos_rows, self.pos_cols, 1.0),
                                 (self.neg_rows, self.neg_cols, -1.0)):
            if len(rows) == 0 or len(cols) == 0:
                continue
            signs = np.full((len(rows), len(cols)), sign)
            signs[rows[:, None] == cols[None, :]] = 0.0
            yield np.ix_(rows, cols), signs

    @property
    def is_empty(self) -> bool:
        return not ((len(self.pos_rows) and len(self.pos_cols))
                    or (len(self.neg_rows) and len(self.neg_cols)))


def transition_sums(history) -> tuple[np.ndarray, np.ndarray]:
    """Summed signed and absolute deltas over consecutive rows of a firing history.

    ``history`` has shape ``(k + 1, n)``; row ``t`` is the firing state at
    step ``t``. Returns ``(sum_t delta_t, sum_t |delta_t|)`` for the ``k``
    transitions, both with zero diagonals. Two matrix products replace ``k``
    separate outer-product constructions.
    """
    h = np.asarray(history, dtype=bool)
    a, b = h[:-1], h[1:]
    pos = a.T.astype(float) @ b.astype(float)
    neg = (b & ~a).T.astype(float) @ (a & ~b).astype(float)
    np.fill_diagonal(pos, 0.0)
    np.fill_diagonal(neg, 0.0)
    return pos - neg, pos + neg


def apply_delta(net: Network, delta: np.ndarray, gamma: float, modulation: float = 1.0) -> None:
    """Dense counterpart of :func:`apply_stdp` for an already summed delta."""
    if modulation == 0.0:
        return
    change = (modulation * gamma) * net.P * delta
    np.clip(net.C + change, -net.c_max, net.c_max, out=net.C)
    net.A += np.abs(change)


def _apply_change(net: Network, index, change: np.ndarray) -> None:
    net.C[index] = np.clip(net.C[index] + change, -net.c_max, net.c_max)
    net.A[index] += np.abs(change)


def apply_stdp(net: Network, update: StdpUpdate, gamma: float, modulation: float = 1.0) -> None:
    """``C <- clip(C + modulation * gamma * P o delta)`` and accumulate ``|change|`` into A."""
    if modulation == 0.0:
        return
    for index, signs in update.blocks():
        _apply_change(net, index, (modulation * gamma) * net.P[index] * signs)


def stdp_update(net: Network, gamma: float | None = None, modulation: float = 1.0) -> StdpUpdate:
    """Apply the discrete STDP rule to the network's last two firing windows.

    ``modulation=1`` is plain STDP; passing a reward gives reward-modulated
    STDP, where a negative reward reverses whatever was just learned.
    """
    gamma = net.config.learning_rate if gamma is None else gamma
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    update = StdpUpdate.from_firings(net.last_firings, net.current_firings)
    apply_stdp(net, update, gamma, modulation)
    return update


def _strategy_index(net: Network, strategy: RewardStrategy, alpha: np.ndarray, beta: np.ndarray):
    """Return (index, per-entry sign) for the subset a strategy reinforces."""
    n = net.n
    out = net.roles == Role.OUTPUT
    if strategy is RewardStrategy.ALL_CONNECTIONS:
        return np.ix_(np.arange(n), np.arange(n)), 1.0
    if strategy is RewardStrategy.OUTPUTS_OF_FIRED:
        return np.ix_(np.flatnonzero(beta), np.arange(n)), 1.0
    if strategy is RewardStrategy.USED_CONNECTIONS:
        rows = np.flatnonzero(alpha)
        sub = net.C[rows]
        used = np.where(beta[None, :], sub > 0, sub < 0)
        # reinforce in the direction the connection acted: excitatory grows, inhibitory deepens
        return np.ix_(rows, np.arange(n)), np.sign(sub) * used
    if strategy is RewardStrategy.ACTION_INPUTS:
        return np.ix_(np.arange(n), np.flatnonzero(out)), 1.0
    if strategy is RewardStrategy.ACTION_INPUTS_BOTH_FIRED:
        return np.ix_(np.flatnonzero(alpha), np.flatnonzero(out & beta)), 1.0
    raise ValueError(f"unknown reward strategy {strategy!r}")


def direct_reward(net: Network, strategy: RewardStrategy | str, reward: float,
                  gamma: float | None = None, alpha=None, beta=None) -> None:
    """Globally reinforce the connection subset picked by ``strategy``.

    ``alpha``/``beta`` default to the network's last and current firings;
    ``beta`` is the firing state the action was read from.
    """
    if not np.isfinite(reward):
        raise ValueError("reward must be finite")
    if reward == 0.0:
        return
    strategy = RewardStrategy(strategy)
    gamma = net.config.learning_rate if gamma is None else gamma
    alpha = net.last_firings if alpha is None else np.asarray(alpha, dtype=bool)
    beta = net.current_firings if beta is None else np.asarray(beta, dtype=bool)
    index, sign = _strategy_index(net, strategy, alpha, beta)
    if any(len(ix.reshape(-1)) == 0 for ix in index):
        return
    _apply_change(net, index, (reward * gamma) * net.P[index] * sign)


def inject_reward_neuron(net: Network, reward: float) -> bool:
    """Set the reward neuron's current bit from the reward plus its weighted input."""
    r = net.reward_idx
    if r is None:
        raise ValueError("network has no reward neuron")
    drive = reward + net.drive(net.current_firings)[r]
    net.current_firings[r] = drive >= net.firing_threshold
    return bool(net.current_firings[r])


def novelty_firing(net: Network, alpha=None, beta=None) -> float:
    """Mean over all n*n entries of ``|delta o C o P|``."""
    alpha = net.last_firings if alpha is None else alpha
    beta = net.current_firings if beta is None else beta
    return novelty_of_update(net, StdpUpdate.from_firings(alpha, beta))


def novelty_of_update(net: Network, update: StdpUpdate) -> float:
    total = 0.0
    for index, signs in update.blocks():
        total += np.abs(signs * net.C[index] * net.P[index]).sum()
    return float(total / (net.n * net.n))


def novelty_frames(frame_a, frame_b) -> float:
    a = np.asarray(frame_a, dtype=float).reshape(-1)
    b = np.asarray(frame_b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("frames differ in size")
    if a.size == 0:
        return 0.0
    return float(np.abs(a - b).mean())


def consolidate(net: Network, mode: MemoryMode | str, threshold: float | None = None,
                sigma: float | None = None, aging_rate: float | None = None) -> int:
    """Reduce plasticity; returns the number of connections newly frozen.

    Plasticity never increases here. With ``decay_accumulation`` a connection
    is frozen once its accumulated change reaches ``threshold`` and its
    magnitude exceeds ``mean + sigma * std`` of all existing magnitudes.
    """
    mode = MemoryMode(mode)
    cfg = net.config
    if mode is MemoryMode.OFF:
        return 0
    before = int(((net.P == 0) & net.exists).sum())
    if mode is MemoryMode.UNIFORM_AGING:
        rate = cfg.aging_rate if aging_rate is None else aging_rate
        net.P[net.exists] = np.maximum(0.0, net.P[net.exists] - rate)
    else:
        threshold = cfg.consolidation_threshold if threshold is None else threshold
        sigma = cfg.consolidation_sigma if sigma is None else sigma
        if not net.exists.any():
            return 0
        mags = np.abs(net.C[net.exists])
        cut = mags.mean() + sigma * mags.std()
        freeze = net.exists & (net.A >= threshold) & (np.abs(net.C) > cut)
        net.P[freeze] = 0.0
    return int(((net.P == 0) & net.exists).sum()) - before
