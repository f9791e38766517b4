import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nibox.learning import (
    MemoryMode,
    RewardStrategy,
    StdpUpdate,
    apply_delta,
    apply_stdp,
    consolidate,
    direct_reward,
    inject_reward_neuron,
    novelty_firing,
    novelty_frames,
    stdp_cooccurrence,
    stdp_delta,
    stdp_predictivity,
    stdp_update,
    transition_sums,
)
from nibox.network import Network, NetworkConfig, Role, build_topology


def scalar_delta(alpha, beta):
    """Entrywise definition of the STDP update, one scalar at a time."""
    n = len(alpha)
    d = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            f0 = beta[j] - (1 - alpha[i])
            f1 = int((beta[i] and alpha[j]) or (alpha[i] and beta[j]))
            d[i, j] = f0 * f1
    return d


def hand_net(C, roles=None, P=None, threshold=1.0, learning_rate=0.01):
    """Network with explicit matrices; roles default to all hidden."""
    C = np.array(C, dtype=float)
    n = len(C)
    roles = np.full(n, Role.HIDDEN, dtype=np.int8) if roles is None else np.array(roles, dtype=np.int8)
    counts = {r: int((roles == r).sum()) for r in Role}
    cfg = NetworkConfig(n_input=counts[Role.INPUT], n_noise=counts[Role.NOISE],
                        n_hidden=counts[Role.HIDDEN], n_output=counts[Role.OUTPUT],
                        reward_neuron=bool(counts[Role.REWARD]), firing_threshold=threshold,
                        learning_rate=learning_rate)
    exists = np.ones((n, n), dtype=bool)
    np.fill_diagonal(exists, False)
    P = exists.astype(float) if P is None else np.array(P, dtype=float)
    return Network(cfg, np.zeros((n, 3)), roles, C, P, exists, np.random.default_rng(0))


def random_net(seed, n_hidden=12, n_output=4, **kw):
    cfg = NetworkConfig(n_input=4, n_noise=2, n_hidden=n_hidden, n_output=n_output,
                        connection_scale=0.6, seed=seed, **kw)
    return build_topology(cfg)


firings = st.integers(2, 8).flatmap(
    lambda n: st.tuples(st.lists(st.booleans(), min_size=n, max_size=n),
                        st.lists(st.booleans(), min_size=n, max_size=n)))


# ---------------------------------------------------------------- kernel

class TestPredictivity:
    @pytest.mark.parametrize("alpha, beta, expected", [
        ((1, 0), (0, 1), [[0, 1], [-1, 0]]),
        ((1, 1), (0, 1), [[0, 1], [0, 1]]),
        ((0, 0), (0, 1), [[-1, 0], [-1, 0]]),
    ])
    def test_worked_examples(self, alpha, beta, expected):
        np.testing.assert_array_equal(stdp_predictivity(alpha, beta), expected)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stdp_predictivity((1, 0), (1, 0, 1))


class TestCooccurrence:
    def test_worked_example(self):
        np.testing.assert_array_equal(stdp_cooccurrence((0, 0, 1), (1, 0, 1)),
                                      [[0, 0, 1], [0, 0, 0], [1, 0, 1]])

    def test_nothing_fired(self):
        np.testing.assert_array_equal(stdp_cooccurrence((0, 0, 0), (0, 0, 0)), np.zeros((3, 3)))

    def test_everything_fired(self):
        np.testing.assert_array_equal(stdp_cooccurrence((1, 1, 1), (1, 1, 1)), np.ones((3, 3)))

    @given(firings)
    def test_symmetric(self, ab):
        m = stdp_cooccurrence(*ab)
        np.testing.assert_array_equal(m, m.T)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stdp_cooccurrence((1,), (1, 0))


class TestCompositeUpdate:
    ALPHA, BETA = (0, 0, 1), (1, 0, 1)

    def test_paper_product_before_diagonal_rule(self):
        product = stdp_predictivity(self.ALPHA, self.BETA) * stdp_cooccurrence(self.ALPHA, self.BETA)
        np.testing.assert_array_equal(product, [[0, 0, 0], [0, 0, 0], [1, 0, 1]])

    def test_diagonal_zeroed(self):
        # the worked example keeps [2][2]; self-connections are excluded here
        np.testing.assert_array_equal(stdp_delta(self.ALPHA, self.BETA),
                                      [[0, 0, 0], [0, 0, 0], [1, 0, 0]])

    def test_only_c_a_changes(self):
        gamma = 0.01
        ab, ac, ba, bc, ca, cb = 0.3, -0.2, 0.7, 0.1, 0.4, -0.6
        C = [[0, ab, ac], [ba, 0, bc], [ca, cb, 0]]
        net = hand_net(C)
        net.last_firings = np.array(self.ALPHA, dtype=bool)
        net.current_firings = np.array(self.BETA, dtype=bool)
        stdp_update(net, gamma)
        expected = np.array(C)
        expected[2, 0] = ca + gamma
        np.testing.assert_array_equal(net.C, expected)
        assert net.A[2, 0] == pytest.approx(gamma) and net.A.sum() == pytest.approx(gamma)

    def test_frozen_network_unchanged(self):
        net = hand_net(np.full((3, 3), 0.5) - 0.5 * np.eye(3), P=np.zeros((3, 3)))
        before = net.C.copy()
        net.last_firings = np.array(self.ALPHA, dtype=bool)
        net.current_firings = np.array(self.BETA, dtype=bool)
        stdp_update(net, 0.1)
        np.testing.assert_array_equal(net.C, before)

    def test_rejects_nonpositive_gamma(self):
        net = hand_net(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            stdp_update(net, 0.0)


def test_exhaustive_oracle_small_n():
    for n in range(1, 6):
        states = list(itertools.product((0, 1), repeat=n))
        for alpha in states:
            for beta in states:
                expected = scalar_delta(alpha, beta)
                np.testing.assert_array_equal(stdp_delta(alpha, beta), expected)
                np.testing.assert_array_equal(StdpUpdate.from_firings(alpha, beta).delta, expected)


@settings(max_examples=300)
@given(firings)
def test_matrix_matches_scalar_oracle_up_to_8(ab):
    alpha, beta = (np.array(x, dtype=int) for x in ab)
    np.testing.assert_array_equal(stdp_delta(alpha, beta), scalar_delta(alpha, beta))


@given(firings)
def test_delta_entries_and_support(ab):
    alpha, beta = (np.array(x, dtype=bool) for x in ab)
    d = stdp_delta(alpha, beta)
    assert set(np.unique(d)) <= {-1, 0, 1}
    co = np.outer(alpha, beta) | np.outer(beta, alpha)
    assert not np.any(d[~co])
    silent = ~(alpha | beta)
    assert not np.any(d[silent]) and not np.any(d[:, silent])


@given(firings)
def test_clean_transition_antisymmetry(ab):
    alpha, beta = (np.array(x, dtype=bool) for x in ab)
    d = stdp_delta(alpha, beta)
    src = np.flatnonzero(alpha & ~beta)
    dst = np.flatnonzero(beta & ~alpha)
    for i in src:
        for j in dst:
            assert d[i, j] == 1 and d[j, i] == -1


def test_random_8_neuron_update_matches_entrywise_oracle():
    rng = np.random.default_rng(7)
    gamma = 0.05
    for _ in range(50):
        C = rng.uniform(-1, 1, (8, 8))
        np.fill_diagonal(C, 0)
        P = rng.random((8, 8))
        np.fill_diagonal(P, 0)
        alpha, beta = rng.random(8) < 0.5, rng.random(8) < 0.5
        net = hand_net(C.copy(), P=P.copy())
        net.last_firings, net.current_firings = alpha, beta
        stdp_update(net, gamma)
        expected = C.copy()
        for i in range(8):
            for j in range(8):
                if i == j:
                    continue
                f0 = int(beta[j]) - (1 - int(alpha[i]))
                f1 = int((beta[i] and alpha[j]) or (alpha[i] and beta[j]))
                expected[i, j] = min(max(C[i, j] + gamma * P[i, j] * f0 * f1, -4.0), 4.0)
        np.testing.assert_allclose(net.C, expected, rtol=0, atol=1e-15)


@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_transition_sums_match_per_step_deltas(seed, k):
    rng = np.random.default_rng(seed)
    history = rng.random((k + 1, 7)) < 0.4
    total, total_abs = transition_sums(history)
    deltas = [stdp_delta(history[t], history[t + 1]) for t in range(k)]
    np.testing.assert_array_equal(total, sum(deltas))
    np.testing.assert_array_equal(total_abs, sum(np.abs(d) for d in deltas))


@given(st.integers(0, 2**31 - 1))
def test_dense_and_block_application_agree(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random(9) < 0.5, rng.random(9) < 0.5
    net1 = random_net(seed % 1000, n_hidden=3, n_output=0)
    net2 = net1.copy()
    apply_stdp(net1, StdpUpdate.from_firings(a, b), 0.3, -0.7)
    apply_delta(net2, stdp_delta(a, b).astype(float), 0.3, -0.7)
    np.testing.assert_allclose(net1.C, net2.C, atol=1e-15)
    np.testing.assert_allclose(net1.A, net2.A, atol=1e-15)


@given(st.integers(0, 2**31 - 1), st.floats(-3, 3, allow_nan=False))
def test_modulation_linearity(seed, m):
    rng = np.random.default_rng(seed)
    base = random_net(seed % 1000)
    base.C *= 0.1  # far from the clip bound
    base.last_firings = rng.random(base.n) < 0.5
    base.current_firings = rng.random(base.n) < 0.5
    unit, scaled = base.copy(), base.copy()
    stdp_update(unit, 0.01, 1.0)
    stdp_update(scaled, 0.01, m)
    np.testing.assert_allclose(scaled.C - base.C, m * (unit.C - base.C), atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_weights_stay_clipped(seed):
    rng = np.random.default_rng(seed)
    net = random_net(seed % 1000)
    for _ in range(20):
        net.last_firings = rng.random(net.n) < 0.5
        net.current_firings = rng.random(net.n) < 0.5
        stdp_update(net, 1.5, float(rng.uniform(-3, 3)))
        direct_reward(net, list(RewardStrategy)[rng.integers(5)], float(rng.uniform(-3, 3)), 1.5)
    assert np.abs(net.C).max() <= net.c_max
    assert (net.A >= 0).all()


# --------------------------------------------------------- direct reward

def out_net():
    """Neurons 0, 1 hidden feeding output 2."""
    C = [[0.0, 0.2, 0.5], [0.3, 0.0, -0.4], [0.1, 0.6, 0.0]]
    return hand_net(C, roles=[Role.HIDDEN, Role.HIDDEN, Role.OUTPUT], learning_rate=0.1)


class TestDirectReward:
    @pytest.mark.parametrize("strategy", list(RewardStrategy))
    def test_zero_reward_is_noop(self, strategy):
        net = out_net()
        net.last_firings = np.array([1, 1, 1], dtype=bool)
        net.current_firings = np.array([1, 1, 1], dtype=bool)
        before = net.C.copy()
        direct_reward(net, strategy, 0.0)
        np.testing.assert_array_equal(net.C, before)

    def test_strategy5_needs_a_fired_output(self):
        net = out_net()
        net.last_firings = np.array([1, 1, 0], dtype=bool)
        net.current_firings = np.array([1, 1, 0], dtype=bool)
        before = net.C.copy()
        direct_reward(net, RewardStrategy.ACTION_INPUTS_BOTH_FIRED, 1.0)
        np.testing.assert_array_equal(net.C, before)

    def test_strategy5_subset(self):
        net = out_net()
        net.last_firings = np.array([1, 0, 0], dtype=bool)
        net.current_firings = np.array([0, 0, 1], dtype=bool)
        before = net.C.copy()
        direct_reward(net, RewardStrategy.ACTION_INPUTS_BOTH_FIRED, 1.0)
        expected = before.copy()
        expected[0, 2] += 0.1
        np.testing.assert_allclose(net.C, expected)

    def test_strategy4_three_neuron_hand_case(self):
        net = out_net()
        net.P[1, 2] = 0.5
        before = net.C.copy()
        direct_reward(net, RewardStrategy.ACTION_INPUTS, 1.0)
        expected = before.copy()
        expected[0, 2] += 0.1 * 1.0
        expected[1, 2] += 0.1 * 0.5
        np.testing.assert_allclose(net.C, expected)
        changed = np.argwhere(net.C != before)
        assert sorted(map(tuple, changed)) == [(0, 2), (1, 2)]

    def test_strategy1_touches_every_existing_connection(self):
        net = out_net()
        before = net.C.copy()
        direct_reward(net, RewardStrategy.ALL_CONNECTIONS, 1.0)
        np.testing.assert_allclose(net.C - before, 0.1 * net.P)

    def test_strategy2_rows_of_fired(self):
        net = out_net()
        net.current_firings = np.array([0, 1, 0], dtype=bool)
        before = net.C.copy()
        direct_reward(net, RewardStrategy.OUTPUTS_OF_FIRED, 2.0)
        diff = net.C - before
        np.testing.assert_allclose(diff[1], [0.2, 0.0, 0.2])
        assert not diff[[0, 2]].any()

    def test_strategy3_used_connections(self):
        net = out_net()
        net.last_firings = np.array([0, 1, 0], dtype=bool)
        net.current_firings = np.array([1, 0, 0], dtype=bool)
        before = net.C.copy()
        direct_reward(net, RewardStrategy.USED_CONNECTIONS, 1.0)
        diff = net.C - before
        # 1->0 excitatory onto a fired neuron and 1->2 inhibitory onto a silent one are used;
        # each is pushed further in the direction it acted
        assert diff[1, 0] == pytest.approx(0.1)
        assert diff[1, 2] == pytest.approx(-0.1)
        assert np.count_nonzero(diff) == 2

    def test_rejects_nonfinite_reward(self):
        with pytest.raises(ValueError):
            direct_reward(out_net(), RewardStrategy.ALL_CONNECTIONS, math.nan)


# ------------------------------------------------------------ reward neuron

class TestRewardNeuron:
    def test_reward_at_threshold_fires(self):
        net = hand_net(np.zeros((2, 2)), roles=[Role.HIDDEN, Role.REWARD])
        assert inject_reward_neuron(net, 1.0)
        assert net.current_firings[1]

    def test_zero_reward_silent(self):
        net = hand_net(np.zeros((2, 2)), roles=[Role.HIDDEN, Role.REWARD])
        assert not inject_reward_neuron(net, 0.0)

    def test_incoming_drive_adds_to_reward(self):
        net = hand_net([[0.0, 0.6], [0.0, 0.0]], roles=[Role.HIDDEN, Role.REWARD])
        net.current_firings = np.array([1, 0], dtype=bool)
        assert inject_reward_neuron(net, 0.4)

    def test_requires_reward_neuron(self):
        with pytest.raises(ValueError):
            inject_reward_neuron(hand_net(np.zeros((2, 2))), 1.0)

    def test_perfectly_predictive_input_strengthens(self):
        # B fires on half the steps and r fires right after every B firing
        net = hand_net(np.zeros((2, 2)), roles=[Role.HIDDEN, Role.REWARD])
        rng = np.random.default_rng(0)
        prev_b = False
        trace = []
        for _ in range(2000):
            b = rng.random() < 0.5
            net.last_firings = net.current_firings.copy()
            net.current_firings = np.array([b, False])
            inject_reward_neuron(net, 1.0 if prev_b else 0.0)
            stdp_update(net, 0.01)
            trace.append(net.C[0, 1])
            prev_b = b
        assert trace[-1] > 0
        assert trace[-1] == net.c_max  # drift is positive and saturates at the bound


# ----------------------------------------------------------------- novelty

class TestNovelty:
    def test_silent_is_zero(self):
        net = random_net(0)
        z = np.zeros(net.n, dtype=bool)
        assert novelty_firing(net, z, z) == 0.0

    def test_frozen_is_zero(self):
        net = random_net(0)
        net.P[:] = 0
        rng = np.random.default_rng(1)
        assert novelty_firing(net, rng.random(net.n) < 0.5, rng.random(net.n) < 0.5) == 0.0

    def test_worked_three_neuron_case(self):
        ca = -0.37
        net = hand_net([[0, 0.3, -0.2], [0.7, 0, 0.1], [ca, -0.6, 0]])
        assert novelty_firing(net, (0, 0, 1), (1, 0, 1)) == pytest.approx(abs(ca) / 9)

    @given(st.integers(0, 2**31 - 1))
    def test_bounded_by_c_max(self, seed):
        rng = np.random.default_rng(seed)
        net = random_net(seed % 1000, init_strength_scale=10.0)
        n = novelty_firing(net, rng.random(net.n) < 0.5, rng.random(net.n) < 0.5)
        assert 0.0 <= n <= net.c_max

    def test_frames(self):
        assert novelty_frames([0.3, 0.3], [0.3, 0.3]) == 0.0
        assert novelty_frames(np.ones(5), np.zeros(5)) == 1.0
        assert novelty_frames([0.2, 0.8], [0.5, 0.4]) == pytest.approx(0.35)

    def test_frames_length_mismatch(self):
        with pytest.raises(ValueError):
            novelty_frames([0.0], [0.0, 1.0])


# ------------------------------------------------------------ consolidation

class TestConsolidation:
    def test_fresh_network_unchanged(self):
        net = random_net(3)
        before = net.P.copy()
        assert consolidate(net, MemoryMode.DECAY_ACCUMULATION) == 0
        np.testing.assert_array_equal(net.P, before)

    def test_strength_condition_must_hold(self):
        # all magnitudes equal: sigma = 0, so |C| = mu is not above mu + k sigma
        net = hand_net([[0, 0.5], [0.5, 0]])
        net.A[:] = 1.0
        assert consolidate(net, "decay_accumulation", threshold=0.5, sigma=1.0) == 0
        assert (net.P[net.exists] == 1).all()

    def test_four_connection_hand_case(self):
        # magnitudes 0.1, 0.1, 0.1, 0.9: mu = 0.3, sigma = sqrt(0.12) = 0.3464, cut = 0.6464
        C = np.zeros((3, 3))
        C[0, 1], C[1, 2], C[2, 0], C[0, 2] = 0.1, -0.1, 0.1, -0.9
        exists = C != 0
        net = hand_net(C)
        net.exists = exists
        net.P = exists.astype(float)
        net.A[0, 2] = 1.0  # strong and changed a lot
        net.A[0, 1] = 1.0  # changed a lot but weak
        assert consolidate(net, "decay_accumulation", threshold=0.5, sigma=1.0) == 1
        frozen = np.argwhere(net.exists & (net.P == 0))
        assert [tuple(ix) for ix in frozen] == [(0, 2)]

    def test_uniform_aging(self):
        net = random_net(4)
        before = net.P.copy()
        consolidate(net, MemoryMode.UNIFORM_AGING, aging_rate=0.25)
        np.testing.assert_allclose(net.P[net.exists], before[net.exists] - 0.25)
        assert (net.P[~net.exists] == 0).all()
        for _ in range(5):
            consolidate(net, MemoryMode.UNIFORM_AGING, aging_rate=0.25)
        assert (net.P == 0).all()

    def test_off_mode(self):
        net = random_net(5)
        net.A[:] = 100
        assert consolidate(net, "off") == 0
        assert (net.P[net.exists] == 1).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_frozen_means_frozen_and_p_monotone(seed):
    rng = np.random.default_rng(seed)
    net = random_net(seed % 1000)
    net.P[rng.random(net.P.shape) < 0.3] = 0.0
    frozen = net.P == 0
    pinned = net.C[frozen].copy()
    prev_p = net.P.copy()
    for _ in range(40):
        net.last_firings = rng.random(net.n) < 0.5
        net.current_firings = rng.random(net.n) < 0.5
        stdp_update(net, 0.2, float(rng.uniform(-2, 2)))
        direct_reward(net, list(RewardStrategy)[rng.integers(5)], float(rng.uniform(-2, 2)), 0.2)
        consolidate(net, rng.choice(["decay_accumulation", "uniform_aging"]), threshold=0.5,
                    sigma=0.5, aging_rate=0.01)
        assert (net.P <= prev_p).all()
        prev_p = net.P.copy()
    np.testing.assert_array_equal(net.C[frozen], pinned)
