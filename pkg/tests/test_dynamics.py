"""Simulation chain: kernel correctness, stationarity, welfare estimates."""

import numpy as np
import pytest
from scipy.special import expit

from netalloc import (
    ChainModel,
    ChainState,
    Network,
    ThetaParams,
    conditional_choice_prob,
    enumerate_gibbs,
    make_instance,
    mcmc_welfare,
    single_site_kernel,
    stationarity_check,
    step,
    weights,
)
from tests.conftest import protocol_instance, random_instance


class TestStep:
    def test_changes_at_most_one_coordinate(self, rng):
        inst = random_instance(rng, 8, density=0.5)
        model = ChainModel(inst, rng.integers(0, 2, 8))
        state = ChainState.start(8, seed=0)
        for _ in range(200):
            before = state.y.copy()
            t_before = state.t
            step(state, model)
            assert (before != state.y).sum() <= 1
            assert state.t == t_before + 1

    def test_single_unit_marginal(self):
        net = Network.from_edges(1, [])
        inst = make_instance(net, np.array([[1.0]]), ThetaParams(-0.5, 0, 0, 0, 0, 0, 0))
        model = ChainModel(inst, np.zeros(1, dtype=int))
        state = ChainState.start(1, seed=42)
        hits = 0
        n_steps = 20000
        for _ in range(n_steps):
            step(state, model)
            hits += int(state.y[0])
        target = float(expit(-0.5))
        se = np.sqrt(target * (1 - target) / n_steps) * 3  # ignores autocorrelation
        assert abs(hits / n_steps - target) < 6 * se

    def test_two_unit_transition_frequencies(self, rng):
        # Empirical one-step transitions from a held state match the
        # single-site kernel probabilities.
        inst = random_instance(rng, 2, density=1.0)
        d = np.array([1, 0])
        model = ChainModel(inst, d)
        start = np.array([1, 0], dtype=np.int8)
        counts = {}
        trials = 100_000
        master = np.random.default_rng(7)
        state = ChainState.start(2, seed=0)
        for _ in range(trials):
            state.y = start.copy()
            state.rng = np.random.default_rng(int(master.integers(2**63)))
            step(state, model)
            key = tuple(state.y)
            counts[key] = counts.get(key, 0) + 1
        # Kernel row for configuration (1, 0): code = 1.
        kernel = single_site_kernel(inst, d, max_units=4)
        for code, key in [(0, (0, 0)), (1, (1, 0)), (3, (1, 1))]:
            p = kernel[1, code]
            freq = counts.get(key, 0) / trials
            se = np.sqrt(p * (1 - p) / trials)
            assert abs(freq - p) <= 4 * se + 1e-12


class TestKernel:
    def test_rows_sum_to_one(self, rng):
        inst = random_instance(rng, 5, density=0.5)
        kernel = single_site_kernel(inst, rng.integers(0, 2, 5))
        np.testing.assert_allclose(kernel.sum(axis=1), 1.0, atol=1e-12)

    def test_kernel_entries_match_choice_probabilities(self, rng):
        inst = random_instance(rng, 4, density=0.7)
        d = rng.integers(0, 2, 4)
        kernel = single_site_kernel(inst, d)
        y = np.array([1, 0, 1, 0])
        code = 0b0101
        i = 1
        flipped = code | (1 << i)
        p = conditional_choice_prob(i, y, inst, d)
        assert kernel[code, flipped] == pytest.approx(p / 4, abs=1e-12)

    def test_detailed_balance(self, rng):
        # pi(y) K(y, y') = pi(y') K(y', y) for single-site moves.
        for _ in range(5):
            n = int(rng.integers(2, 8))
            inst = random_instance(rng, n, density=0.6)
            d = rng.integers(0, 2, n)
            kernel = single_site_kernel(inst, d)
            pi = enumerate_gibbs(weights(inst, d), with_probs=True).probs
            for code in range(1 << n):
                for i in range(n):
                    other = code ^ (1 << i)
                    lhs = pi[code] * kernel[code, other]
                    rhs = pi[other] * kernel[other, code]
                    assert abs(lhs - rhs) <= 1e-12

    def test_size_cap(self, rng):
        inst = random_instance(rng, 5)
        with pytest.raises(ValueError, match="infeasible"):
            single_site_kernel(inst, np.zeros(5, dtype=int), max_units=3)


class TestStationarity:
    def test_single_unit(self):
        net = Network.from_edges(1, [])
        inst = make_instance(net, np.array([[1.0]]), ThetaParams.from_set(1))
        assert stationarity_check(inst) <= 1e-15

    @pytest.mark.parametrize("set_id,n", [(1, 5), (2, 8)])
    def test_benchmark_instances(self, set_id, n):
        inst = protocol_instance(n, set_id=set_id, seed=31)
        rng = np.random.default_rng(5)
        d = rng.integers(0, 2, n)
        assert stationarity_check(inst, d) <= 1e-12

    def test_random_instances(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 8))
            inst = random_instance(rng, n)
            d = rng.integers(0, 2, n)
            assert stationarity_check(inst, d) <= 1e-12


class TestMcmcWelfare:
    def test_independent_instance_matches_logistic_mean(self, rng):
        net = Network.from_edges(6, [])
        inst = make_instance(net, rng.random((6, 1)), ThetaParams.from_set(1))
        d = rng.integers(0, 2, 6)
        target = float(expit(weights(inst, d).w1).mean())
        est, se = mcmc_welfare(d, inst, sweeps=4000, burn_in=1000, seed=3)
        assert abs(est - target) <= max(4 * se, 0.01)

    def test_matches_exact_welfare(self, rng):
        inst = protocol_instance(5, seed=17)
        d = np.array([1, 0, 0, 1, 0])
        from netalloc import exact_welfare

        exact_pp = exact_welfare(d, inst) / 5
        est, _ = mcmc_welfare(d, inst, sweeps=40_000, burn_in=5_000, seed=11)
        assert abs(est - exact_pp) <= 0.005

    def test_empirical_marginals_near_exact(self):
        # Per-site occupation frequencies over a million steps sit within
        # 0.02 of the enumerated stationary marginals.
        inst = protocol_instance(5, seed=29)
        d = np.array([0, 1, 0, 0, 1])
        model = ChainModel(inst, d)
        state = ChainState.start(5, seed=13)
        total_steps = 1_000_000
        burn = 50_000
        counts = np.zeros(5)
        for t in range(total_steps):
            step(state, model)
            if t >= burn:
                counts += state.y
        empirical = counts / (total_steps - burn)
        exact = enumerate_gibbs(weights(inst, d)).marginals
        assert np.abs(empirical - exact).max() <= 0.02

    def test_reproducible(self, rng):
        inst = protocol_instance(10, seed=23)
        d = np.zeros(10, dtype=int)
        a = mcmc_welfare(d, inst, sweeps=500, burn_in=100, seed=9)
        b = mcmc_welfare(d, inst, sweeps=500, burn_in=100, seed=9)
        assert a == b

    def test_steps_per_sweep_flag(self, rng):
        inst = protocol_instance(10, seed=23)
        d = np.zeros(10, dtype=int)
        est, se = mcmc_welfare(
            d, inst, sweeps=2000, burn_in=500, seed=9, steps_per_sweep=1
        )
        assert 0.0 <= est <= 1.0
        assert se >= 0.0

    def test_requires_sweeps_beyond_burn_in(self, rng):
        inst = protocol_instance(5, seed=1)
        with pytest.raises(ValueError, match="burn_in"):
            mcmc_welfare(np.zeros(5, dtype=int), inst, sweeps=100, burn_in=100, seed=0)
