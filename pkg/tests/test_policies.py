"""Identification strategies: BCB, ETC, baselines, and fair assignment."""

import numpy as np
import pytest

from riskbandit import (
    ConfigError,
    DataError,
    DomainError,
    FarmerLedger,
    bcb_init,
    bcb_recommend_batch,
    bcb_update,
    dirichlet_weights,
    empirical_cvar,
    etc_commit,
    etc_init,
    etc_recommend_batch,
    fair_assignment,
    noisy_cvar_score,
    oracle_init,
    season_recommendations,
    season_update,
    true_cvar_finite,
    uniform_init,
    update_farmer_ledgers,
)
from riskbandit.policies import arm_cvar_estimates, refresh_regrets


def prefix_scan_score(history, weights, alpha):
    """Brute-force oracle: literal prefix scan and penalty sum."""
    j = 0
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if acc <= alpha:
            j = i + 1
    j = max(j, 1)
    q = history[j - 1]
    pen = sum(w * max(q - x, 0.0) for x, w in zip(history, weights))
    return q - pen / alpha


def make_ledger(farmer_id, pulls, regret=0.0):
    return FarmerLedger(farmer_id=farmer_id, pulls=np.asarray(pulls, dtype=np.int64), regret=regret)


class TestInit:
    def test_sentinel_seeding(self):
        state = bcb_init(3, [4000.0, 4000.0, 4000.0], 0.3)
        for arm in state.arms:
            assert arm.history.tolist() == [4000.0]
            assert arm.n_obs == 0

    def test_per_arm_bounds(self):
        state = bcb_init(2, [1.0, 2.0], 0.3)
        assert [a.history.tolist() for a in state.arms] == [[1.0], [2.0]]

    def test_single_arm_rejected(self):
        with pytest.raises(ConfigError, match="2 arms"):
            bcb_init(1, [1.0], 0.3)

    def test_bad_alpha_rejected(self):
        with pytest.raises(DomainError, match="alpha"):
            bcb_init(2, [1.0, 1.0], 0.0)

    def test_etc_needs_positive_trials(self):
        with pytest.raises(ConfigError, match="t_trials"):
            etc_init(2, [1.0, 1.0], 0.3, 0)


class TestDirichletWeights:
    def test_zero_dim_rejected(self, rng):
        with pytest.raises(DomainError):
            dirichlet_weights(0, rng)

    def test_flat_mean(self):
        # Flat Dirichlet has per-coordinate mean 1/n.
        rng = np.random.default_rng(505)
        draws = np.stack([dirichlet_weights(4, rng) for _ in range(10**5)])
        assert np.all(np.abs(draws.mean(axis=0) - 0.25) < 0.005)


class TestNoisyCvarScore:
    def test_uniform_weights_example(self):
        # prefix 0.25 <= 0.3 < 0.5 selects the first entry, zero penalty
        assert noisy_cvar_score([1, 2, 3, 4], [0.25] * 4, 0.3) == 1.0

    def test_singleton_fallback(self):
        assert noisy_cvar_score([2.5], [1.0], 0.1) == 2.5

    def test_two_point_example_matches_oracle(self):
        # w1 + w2 = 1 > 0.3, so j stays at 1 and the score is the minimum.
        history, weights, alpha = [0.0, 10.0], [0.05, 0.95], 0.3
        want = prefix_scan_score(history, weights, alpha)
        assert want == 0.0
        assert noisy_cvar_score(history, weights, alpha) == want

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 40))
            history = np.sort(rng.uniform(-5, 5, size=n))
            weights = dirichlet_weights(n, rng)
            alpha = float(rng.uniform(0.02, 1.0))
            got = noisy_cvar_score(history, weights, alpha)
            want = prefix_scan_score(history.tolist(), weights.tolist(), alpha)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
            assert history[0] - 1e-12 <= got <= history[-1] + 1e-12

    def test_uniform_weights_converge_to_true_cvar(self):
        atoms = np.array([0.0, 1.0, 3.0, 8.0])
        probs = np.array([0.15, 0.35, 0.3, 0.2])
        rng = np.random.default_rng(77)
        n = 10**4
        sample = np.sort(rng.choice(atoms, size=n, p=probs))
        score = noisy_cvar_score(sample, np.full(n, 1.0 / n), 0.3)
        target = true_cvar_finite(atoms, probs, 0.3)
        assert abs(score - target) < 0.02 * (atoms.max() - atoms.min())

    def test_unsorted_history_rejected(self):
        with pytest.raises(DomainError, match="sorted"):
            noisy_cvar_score([2.0, 1.0], [0.5, 0.5], 0.3)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError, match="equal-length"):
            noisy_cvar_score([1.0, 2.0], [1.0], 0.3)


class TestBcbRecommend:
    def test_cold_start_uniform(self):
        state = bcb_init(5, [1.0] * 5, 0.3)
        rng = np.random.default_rng(31)
        choices = bcb_recommend_batch(state, 10**4, rng)
        freq = np.bincount(choices, minlength=5) / 10**4
        sigma = np.sqrt(0.2 * 0.8 / 10**4)
        assert np.all(np.abs(freq - 0.2) < 3 * sigma + 1e-3)

    def test_separated_arms(self):
        # Arm 1 saw only zeros, arm 2 only its bound: arm 2 must dominate.
        state = bcb_init(2, [10.0, 10.0], 0.3)
        bcb_update(state, [(0, 0.0)] * 100 + [(1, 10.0)] * 100)
        rng = np.random.default_rng(32)
        choices = bcb_recommend_batch(state, 1000, rng)
        assert (choices == 1).mean() > 0.95

    def test_empty_batch(self, rng):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        assert bcb_recommend_batch(state, 0, rng).size == 0

    def test_deterministic_under_seed(self):
        state = bcb_init(3, [1.0] * 3, 0.3)
        bcb_update(state, [(0, 0.4), (1, 0.2), (2, 0.9), (0, 0.1)])
        a = bcb_recommend_batch(state, 50, np.random.default_rng(5))
        b = bcb_recommend_batch(state, 50, np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_wrong_kind_rejected(self, rng):
        state = uniform_init(2, [1.0, 1.0], 0.3)
        with pytest.raises(ConfigError):
            bcb_recommend_batch(state, 3, rng)


class TestBcbUpdate:
    def test_history_grows(self):
        state = bcb_init(3, [10.0] * 3, 0.3)
        bcb_update(state, [(1, 2.0), (1, 3.0), (1, 1.0)])
        assert state.arms[1].n_obs == 3
        assert state.arms[1].history.tolist() == [1.0, 2.0, 3.0, 10.0]
        assert state.arms[0].n_obs == 0

    def test_empty_results_noop(self):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        bcb_update(state, [])
        assert [a.n_obs for a in state.arms] == [0, 0]

    def test_boundary_reward_accepted(self):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        bcb_update(state, [(0, 1.0)])
        assert state.arms[0].observations.tolist() == [1.0]

    def test_reward_above_bound_rejected(self):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        with pytest.raises(DataError, match=r"arm 1.*1\.5.*1\.0"):
            bcb_update(state, [(1, 1.5)])

    def test_unknown_arm_rejected(self):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        with pytest.raises(DataError, match="unknown arm"):
            bcb_update(state, [(7, 0.5)])

    def test_sentinel_bonus_property(self, rng):
        # Adding a maximal sentinel can only raise the empirical CVaR.
        for _ in range(100):
            obs = rng.uniform(0, 1, size=int(rng.integers(1, 50)))
            alpha = float(rng.uniform(0.05, 1.0))
            sentinel = float(obs.max()) + float(rng.uniform(0, 1))
            with_s = empirical_cvar(np.append(obs, sentinel), alpha)
            without = empirical_cvar(obs, alpha)
            assert with_s >= without - 1e-12


class TestFairAssignment:
    def test_worked_example(self):
        farmers = [make_ledger(0, [0, 0, 0], 5.0), make_ledger(1, [0, 0, 0], 1.0),
                   make_ledger(2, [0, 0, 0], 3.0)]
        pairs = fair_assignment([0, 1, 2], farmers, [2.0, 0.5, 1.0])
        # lowest regret -> lowest empirical CVaR
        assert dict(pairs) == {1: 1, 2: 2, 0: 0}

    def test_single_pair(self):
        assert fair_assignment([1], [make_ledger(4, [0, 0])], [0.3, 0.7]) == [(4, 1)]

    def test_equal_regrets_fall_back_to_farmer_id(self):
        farmers = [make_ledger(fid, [0, 0]) for fid in (9, 2, 5)]
        pairs = fair_assignment([0, 0, 1], farmers, [0.5, 0.9])
        assert pairs == [(2, 0), (5, 0), (9, 1)]

    def test_multiset_preserved(self, rng):
        for _ in range(100):
            n_arms = int(rng.integers(2, 6))
            n = int(rng.integers(1, 30))
            recs = rng.integers(0, n_arms, size=n)
            farmers = [make_ledger(int(f), np.zeros(n_arms), float(rng.uniform(0, 5)))
                       for f in rng.choice(1000, size=n, replace=False)]
            cvars = rng.uniform(0, 1, size=n_arms)
            pairs = fair_assignment(recs, farmers, cvars)
            assert sorted(a for _, a in pairs) == sorted(recs.tolist())
            assert sorted(f for f, _ in pairs) == sorted(f.farmer_id for f in farmers)

    def test_size_mismatch_rejected(self):
        with pytest.raises(DomainError, match="recommendations"):
            fair_assignment([0, 1], [make_ledger(0, [0, 0])], [0.1, 0.2])


class TestFarmerLedgers:
    def test_argmax_farmer_has_zero_regret(self):
        ledgers = {0: make_ledger(0, [4, 0])}
        update_farmer_ledgers(ledgers, [(0, 0)], [2.0, 1.0])
        assert ledgers[0].pulls.tolist() == [5, 0]
        assert ledgers[0].regret == 0.0

    def test_gap_times_pulls(self):
        ledgers = {3: make_ledger(3, [0, 3])}
        refresh_regrets(ledgers.values(), [2.0, 1.0])
        assert ledgers[3].regret == 3.0

    def test_empty_history_zero(self):
        ledgers = {1: make_ledger(1, [0, 0])}
        refresh_regrets(ledgers.values(), [2.0, 1.0])
        assert ledgers[1].regret == 0.0


class TestEtc:
    def test_exact_division(self, rng):
        state = etc_init(10, [1.0] * 10, 0.3, 5)
        recs = etc_recommend_batch(state, 1, 300, rng)
        assert np.bincount(recs, minlength=10).tolist() == [30] * 10

    def test_remainder_rule(self, rng):
        state = etc_init(10, [1.0] * 10, 0.3, 5)
        counts = np.bincount(etc_recommend_batch(state, 2, 303, rng), minlength=10)
        assert sorted(counts.tolist()) == [30] * 7 + [31] * 3

    def test_trial_counts_never_differ_by_more_than_one(self, rng):
        for _ in range(100):
            n_arms = int(rng.integers(2, 12))
            state = etc_init(n_arms, [1.0] * n_arms, 0.3, 3)
            n = int(rng.integers(0, 100))
            counts = np.bincount(etc_recommend_batch(state, 1, n, rng), minlength=n_arms)
            assert counts.max() - counts.min() <= 1
            assert counts.sum() == n

    def test_commit_season_constant(self, rng):
        state = etc_init(3, [1.0] * 3, 0.3, 2)
        bcb_update(state, [(0, 0.1), (1, 0.9), (2, 0.5)])
        recs = etc_recommend_batch(state, 3, 40, rng)
        assert recs.tolist() == [state.committed_arm] * 40
        assert state.committed_arm == 1

    def test_commit_is_argmax_of_real_observations(self, rng):
        state = etc_init(3, [10.0] * 3, 0.5, 1)
        bcb_update(state, [(0, 1.0), (1, 3.0), (2, 2.0)])
        assert etc_commit(state, rng) == 1

    def test_commit_ignores_sentinel(self, rng):
        # With the sentinel included arm 0 (bound 100) would win.
        state = etc_init(2, [100.0, 1.0], 1.0, 1)
        bcb_update(state, [(0, 0.2), (1, 0.9)])
        assert etc_commit(state, rng) == 1

    def test_commit_tie_break_uniform(self):
        hits = 0
        trials = 10**4
        for i in range(trials):
            state = etc_init(2, [1.0, 1.0], 0.3, 1)
            bcb_update(state, [(0, 0.5), (1, 0.5)])
            hits += etc_commit(state, np.random.default_rng(i))
        assert abs(hits / trials - 0.5) < 0.02

    def test_commit_disjoint_supports(self):
        for seed in range(20):
            state = etc_init(2, [6.0, 6.0], 0.3, 1)
            rng = np.random.default_rng(seed)
            bcb_update(state, [(0, float(rng.uniform(0, 1))) for _ in range(5)])
            bcb_update(state, [(1, float(rng.uniform(5, 6))) for _ in range(5)])
            assert etc_commit(state, rng) == 1

    def test_commit_with_unobserved_arm_rejected(self, rng):
        state = etc_init(3, [1.0] * 3, 0.3, 1)
        bcb_update(state, [(0, 0.5), (1, 0.5)])
        with pytest.raises(ConfigError, match="arm 2"):
            etc_commit(state, rng)


class TestSeasonDriver:
    def test_first_season_pairs_positionally(self, rng):
        state = bcb_init(3, [1.0] * 3, 0.3)
        assignment = season_recommendations(state, 1, [10, 11, 12], rng)
        assert [f for f, _ in assignment] == [10, 11, 12]

    def test_fair_assignment_kicks_in_with_data(self):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        rng = np.random.default_rng(3)
        first = season_recommendations(state, 1, [0, 1, 2, 3], rng)
        season_update(state, first, [0.5, 0.4, 0.3, 0.2])
        second = season_recommendations(state, 2, [0, 1, 2, 3], rng)
        assert sorted(f for f, _ in second) == [0, 1, 2, 3]
        for fid, _ in first:
            assert state.ledgers[fid].pulls.sum() == 1

    def test_oracle_and_uniform(self, rng):
        oracle = oracle_init(4, [1.0] * 4, 0.3, optimal_arm=2)
        pairs = season_recommendations(oracle, 1, [5, 6], rng)
        assert [arm for _, arm in pairs] == [2, 2]
        uni = uniform_init(4, [1.0] * 4, 0.3)
        arms = [arm for _, arm in season_recommendations(uni, 1, list(range(2000)), rng)]
        freq = np.bincount(arms, minlength=4) / 2000
        assert np.all(np.abs(freq - 0.25) < 0.05)

    def test_empty_season(self, rng):
        state = bcb_init(2, [1.0, 1.0], 0.3)
        assert season_recommendations(state, 1, [], rng) == []


class TestArmCvarEstimates:
    def test_sentinel_toggle(self):
        state = bcb_init(2, [1.0, 1.0], 0.5)
        bcb_update(state, [(0, 0.0), (0, 0.0), (1, 0.5)])
        with_s = arm_cvar_estimates(state, include_sentinel=True)
        without = arm_cvar_estimates(state, include_sentinel=False)
        assert with_s[0] == empirical_cvar([0.0, 0.0, 1.0], 0.5)
        assert without[0] == empirical_cvar([0.0, 0.0], 0.5)
        assert np.all(with_s >= without)
