"""Synthetic reward laws, population building and volunteer sampling."""

import dataclasses

import numpy as np
import pytest

from riskbandit import (
    CohortSpec,
    ConfigError,
    DataError,
    DistributionSpec,
    EmpiricalTable,
    Environment,
    Mixture,
    PointMass,
    TruncNormalPart,
    UniformPart,
    build_population,
    draw_volunteers,
    empirical_cvar,
    sample_reward,
    sample_rewards,
    true_cvar,
    true_cvar_finite,
)
from riskbandit.environment import season_step


def table_spec(values, weights=None, upper=None):
    law = EmpiricalTable(values=tuple(values), weights=None if weights is None else tuple(weights))
    return DistributionSpec(law=law, upper_bound=max(values) if upper is None else upper)


def two_arm_cohort(cohort_id, proportion):
    arms = (table_spec([0.0, 1.0]), table_spec([0.2, 0.8]))
    return CohortSpec(cohort_id=cohort_id, proportion=proportion, arms=arms,
                      upper_bounds=(1.0, 1.0))


class TestDistributionSpecs:
    def test_point_mass(self, rng):
        spec = DistributionSpec(law=Mixture((PointMass(7.5),), (1.0,)), upper_bound=7.5)
        assert sample_reward(spec, rng) == 7.5
        assert np.all(sample_rewards(spec, 100, rng) == 7.5)

    def test_table_frequencies(self):
        spec = table_spec([1.0, 2.0, 3.0])
        rng = np.random.default_rng(41)
        draws = sample_rewards(spec, 3 * 10**4, rng)
        for v in (1.0, 2.0, 3.0):
            assert abs((draws == v).mean() - 1 / 3) < 0.01

    def test_mixture_mean(self):
        law = Mixture((PointMass(0.0), UniformPart(4.0, 6.0)), (0.5, 0.5))
        spec = DistributionSpec(law=law, upper_bound=6.0)
        draws = sample_rewards(spec, 10**4, np.random.default_rng(42))
        assert abs(draws.mean() - 2.5) < 0.1

    def test_truncnorm_respects_window(self):
        part = TruncNormalPart(mean=0.5, sd=0.4, lo=0.2, hi=0.7)
        draws = part.draw(5000, np.random.default_rng(43))
        assert draws.min() >= 0.2 and draws.max() <= 0.7

    def test_truncnorm_seed_stable(self):
        part = TruncNormalPart(mean=0.0, sd=1.0, lo=-0.5, hi=0.5)
        a = part.draw(1000, np.random.default_rng(44))
        b = part.draw(1000, np.random.default_rng(44))
        assert np.array_equal(a, b)

    def test_support_above_bound_rejected(self):
        with pytest.raises(ConfigError, match="upper bound"):
            DistributionSpec(law=EmpiricalTable((0.0, 2.0)), upper_bound=1.0)

    def test_mixture_probs_must_normalize(self):
        with pytest.raises(ConfigError, match="sum to 1"):
            Mixture((PointMass(0.0), PointMass(1.0)), (0.5, 0.6))

    def test_specs_are_immutable(self):
        spec = table_spec([0.0, 1.0])
        with pytest.raises(dataclasses.FrozenInstanceError):
            spec.upper_bound = 2.0


class TestTrueCvar:
    def test_exact_for_tables(self):
        spec = table_spec([0.0, 10.0], weights=[0.25, 0.75])
        est = true_cvar(spec, 0.5)
        assert est.method == "exact" and est.tolerance == 0.0
        assert est.value == true_cvar_finite([0.0, 10.0], [0.25, 0.75], 0.5)

    def test_exact_for_point_mixtures(self):
        law = Mixture((PointMass(0.0), PointMass(10.0)), (0.25, 0.75))
        est = true_cvar(DistributionSpec(law=law, upper_bound=10.0), 0.5)
        assert est.method == "exact"
        assert est.value == pytest.approx(5.0)

    def test_monte_carlo_for_continuous(self):
        law = Mixture((UniformPart(0.0, 1.0),), (1.0,))
        spec = DistributionSpec(law=law, upper_bound=1.0)
        est = true_cvar(spec, 0.3, rng=np.random.default_rng(45), mc_samples=10**5)
        assert est.method == "monte-carlo"
        assert est.value == pytest.approx(0.15, abs=3 * est.tolerance + 1e-3)
        assert 0 < est.tolerance < 0.05

    def test_continuous_needs_rng(self):
        law = Mixture((UniformPart(0.0, 1.0),), (1.0,))
        with pytest.raises(Exception, match="generator"):
            true_cvar(DistributionSpec(law=law, upper_bound=1.0), 0.3)


class TestPopulation:
    def test_soil_table_proportions(self):
        props = [0.07, 0.09, 0.21, 0.04, 0.24, 0.27, 0.08]
        cohorts = [two_arm_cohort(f"s{i}", p) for i, p in enumerate(props)]
        pop = build_population(cohorts, 500)
        assert list(pop.counts) == [35, 45, 105, 20, 120, 135, 40]
        assert pop.total == 500

    def test_single_cohort(self):
        pop = build_population([two_arm_cohort("only", 1.0)], 10)
        assert pop.counts == (10,)
        assert np.all(pop.cohort_of == 0)

    def test_largest_remainder_tie_rule(self):
        cohorts = [two_arm_cohort("a", 0.5), two_arm_cohort("b", 0.5)]
        assert build_population(cohorts, 3).counts == (2, 1)

    def test_zero_total_rejected(self):
        with pytest.raises(ConfigError, match="total"):
            build_population([two_arm_cohort("a", 1.0)], 0)

    def test_counts_always_sum_to_total(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 8))
            props = rng.dirichlet(np.ones(k))
            props = props / props.sum()
            cohorts = [two_arm_cohort(f"c{i}", float(p)) for i, p in enumerate(props)]
            total = int(rng.integers(1, 700))
            pop = build_population(cohorts, total)
            assert sum(pop.counts) == total


class TestVolunteers:
    def test_everyone_when_min_equals_pop(self):
        pop = build_population([two_arm_cohort("a", 1.0)], 12)
        draw = draw_volunteers(pop, 12, 12, np.random.default_rng(46))
        assert draw.tolist() == list(range(12))

    def test_mean_batch_size(self):
        pop = build_population([two_arm_cohort("a", 1.0)], 400)
        rng = np.random.default_rng(47)
        sizes = [draw_volunteers(pop, 250, 350, rng).size for _ in range(10**4)]
        assert abs(np.mean(sizes) - 300.0) < 2.0

    def test_singleton_uniform(self):
        pop = build_population([two_arm_cohort("a", 1.0)], 10)
        rng = np.random.default_rng(48)
        hits = np.zeros(10)
        for _ in range(10**4):
            hits[draw_volunteers(pop, 1, 1, rng)[0]] += 1
        assert np.all(np.abs(hits / 10**4 - 0.1) < 0.02)

    def test_members_distinct_and_sorted(self, rng):
        pop = build_population([two_arm_cohort("a", 1.0)], 30)
        draw = draw_volunteers(pop, 5, 25, rng)
        assert len(set(draw.tolist())) == draw.size
        assert np.all(np.diff(draw) > 0)

    def test_oversized_batch_rejected(self, rng):
        pop = build_population([two_arm_cohort("a", 1.0)], 5)
        with pytest.raises(ConfigError, match="exceeds population"):
            draw_volunteers(pop, 1, 6, rng)


class TestSeasonStep:
    def make_env(self):
        c1 = CohortSpec(
            "c1", 0.5,
            arms=(table_spec([0.0, 0.4, 1.0]), table_spec([0.5])),
            upper_bounds=(1.0, 1.0),
        )
        c2 = CohortSpec(
            "c2", 0.5,
            arms=(table_spec([0.25]), table_spec([0.9])),
            upper_bounds=(1.0, 1.0),
        )
        return Environment(cohorts=(c1, c2))

    def test_empty_assignment(self, rng):
        assert season_step(self.make_env(), {}, rng) == []

    def test_point_mass_rewards_exact(self, rng):
        env = self.make_env()
        out = season_step(env, {0: [(1, 1)], 1: [(2, 0), (3, 1)]}, rng)
        assert out == [(1, 0, 1, 0.5), (2, 1, 0, 0.25), (3, 1, 1, 0.9)]

    def test_unknown_arm_rejected(self, rng):
        with pytest.raises(DataError, match="arm ids"):
            season_step(self.make_env(), {0: [(1, 5)]}, rng)

    def test_unknown_cohort_rejected(self, rng):
        with pytest.raises(DataError, match="cohort"):
            self.make_env().draw_rewards(9, np.array([0]), rng)

    def test_same_arm_draws_independent(self):
        env = self.make_env()
        rng = np.random.default_rng(49)
        rewards = env.draw_rewards(0, np.zeros(2000, dtype=np.int64), rng)
        assert len(np.unique(rewards)) == 3  # both farmers see their own draw

    def test_empirical_cvar_converges_to_truth(self):
        env = self.make_env()
        spec = env.cohorts[0].arms[0]
        rng = np.random.default_rng(50)
        draws = sample_rewards(spec, 10**4, rng)
        values, probs = spec.finite_atoms()
        target = true_cvar_finite(values, probs, 0.3)
        assert abs(empirical_cvar(draws, 0.3) - target) < 0.02 * (values.max() - values.min())

    def test_rewards_respect_bounds(self, rng):
        env = self.make_env()
        draws = env.draw_rewards(0, np.zeros(500, dtype=np.int64), rng)
        assert draws.max() <= env.cohorts[0].arms[0].upper_bound


class TestCohortValidation:
    def test_policy_bound_must_dominate_support(self):
        with pytest.raises(ConfigError, match="below"):
            CohortSpec("c", 1.0, arms=(table_spec([0.0, 2.0]), table_spec([0.0, 1.0])),
                       upper_bounds=(1.5, 1.0))

    def test_needs_two_arms(self):
        with pytest.raises(ConfigError, match="2 arms"):
            CohortSpec("c", 1.0, arms=(table_spec([0.0, 1.0]),), upper_bounds=(1.0,))
