"""Synthetic stand-in for the field-trial world.

Bounded reward laws per (cohort, arm) - empirical sample tables or finite
mixtures of point masses, uniforms and truncated normals - plus a fixed
farmer population partitioned by cohort proportions and per-season
volunteer sampling. Distribution objects are immutable; all sampling is
driven by caller-supplied generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .metrics import cvar_confidence_interval, empirical_cvar, true_cvar_finite

__all__ = [
    "PointMass",
    "UniformPart",
    "TruncNormalPart",
    "EmpiricalTable",
    "Mixture",
    "DistributionSpec",
    "CohortSpec",
    "Population",
    "Environment",
    "CvarEstimate",
    "build_population",
    "draw_volunteers",
    "sample_reward",
    "sample_rewards",
    "season_step",
    "true_cvar",
]

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class PointMass:
    value: float

    def support(self) -> tuple[float, float]:
        return self.value, self.value

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.value)


@dataclass(frozen=True)
class UniformPart:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ConfigError(f"uniform component needs lo < hi, got [{self.lo}, {self.hi}]")

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class TruncNormalPart:
    mean: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.sd <= 0:
            raise ConfigError(f"truncnorm needs sd > 0, got {self.sd}")
        if not (self.lo < self.hi):
            raise ConfigError(f"truncnorm needs lo < hi, got [{self.lo}, {self.hi}]")

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # Rejection against [lo, hi]; seed-stable because redraw batch sizes
        # are a deterministic function of earlier draws.
        out = np.empty(n)
        filled = 0
        rounds = 0
        while filled < n:
            rounds += 1
            if rounds > 1000:
                raise DomainError(
                    f"truncnorm rejection failed to fill after 1000 rounds: "
                    f"mean={self.mean}, sd={self.sd}, window=[{self.lo}, {self.hi}]"
                )
            draws = rng.normal(self.mean, self.sd, size=n - filled)
            kept = draws[(draws >= self.lo) & (draws <= self.hi)]
            out[filled : filled + kept.size] = kept
            filled += kept.size
        return out


Component = Union[PointMass, UniformPart, TruncNormalPart]


@dataclass(frozen=True)
class EmpiricalTable:
    """Finite sample table, resampled with replacement (bootstrap semantics)."""

    values: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.values) == 0:
            raise ConfigError("empirical table must be non-empty")
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigError("empirical table values must be finite")
        if self.weights is not None:
            if len(self.weights) != len(self.values):
                raise ConfigError("weights must match values in length")
            if any(w < 0 for w in self.weights):
                raise ConfigError("weights must be non-negative")
            if abs(sum(self.weights) - 1.0) > _PROB_TOL:
                raise ConfigError(f"weights must sum to 1, got {sum(self.weights)}")

    def support(self) -> tuple[float, float]:
        return min(self.values), max(self.values)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        values = np.asarray(self.values, dtype=np.float64)
        if self.weights is None:
            probs = np.full(values.size, 1.0 / values.size)
        else:
            probs = np.asarray(self.weights, dtype=np.float64)
            probs = probs / probs.sum()
        return values, probs

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        values, probs = self.atoms()
        return rng.choice(values, size=n, replace=True, p=probs)


@dataclass(frozen=True)
class Mixture:
    components: tuple[Component, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) == 0:
            raise ConfigError("mixture must have at least one component")
        if len(self.probs) != len(self.components):
            raise ConfigError("mixing probabilities must match components in length")
        if any(p < 0 for p in self.probs):
            raise ConfigError("mixing probabilities must be non-negative")
        if abs(sum(self.probs) - 1.0) > _PROB_TOL:
            raise ConfigError(f"mixing probabilities must sum to 1, got {sum(self.probs)}")

    def support(self) -> tuple[float, float]:
        lows, highs = zip(*(c.support() for c in self.components))
        return min(lows), max(highs)

    def atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Finite atoms when every component is a point mass, else None."""
        if all(isinstance(c, PointMass) for c in self.components):
            values = np.array([c.value for c in self.components])
            probs = np.asarray(self.probs, dtype=np.float64)
            return values, probs / probs.sum()
        return None

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        probs = np.asarray(self.probs, dtype=np.float64)
        which = rng.choice(len(self.components), size=n, p=probs / probs.sum())
        out = np.empty(n)
        for idx, comp in enumerate(self.components):
            mask = which == idx
            count = int(mask.sum())
            if count:
                out[mask] = comp.draw(count, rng)
        return out


@dataclass(frozen=True)
class DistributionSpec:
    """A bounded reward law with its declared support maximum."""

    law: EmpiricalTable | Mixture
    upper_bound: float

    def __post_init__(self):
        if not math.isfinite(self.upper_bound):
            raise ConfigError("upper_bound must be finite")
        if self.law.support()[1] > self.upper_bound:
            raise ConfigError(
                f"law support reaches {self.law.support()[1]}, above the "
                f"declared upper bound {self.upper_bound}"
            )

    @property
    def support_min(self) -> float:
        return self.law.support()[0]

    def finite_atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        return self.law.atoms()


def sample_rewards(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise DomainError("n must be >= 0")
    draws = spec.law.draw(n, rng)
    if draws.size and float(draws.max()) > spec.upper_bound:
        raise DataError(
            f"drawn reward {float(draws.max())} above declared bound {spec.upper_bound}"
        )
    return draws


def sample_reward(spec: DistributionSpec, rng: np.random.Generator) -> float:
    return float(sample_rewards(spec, 1, rng)[0])


@dataclass(frozen=True)
class CvarEstimate:
    value: float
    method: str  # "exact" | "monte-carlo"
    tolerance: float  # half-width of a 99.9% confidence band; 0 when exact


def true_cvar(
    spec: DistributionSpec,
    alpha: float,
    rng: np.random.Generator | None = None,
    mc_samples: int = 10**6,
) -> CvarEstimate:
    """CVaR of a reward law: exact for finite support, seeded Monte-Carlo
    otherwise (the tolerance is reported so it can land in run manifests)."""
    atoms = spec.finite_atoms()
    if atoms is not None:
        return CvarEstimate(
            value=true_cvar_finite(atoms[0], atoms[1], alpha), method="exact", tolerance=0.0
        )
    if rng is None:
        raise DomainError("continuous law needs a generator for Monte-Carlo evaluation")
    sample = sample_rewards(spec, mc_samples, rng)
    value = empirical_cvar(sample, alpha)
    lo, hi = cvar_confidence_interval(
        sample, alpha, delta=1e-3, support=(spec.support_min, spec.upper_bound)
    )
    return CvarEstimate(value=value, method="monte-carlo", tolerance=(hi - lo) / 2.0)


@dataclass(frozen=True)
class CohortSpec:
    """Farmers sharing one soil type: one bandit instance.

    ``upper_bounds`` are the policy-facing maxima B_k; they must dominate
    the true support of each arm's law.
    """

    cohort_id: str
    proportion: float
    arms: tuple[DistributionSpec, ...]
    upper_bounds: tuple[float, ...]

    def __post_init__(self):
        if not (0.0 < self.proportion <= 1.0):
            raise ConfigError(
                f"cohort {self.cohort_id!r}: proportion must lie in (0,1], got {self.proportion}"
            )
        if len(self.arms) < 2:
            raise ConfigError(f"cohort {self.cohort_id!r}: need at least 2 arms")
        if len(self.upper_bounds) != len(self.arms):
            raise ConfigError(
                f"cohort {self.cohort_id!r}: {len(self.upper_bounds)} upper bounds "
                f"for {len(self.arms)} arms"
            )
        for k, (arm, bound) in enumerate(zip(self.arms, self.upper_bounds)):
            if bound < arm.upper_bound:
                raise ConfigError(
                    f"cohort {self.cohort_id!r} arm {k}: policy bound {bound} is below "
                    f"the law's support maximum {arm.upper_bound}"
                )

    @property
    def n_arms(self) -> int:
        return len(self.arms)


@dataclass(frozen=True)
class Population:
    """Farmers 0..total-1 partitioned into cohorts by contiguous blocks."""

    cohort_of: np.ndarray  # cohort index per farmer id
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return int(self.cohort_of.size)


def build_population(cohorts: Sequence[CohortSpec], total: int) -> Population:
    """Split ``total`` farmers by cohort proportions with largest-remainder
    rounding; remainder ties go to the lowest cohort index."""
    if total < 1:
        raise ConfigError(f"population total must be >= 1, got {total}")
    props = np.array([c.proportion for c in cohorts], dtype=np.float64)
    if abs(float(props.sum()) - 1.0) > _PROB_TOL:
        raise ConfigError(f"cohort proportions must sum to 1, got {float(props.sum())}")
    exact = props * total
    counts = np.floor(exact).astype(np.int64)
    remainder = exact - counts
    missing = total - int(counts.sum())
    order = np.argsort(-remainder, kind="stable")
    counts[order[:missing]] += 1
    cohort_of = np.repeat(np.arange(len(cohorts)), counts)
    return Population(cohort_of=cohort_of, counts=tuple(int(c) for c in counts))


def draw_volunteers(
    pop: Population, min_n: int, max_n: int, rng: np.random.Generator
) -> np.ndarray:
    """A season's volunteers: size uniform on {min_n..max_n}, members a
    uniform subset without replacement, returned sorted by farmer id."""
    if min_n < 0 or min_n > max_n:
        raise ConfigError(f"need 0 <= min_n <= max_n, got [{min_n}, {max_n}]")
    if max_n > pop.total:
        raise ConfigError(f"max_n {max_n} exceeds population size {pop.total}")
    size = int(rng.integers(min_n, max_n + 1))
    members = rng.choice(pop.total, size=size, replace=False)
    return np.sort(members)


@dataclass(frozen=True)
class Environment:
    cohorts: tuple[CohortSpec, ...]

    @property
    def n_cohorts(self) -> int:
        return len(self.cohorts)

    def draw_rewards(
        self, cohort: int, arm_ids: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """One independent draw per assignment from the (cohort, arm) laws.

        Draws are grouped by arm in ascending order, which fixes the
        generator consumption order per season.
        """
        if not (0 <= cohort < self.n_cohorts):
            raise DataError(f"unknown cohort index {cohort}")
        spec_list = self.cohorts[cohort].arms
        arm_ids = np.asarray(arm_ids, dtype=np.int64)
        if arm_ids.size and (arm_ids.min() < 0 or arm_ids.max() >= len(spec_list)):
            raise DataError(
                f"cohort {cohort}: arm ids outside 0..{len(spec_list) - 1}"
            )
        rewards = np.empty(arm_ids.size)
        for arm in np.unique(arm_ids):
            mask = arm_ids == arm
            rewards[mask] = sample_rewards(spec_list[int(arm)], int(mask.sum()), rng)
        return rewards


def season_step(
    env: Environment,
    assignments: dict[int, Sequence[tuple[int, int]]],
    rng: np.random.Generator,
) -> list[tuple[int, int, int, float]]:
    """Draw one reward per (farmer, arm) assignment, cohort by cohort.

    ``assignments`` maps cohort index to (farmer_id, arm_id) pairs; returns
    (farmer_id, cohort, arm_id, reward) tuples in ascending cohort order.
    """
    out: list[tuple[int, int, int, float]] = []
    for cohort in sorted(assignments):
        pairs = assignments[cohort]
        if not pairs:
            continue
        arm_ids = np.array([arm for _, arm in pairs], dtype=np.int64)
        rewards = env.draw_rewards(cohort, arm_ids, rng)
        out.extend(
            (int(farmer), int(cohort), int(arm), float(r))
            for (farmer, arm), r in zip(pairs, rewards)
        )
    return out
