"""Bandit identification strategies operating on per-cohort state.

Four strategies share one state container:

* ``bcb`` - per-farmer Dirichlet reweighting of arm histories seeded with
  the arm's maximum observable reward, scored by a noisy empirical CVaR,
  argmax selection, and fair assignment of the recommendation multiset to
  the season's volunteers (lowest cumulated empirical regret first, lowest
  empirical CVaR first).
* ``etc`` - equiproportional exploration for ``t_trials`` seasons, then a
  permanent commitment to the arm with the best empirical CVaR over its
  real observations.
* ``oracle`` / ``uniform`` - best-arm and uniform-random baselines.

All randomness flows through the caller's generator; identical state,
inputs and seed give identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, DomainError
from .metrics import _check_level, _sorted_cvar

__all__ = [
    "ArmState",
    "FarmerLedger",
    "PolicyState",
    "bcb_init",
    "etc_init",
    "oracle_init",
    "uniform_init",
    "dirichlet_weights",
    "noisy_cvar_score",
    "bcb_recommend_batch",
    "etc_recommend_batch",
    "etc_commit",
    "bcb_update",
    "arm_cvar_estimates",
    "fair_assignment",
    "record_pulls",
    "refresh_regrets",
    "update_farmer_ledgers",
    "season_recommendations",
    "season_update",
]

BatchAssignment = list[tuple[int, int]]  # (farmer_id, arm_id) pairs for one season


@dataclass
class ArmState:
    """Reward history of one arm.

    ``observations`` holds the real rewards, sorted ascending. The arm's
    full history is the observations plus the sentinel ``upper_bound``
    inserted at initialization and never removed, so
    ``len(history) == n_obs + 1``.
    """

    arm_id: int
    upper_bound: float
    observations: np.ndarray

    @property
    def n_obs(self) -> int:
        return int(self.observations.size)

    @property
    def history(self) -> np.ndarray:
        """Sorted history including the sentinel upper bound."""
        return np.append(self.observations, self.upper_bound)

    def add(self, rewards: np.ndarray) -> None:
        if rewards.size == 0:
            return
        bad = ~np.isfinite(rewards) | (rewards > self.upper_bound)
        if np.any(bad):
            value = float(rewards[bad][0])
            raise DataError(
                f"arm {self.arm_id}: reward {value!r} exceeds upper bound {self.upper_bound!r}"
            )
        self.observations = np.sort(
            np.concatenate([self.observations, rewards]), kind="stable"
        )


@dataclass
class FarmerLedger:
    """Per-farmer pull counts and cumulated empirical regret."""

    farmer_id: int
    pulls: np.ndarray
    regret: float = 0.0


@dataclass
class PolicyState:
    kind: str  # "bcb" | "etc" | "oracle" | "uniform"
    alpha: float
    arms: list[ArmState]
    t_trials: int | None = None
    committed_arm: int | None = None  # etc only, fixed after the trial phase
    oracle_arm: int | None = None
    ledgers: dict[int, FarmerLedger] = field(default_factory=dict)

    @property
    def n_arms(self) -> int:
        return len(self.arms)


def _make_arms(n_arms: int, upper_bounds: Sequence[float]) -> list[ArmState]:
    if n_arms < 2:
        raise ConfigError(f"need at least 2 arms, got {n_arms}")
    bounds = np.asarray(upper_bounds, dtype=np.float64)
    if bounds.shape != (n_arms,):
        raise ConfigError(f"expected {n_arms} upper bounds, got shape {bounds.shape}")
    if not np.all(np.isfinite(bounds)):
        raise ConfigError("upper bounds must be finite")
    return [
        ArmState(arm_id=k, upper_bound=float(bounds[k]), observations=np.empty(0))
        for k in range(n_arms)
    ]


def bcb_init(n_arms: int, upper_bounds: Sequence[float], alpha: float) -> PolicyState:
    """Fresh BCB state: every arm history holds only its sentinel bound."""
    return PolicyState(kind="bcb", alpha=_check_level(alpha), arms=_make_arms(n_arms, upper_bounds))


def etc_init(
    n_arms: int, upper_bounds: Sequence[float], alpha: float, t_trials: int
) -> PolicyState:
    if t_trials < 1:
        raise ConfigError(f"t_trials must be >= 1, got {t_trials}")
    return PolicyState(
        kind="etc",
        alpha=_check_level(alpha),
        arms=_make_arms(n_arms, upper_bounds),
        t_trials=int(t_trials),
    )


def oracle_init(
    n_arms: int, upper_bounds: Sequence[float], alpha: float, optimal_arm: int
) -> PolicyState:
    if not (0 <= optimal_arm < n_arms):
        raise ConfigError(f"optimal arm {optimal_arm} out of range for {n_arms} arms")
    return PolicyState(
        kind="oracle",
        alpha=_check_level(alpha),
        arms=_make_arms(n_arms, upper_bounds),
        oracle_arm=int(optimal_arm),
    )


def uniform_init(n_arms: int, upper_bounds: Sequence[float], alpha: float) -> PolicyState:
    return PolicyState(
        kind="uniform", alpha=_check_level(alpha), arms=_make_arms(n_arms, upper_bounds)
    )


def dirichlet_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Weights from a flat Dirichlet: normalized standard exponentials."""
    if n < 1:
        raise DomainError(f"need at least one weight, got n={n}")
    draws = rng.standard_exponential(n)
    total = float(draws.sum())
    if total == 0.0:  # probability ~2^-53 per coordinate; keep the contract anyway
        return np.full(n, 1.0 / n)
    return draws / total


def noisy_cvar_score(history, weights, alpha: float) -> float:
    """Reweighted empirical CVaR of a sorted history.

    ``j`` is the largest index whose cumulative weight stays at or below
    ``alpha`` (falling back to the first entry when even the first weight
    overshoots); the score is ``x_j - (1/alpha) * sum_i w_i max(x_j - x_i, 0)``
    and always lies within the history's range.
    """
    alpha = _check_level(alpha)
    x = np.asarray(history, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if x.size == 0 or x.shape != w.shape:
        raise DomainError("history and weights must be equal-length and non-empty")
    if np.any(np.diff(x) < 0):
        raise DomainError("history must be sorted in increasing order")
    if np.any(w < 0):
        raise DomainError("weights must be non-negative")
    prefix = np.cumsum(w)
    j = int(np.searchsorted(prefix, alpha, side="right"))
    j = min(max(j, 1), x.size)
    q = float(x[j - 1])
    pen = float(np.dot(w, np.maximum(q - x, 0.0)))
    return q - pen / alpha


def _stacked_histories(state: PolicyState) -> tuple[np.ndarray, np.ndarray]:
    parts = [arm.history for arm in state.arms]
    offsets = np.zeros(len(parts) + 1, dtype=np.int64)
    np.cumsum([p.size for p in parts], out=offsets[1:])
    return np.concatenate(parts), offsets


def bcb_recommend_batch(
    state: PolicyState, n_farmers: int, rng: np.random.Generator
) -> np.ndarray:
    """One independent noisy-CVaR argmax per farmer.

    Every farmer reweights every arm with fresh Dirichlet weights; ties are
    broken uniformly at random, which makes the fresh-state recommendation
    exactly uniform over arms with equal bounds.
    """
    if state.kind != "bcb":
        raise ConfigError(f"bcb_recommend_batch called on a {state.kind!r} state")
    if n_farmers == 0:
        return np.empty(0, dtype=np.int64)
    values, offsets = _stacked_histories(state)
    expo = rng.standard_exponential((n_farmers, values.size))
    tie_u = rng.random(n_farmers)
    choices, _ = kernels.bcb_batch_choose(values, offsets, state.alpha, expo, tie_u)
    return choices


def arm_cvar_estimates(state: PolicyState, include_sentinel: bool = True) -> np.ndarray:
    """Empirical CVaR per arm, over the sentinel-seeded history or over real
    observations only (the ETC commit criterion)."""
    out = np.empty(state.n_arms)
    for k, arm in enumerate(state.arms):
        values = arm.history if include_sentinel else arm.observations
        if values.size == 0:
            raise ConfigError(f"arm {k} has no observations")
        out[k] = _sorted_cvar(values, state.alpha)
    return out


def etc_recommend_batch(
    state: PolicyState, season: int, n_farmers: int, rng: np.random.Generator
) -> np.ndarray:
    """Equiproportional recommendations during trials, committed arm after.

    In a trial season every arm appears ``n // K`` or ``n // K + 1`` times;
    the arms receiving the remainder are drawn uniformly without
    replacement, and the multiset is shuffled across farmers.
    """
    if state.kind != "etc":
        raise ConfigError(f"etc_recommend_batch called on a {state.kind!r} state")
    n_arms = state.n_arms
    if season <= state.t_trials:
        base, rem = divmod(n_farmers, n_arms)
        counts = np.full(n_arms, base, dtype=np.int64)
        if rem:
            counts[rng.choice(n_arms, size=rem, replace=False)] += 1
        recs = np.repeat(np.arange(n_arms, dtype=np.int64), counts)
        if recs.size:
            rng.shuffle(recs)
        return recs
    if state.committed_arm is None:
        state.committed_arm = etc_commit(state, rng)
    return np.full(n_farmers, state.committed_arm, dtype=np.int64)


def etc_commit(state: PolicyState, rng: np.random.Generator) -> int:
    """Arm with the best empirical CVaR over real observations (no sentinel),
    ties broken uniformly at random."""
    if state.kind != "etc":
        raise ConfigError(f"etc_commit called on a {state.kind!r} state")
    for arm in state.arms:
        if arm.n_obs == 0:
            raise ConfigError(f"cannot commit: arm {arm.arm_id} was never observed")
    scores = arm_cvar_estimates(state, include_sentinel=False)
    winners = np.flatnonzero(scores == scores.max())
    return int(winners[rng.integers(winners.size)])


def bcb_update(state: PolicyState, results: Iterable[tuple[int, float]]) -> None:
    """Append end-of-season results to the arm histories.

    Shared by every strategy; sentinels are retained and each reward must
    stay at or below its arm's upper bound.
    """
    grouped: dict[int, list[float]] = {}
    for arm_id, reward in results:
        if not (0 <= arm_id < state.n_arms):
            raise DataError(f"unknown arm {arm_id}")
        grouped.setdefault(int(arm_id), []).append(float(reward))
    for arm_id, rewards in grouped.items():
        state.arms[arm_id].add(np.asarray(rewards))


def fair_assignment(
    arm_ids: Sequence[int],
    farmers: Sequence[FarmerLedger],
    empirical_cvars,
) -> BatchAssignment:
    """Pair the i-th lowest-regret farmer with the i-th lowest-CVaR arm.

    Permutes the recommendation multiset, never changes it; ties on either
    side fall back to ascending farmer_id / arm_id.
    """
    if len(arm_ids) != len(farmers):
        raise DomainError(
            f"got {len(arm_ids)} recommendations for {len(farmers)} farmers"
        )
    cvars = np.asarray(empirical_cvars, dtype=np.float64)
    ranked_farmers = sorted(farmers, key=lambda f: (f.regret, f.farmer_id))
    ranked_arms = sorted(int(a) for a in arm_ids)
    ranked_arms.sort(key=lambda a: cvars[a])  # stable: equal CVaRs stay id-ordered
    return [(f.farmer_id, a) for f, a in zip(ranked_farmers, ranked_arms)]


def record_pulls(ledgers: Mapping[int, FarmerLedger], assignment: BatchAssignment) -> None:
    for farmer_id, arm_id in assignment:
        ledgers[farmer_id].pulls[arm_id] += 1


def refresh_regrets(farmers: Iterable[FarmerLedger], empirical_cvars) -> None:
    """Recompute cumulated empirical regrets against the current best arm."""
    cvars = np.asarray(empirical_cvars, dtype=np.float64)
    gaps = cvars.max() - cvars
    for ledger in farmers:
        ledger.regret = float(ledger.pulls @ gaps)


def update_farmer_ledgers(
    ledgers: Mapping[int, FarmerLedger],
    assignment: BatchAssignment,
    empirical_cvars,
) -> None:
    """Record a season's pulls, then refresh every regret from the full pull
    history and the current empirical CVaRs."""
    record_pulls(ledgers, assignment)
    refresh_regrets(ledgers.values(), empirical_cvars)


def _ensure_ledgers(state: PolicyState, volunteers: Sequence[int]) -> None:
    for farmer_id in volunteers:
        if farmer_id not in state.ledgers:
            state.ledgers[farmer_id] = FarmerLedger(
                farmer_id=int(farmer_id), pulls=np.zeros(state.n_arms, dtype=np.int64)
            )


def season_recommendations(
    state: PolicyState,
    season: int,
    volunteers: Sequence[int],
    rng: np.random.Generator,
) -> BatchAssignment:
    """Produce one season's (farmer_id, arm_id) assignment for a cohort.

    BCB with no data yet assigns its (uniform) recommendations directly;
    once data exists the recommendation multiset is fair-assigned. The
    other strategies pair recommendations to volunteers positionally.
    """
    n = len(volunteers)
    if n == 0:
        return []
    if state.kind == "bcb":
        _ensure_ledgers(state, volunteers)
        recs = bcb_recommend_batch(state, n, rng)
        if all(arm.n_obs == 0 for arm in state.arms):
            return [(int(f), int(a)) for f, a in zip(volunteers, recs)]
        cvars = arm_cvar_estimates(state, include_sentinel=True)
        ledgers = [state.ledgers[int(f)] for f in volunteers]
        refresh_regrets(ledgers, cvars)
        return fair_assignment(recs, ledgers, cvars)
    if state.kind == "etc":
        recs = etc_recommend_batch(state, season, n, rng)
    elif state.kind == "oracle":
        recs = np.full(n, state.oracle_arm, dtype=np.int64)
    elif state.kind == "uniform":
        recs = rng.integers(0, state.n_arms, size=n)
    else:
        raise ConfigError(f"unknown strategy kind {state.kind!r}")
    return [(int(f), int(a)) for f, a in zip(volunteers, recs)]


def season_update(
    state: PolicyState, assignment: BatchAssignment, rewards: Sequence[float]
) -> None:
    """Store a season's observed rewards; BCB also records pulls for the
    fair-exploration ledger (regrets refresh next season, against the
    then-current empirical CVaRs)."""
    bcb_update(state, [(arm, r) for (_, arm), r in zip(assignment, rewards)])
    if state.kind == "bcb":
        record_pulls(state.ledgers, assignment)
