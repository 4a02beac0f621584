"""Replication campaigns: run (policy x environment) over T seasons,
R times, and derive every performance measure.

Determinism: every random stream is keyed by
``(master_seed, replication, role, cohort)`` so results are a pure function
of the config and identical for any worker count; aggregation reduces in
replication-index order. True CVaRs of the reward laws are evaluated under
a fixed salt, independent of the master seed, so the "ground truth" does
not move between experiments on the same environment.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._version import __version__
from .config import ExperimentConfig, config_to_dict
from .environment import (
    CvarEstimate,
    Environment,
    build_population,
    draw_volunteers,
    true_cvar,
)
from .errors import ConfigError, ReplicationError
from .metrics import cvar_confidence_interval, empirical_cvar
from .policies import (
    PolicyState,
    bcb_init,
    etc_init,
    oracle_init,
    season_recommendations,
    season_update,
    uniform_init,
)
from .rngstreams import (
    ROLE_ENVIRONMENT,
    ROLE_POLICY,
    ROLE_VOLUNTEER,
    TRUE_CVAR_SALT,
    stream,
)

__all__ = [
    "RunLogs",
    "ExperimentResult",
    "run_replication",
    "run_experiment",
    "pooled_empirical_cvar",
    "population_regret_curve",
    "individual_regret_distribution",
    "sampling_proportion_curves",
    "write_reports",
    "REPORT_FILES",
]

CI_DELTA = 0.05  # confidence level of the pooled-CVaR bands
MC_SAMPLES = 10**6  # Monte-Carlo size for true CVaRs of continuous laws

REPORT_FILES = (
    "cvar_curve.csv",
    "regret_curve.csv",
    "proportions.csv",
    "individual_regret.csv",
    "manifest.json",
)


@dataclass
class RunLogs:
    """Flat per-record log of one replication: season (1-based), farmer,
    cohort index, arm index and observed reward, in simulation order."""

    replication: int
    season: np.ndarray
    farmer: np.ndarray
    cohort: np.ndarray
    arm: np.ndarray
    reward: np.ndarray

    def __len__(self) -> int:
        return int(self.season.size)


def _make_policy(config: ExperimentConfig, cohort_idx: int, oracle_arm: int | None) -> PolicyState:
    cohort = config.cohorts[cohort_idx]
    kind = config.strategy.kind
    if kind == "bcb":
        return bcb_init(cohort.n_arms, cohort.upper_bounds, config.alpha)
    if kind == "etc":
        return etc_init(cohort.n_arms, cohort.upper_bounds, config.alpha, config.strategy.t_trials)
    if kind == "oracle":
        if oracle_arm is None:
            raise ConfigError("oracle strategy needs the per-cohort optimal arms")
        return oracle_init(cohort.n_arms, cohort.upper_bounds, config.alpha, oracle_arm)
    return uniform_init(cohort.n_arms, cohort.upper_bounds, config.alpha)


def true_cvar_table(config: ExperimentConfig) -> list[list[CvarEstimate]]:
    """True CVaR of every (cohort, arm) law: exact for finite support,
    seeded Monte-Carlo otherwise."""
    table = []
    for c, cohort in enumerate(config.cohorts):
        row = []
        for k, spec in enumerate(cohort.arms):
            rng = stream(TRUE_CVAR_SALT, c, k)
            row.append(true_cvar(spec, config.alpha, rng=rng, mc_samples=MC_SAMPLES))
        table.append(row)
    return table


def _oracle_arms(estimates: list[list[CvarEstimate]]) -> np.ndarray:
    values = np.array([[e.value for e in row] for row in estimates])
    return values.argmax(axis=1)


def run_replication(
    config: ExperimentConfig, replication: int, oracle_arms: Sequence[int] | None = None
) -> RunLogs:
    """One seeded replication; a pure function of (config, master seed, r).

    Each cohort evolves as an independent identification problem on its own
    environment and policy streams; volunteers are drawn at population level
    and split by cohort, so per-cohort batch sizes fluctuate.
    """
    try:
        return _run_replication(config, replication, oracle_arms)
    except ReplicationError:
        raise
    except Exception as exc:
        raise ReplicationError(replication, str(exc)) from exc


def _run_replication(
    config: ExperimentConfig, replication: int, oracle_arms: Sequence[int] | None
) -> RunLogs:
    if config.strategy.kind == "oracle" and oracle_arms is None:
        oracle_arms = _oracle_arms(true_cvar_table(config))
    pop = build_population(config.cohorts, config.population_total)
    env = Environment(cohorts=config.cohorts)
    n_cohorts = len(config.cohorts)
    seed = config.master_seed

    states = [
        _make_policy(config, c, None if oracle_arms is None else int(oracle_arms[c]))
        for c in range(n_cohorts)
    ]
    volunteer_rng = stream(seed, replication, ROLE_VOLUNTEER)
    env_rngs = [stream(seed, replication, ROLE_ENVIRONMENT, c) for c in range(n_cohorts)]
    policy_rngs = [stream(seed, replication, ROLE_POLICY, c) for c in range(n_cohorts)]

    seasons, farmers, cohorts, arms, rewards = [], [], [], [], []
    for season in range(1, config.horizon + 1):
        members = draw_volunteers(pop, config.volunteers_min, config.volunteers_max, volunteer_rng)
        member_cohorts = pop.cohort_of[members]
        for c in range(n_cohorts):
            volunteers = members[member_cohorts == c]
            if volunteers.size == 0:
                continue
            assignment = season_recommendations(
                states[c], season, volunteers.tolist(), policy_rngs[c]
            )
            farmer_ids = np.array([f for f, _ in assignment], dtype=np.int64)
            arm_ids = np.array([a for _, a in assignment], dtype=np.int64)
            drawn = env.draw_rewards(c, arm_ids, env_rngs[c])
            season_update(states[c], assignment, drawn)
            seasons.append(np.full(volunteers.size, season, dtype=np.int32))
            farmers.append(farmer_ids.astype(np.int32))
            cohorts.append(np.full(volunteers.size, c, dtype=np.int16))
            arms.append(arm_ids.astype(np.int16))
            rewards.append(drawn)

    def _cat(parts, dtype):
        return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)

    return RunLogs(
        replication=replication,
        season=_cat(seasons, np.int32),
        farmer=_cat(farmers, np.int32),
        cohort=_cat(cohorts, np.int16),
        arm=_cat(arms, np.int16),
        reward=_cat(rewards, np.float64),
    )


# ---------------------------------------------------------------------------
# Aggregation


def pooled_empirical_cvar(logs: Sequence[RunLogs], alpha: float, horizon: int) -> float:
    """Empirical CVaR of every reward observed up to ``horizon``, pooled
    over all farmers and all replications."""
    rewards = np.concatenate([lg.reward[lg.season <= horizon] for lg in logs])
    return empirical_cvar(rewards, alpha)


def _pull_counts(lg: RunLogs, n_cohorts: int, n_arms: int, horizon: int) -> np.ndarray:
    """Per-season pull counts, shape (horizon, n_cohorts, n_arms)."""
    live = lg.season <= horizon
    season = lg.season[live].astype(np.int64)
    flat = ((season - 1) * n_cohorts + lg.cohort[live]) * n_arms + lg.arm[live]
    counts = np.bincount(flat, minlength=horizon * n_cohorts * n_arms)
    return counts.reshape(horizon, n_cohorts, n_arms)


def _gaps(true_cvars: np.ndarray) -> np.ndarray:
    return true_cvars.max(axis=1, keepdims=True) - true_cvars


def _regret_curves(
    logs: Sequence[RunLogs], true_cvars: np.ndarray, proportions: np.ndarray, horizon: int
) -> np.ndarray:
    """Per-replication cumulated population regret, shape (R, horizon)."""
    n_cohorts, n_arms = true_cvars.shape
    gaps = _gaps(true_cvars)
    weighted = gaps * proportions[:, None]  # (C, K)
    curves = np.empty((len(logs), horizon))
    for i, lg in enumerate(logs):
        per_season = np.einsum("tck,ck->t", _pull_counts(lg, n_cohorts, n_arms, horizon), weighted)
        curves[i] = np.cumsum(per_season)
    return curves


def population_regret_curve(
    logs: Sequence[RunLogs],
    true_cvars: np.ndarray,
    proportions: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Mean cumulated CVaR regret of the population per season 1..horizon:
    cohort-proportion-weighted sum of gap x expected pull count, with the
    expectation replaced by the replication average."""
    true_cvars = np.asarray(true_cvars, dtype=np.float64)
    proportions = np.asarray(proportions, dtype=np.float64)
    if proportions.shape != (true_cvars.shape[0],):
        raise ConfigError(
            f"need one proportion per cohort: {proportions.shape} vs {true_cvars.shape}"
        )
    return _regret_curves(logs, true_cvars, proportions, horizon).mean(axis=0)


def individual_regret_distribution(
    logs: Sequence[RunLogs],
    true_cvars: np.ndarray,
    horizon: int,
    n_farmers: int,
) -> np.ndarray:
    """Cumulated regret of each farmer at ``horizon``: one value per
    (replication, farmer), zero for farmers who never volunteered."""
    gaps = _gaps(np.asarray(true_cvars, dtype=np.float64))
    out = np.zeros((len(logs), n_farmers))
    for i, lg in enumerate(logs):
        live = lg.season <= horizon
        per_record = gaps[lg.cohort[live], lg.arm[live]]
        np.add.at(out[i], lg.farmer[live], per_record)
    return out


def sampling_proportion_curves(
    logs: Sequence[RunLogs], n_cohorts: int, n_arms: int, horizon: int
) -> np.ndarray:
    """Cumulative selection frequency per (cohort, arm, season), averaged
    over replications; rows sum to 1 per (cohort, season).

    Replications in which a cohort has no pulls up to a season are left out
    of that point's average (uniform 1/K if none remain).
    """
    ratio_sum = np.zeros((n_cohorts, n_arms, horizon))
    ratio_n = np.zeros((n_cohorts, 1, horizon))
    for lg in logs:
        cum = np.cumsum(_pull_counts(lg, n_cohorts, n_arms, horizon), axis=0)  # (T, C, K)
        totals = cum.sum(axis=2)  # (T, C)
        live = totals > 0
        ratios = np.zeros_like(cum, dtype=np.float64)
        ratios[live] = cum[live] / totals[live][:, None]
        ratio_sum += ratios.transpose(1, 2, 0)
        ratio_n += live.T[:, None, :]
    out = np.full((n_cohorts, n_arms, horizon), 1.0 / n_arms)
    np.divide(ratio_sum, ratio_n, out=out, where=ratio_n > 0)
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    label: str
    true_cvars: np.ndarray  # (C, K)
    true_cvar_info: list[list[CvarEstimate]]
    optimal_arms: np.ndarray  # (C,)
    logs: list[RunLogs]
    pooled_curve: np.ndarray  # (T, 3): pooled_cvar, ci_lo, ci_hi
    regret_curve: np.ndarray  # (T, 3): mean, q10, q90
    proportion_curves: np.ndarray  # (C, K, T)
    individual_regrets: np.ndarray  # (R, n_farmers) at the final horizon

    @property
    def final_pooled_cvar(self) -> float:
        return float(self.pooled_curve[-1, 0])

    @property
    def final_mean_regret(self) -> float:
        return float(self.regret_curve[-1, 0])


def _pooled_curves(
    logs: Sequence[RunLogs], alpha: float, horizon: int, support: tuple[float, float]
) -> np.ndarray:
    """Pooled CVaR and its confidence band per season, sharing one sorted
    prefix that grows season by season."""
    rewards = np.concatenate([lg.reward for lg in logs])
    seasons = np.concatenate([lg.season for lg in logs])
    order = np.argsort(seasons, kind="stable")
    rewards = rewards[order]
    seasons = seasons[order]
    boundaries = np.searchsorted(seasons, np.arange(1, horizon + 1), side="right")
    out = np.full((horizon, 3), np.nan)
    prefix = np.empty(0)
    done = 0
    for t in range(horizon):
        end = int(boundaries[t])
        if end > done:
            prefix = np.sort(np.concatenate([prefix, rewards[done:end]]), kind="stable")
            done = end
        if prefix.size == 0:
            continue
        out[t, 0] = empirical_cvar(prefix, alpha)
        out[t, 1:] = cvar_confidence_interval(prefix, alpha, CI_DELTA, support)
    return out


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run R independent replications and derive all performance measures.

    Results are identical for any ``workers`` value; any replication failure
    aborts the experiment with that replication's index.
    """
    estimates = true_cvar_table(config)
    true_cvars = np.array([[e.value for e in row] for row in estimates])
    oracle_arms = _oracle_arms(estimates)

    if workers <= 1:
        logs = [run_replication(config, r, oracle_arms) for r in range(config.replications)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_replication, config, r, oracle_arms)
                for r in range(config.replications)
            ]
            logs = [f.result() for f in futures]

    n_cohorts = len(config.cohorts)
    n_arms = config.cohorts[0].n_arms
    proportions = np.array([c.proportion for c in config.cohorts])
    support = (
        min(spec.support_min for c in config.cohorts for spec in c.arms),
        max(spec.upper_bound for c in config.cohorts for spec in c.arms),
    )

    curves = _regret_curves(logs, true_cvars, proportions, config.horizon)
    regret = np.column_stack(
        [curves.mean(axis=0), np.quantile(curves, 0.1, axis=0), np.quantile(curves, 0.9, axis=0)]
    )
    return ExperimentResult(
        config=config,
        label=config.strategy.label,
        true_cvars=true_cvars,
        true_cvar_info=estimates,
        optimal_arms=oracle_arms,
        logs=logs,
        pooled_curve=_pooled_curves(logs, config.alpha, config.horizon, support),
        regret_curve=regret,
        proportion_curves=sampling_proportion_curves(logs, n_cohorts, n_arms, config.horizon),
        individual_regrets=individual_regret_distribution(
            logs, true_cvars, config.horizon, config.population_total
        ),
    )


# ---------------------------------------------------------------------------
# Reports


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def write_reports(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write the four CSV tables and the run manifest; byte-identical for
    identical configs and seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = result.label
    horizon = result.config.horizon
    written = []

    path = out / "cvar_curve.csv"
    with path.open("w", newline="") as fh:
        fh.write("strategy,T,pooled_cvar,ci_lo,ci_hi\n")
        for t in range(result.pooled_curve.shape[0]):
            row = result.pooled_curve[t]
            if np.isnan(row[0]):
                continue
            fh.write(f"{label},{t + 1},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")
    written.append(path)

    path = out / "regret_curve.csv"
    with path.open("w", newline="") as fh:
        fh.write("strategy,T,mean_regret,q10,q90\n")
        for t in range(result.regret_curve.shape[0]):
            row = result.regret_curve[t]
            fh.write(f"{label},{t + 1},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")
    written.append(path)

    path = out / "proportions.csv"
    with path.open("w", newline="") as fh:
        fh.write("cohort,arm,T,proportion\n")
        for c, cohort in enumerate(result.config.cohorts):
            for k in range(cohort.n_arms):
                for t in range(result.proportion_curves.shape[2]):
                    fh.write(
                        f"{cohort.cohort_id},{k},{t + 1},"
                        f"{_fmt(result.proportion_curves[c, k, t])}\n"
                    )
    written.append(path)

    path = out / "individual_regret.csv"
    with path.open("w", newline="") as fh:
        fh.write("strategy,T,farmer_regret\n")
        for rep in range(result.individual_regrets.shape[0]):
            for value in result.individual_regrets[rep]:
                fh.write(f"{label},{horizon},{_fmt(value)}\n")
    written.append(path)

    manifest = {
        "package_version": __version__,
        "strategy": label,
        "master_seed": result.config.master_seed,
        "ci_delta": CI_DELTA,
        "config": config_to_dict(result.config),
        "true_cvar": [
            {
                "cohort": cohort.cohort_id,
                "alpha": result.config.alpha,
                "values": [e.value for e in row],
                "methods": [e.method for e in row],
                "tolerances": [e.tolerance for e in row],
                "optimal_arm": int(result.optimal_arms[c]),
            }
            for c, (cohort, row) in enumerate(zip(result.config.cohorts, result.true_cvar_info))
        ],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
