"""Risk-aware batch multi-armed bandits.

CVaR risk measures, Dirichlet-reweighted noisy-CVaR identification (BCB),
batch explore-then-commit and baseline strategies, bounded synthetic reward
environments organized by farmer cohort, and a seeded replication harness
with CSV reporting.
"""

from . import configs
from ._version import __version__
from .config import ExperimentConfig, StrategySpec, load_config, with_strategy
from .environment import (
    CohortSpec,
    DistributionSpec,
    EmpiricalTable,
    Environment,
    Mixture,
    PointMass,
    Population,
    TruncNormalPart,
    UniformPart,
    build_population,
    draw_volunteers,
    sample_reward,
    sample_rewards,
    true_cvar,
)
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    ReplicationError,
    RiskBanditError,
)
from .harness import (
    ExperimentResult,
    RunLogs,
    individual_regret_distribution,
    pooled_empirical_cvar,
    population_regret_curve,
    run_experiment,
    run_replication,
    sampling_proportion_curves,
    write_reports,
)
from .metrics import (
    YieldRecord,
    agronomic_efficiency,
    cvar_confidence_interval,
    empirical_cvar,
    empirical_var,
    true_cvar_finite,
    yield_excess,
)
from .policies import (
    ArmState,
    FarmerLedger,
    PolicyState,
    arm_cvar_estimates,
    bcb_init,
    bcb_recommend_batch,
    bcb_update,
    dirichlet_weights,
    etc_commit,
    etc_init,
    etc_recommend_batch,
    fair_assignment,
    noisy_cvar_score,
    oracle_init,
    season_recommendations,
    season_update,
    uniform_init,
    update_farmer_ledgers,
)

__all__ = [
    "__version__",
    # metrics
    "YieldRecord",
    "agronomic_efficiency",
    "yield_excess",
    "empirical_var",
    "empirical_cvar",
    "true_cvar_finite",
    "cvar_confidence_interval",
    # policies
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
    "update_farmer_ledgers",
    "season_recommendations",
    "season_update",
    # environment
    "PointMass",
    "UniformPart",
    "TruncNormalPart",
    "EmpiricalTable",
    "Mixture",
    "DistributionSpec",
    "CohortSpec",
    "Population",
    "Environment",
    "build_population",
    "draw_volunteers",
    "sample_reward",
    "sample_rewards",
    "true_cvar",
    # config / harness
    "StrategySpec",
    "ExperimentConfig",
    "load_config",
    "with_strategy",
    "RunLogs",
    "ExperimentResult",
    "run_replication",
    "run_experiment",
    "pooled_empirical_cvar",
    "population_regret_curve",
    "individual_regret_distribution",
    "sampling_proportion_curves",
    "write_reports",
    # errors
    "RiskBanditError",
    "DomainError",
    "ConfigError",
    "DataError",
    "ReplicationError",
]
