"""Experiment configuration: JSON schema, loading and validation.

Config file layout::

    {
      "strategy": {"kind": "bcb" | "etc" | "oracle" | "uniform",
                   "alpha": 0.3, "t_trials": 5},
      "horizon_T": 20,
      "replications": 200,
      "master_seed": 12345,
      "population": {
        "total": 50,
        "cohorts": [
          {"id": "loam", "proportion": 0.6,
           "upper_bounds": [1.0, ...],          # optional, defaults to the laws' bounds
           "arms": [<distribution>, ...]},
          ...
        ]
      },
      "volunteers": {"min": 25, "max": 35},
      "output_dir": "out/run1"                  # optional, CLI --out overrides
    }

Distributions are either sample tables::

    {"kind": "table", "values": [...], "weights": [...], "upper_bound": 1.0}

or finite mixtures of point / uniform / truncated-normal components::

    {"kind": "mixture", "upper_bound": 1.0,
     "components": [
        {"kind": "point", "value": 0.0, "weight": 0.1},
        {"kind": "uniform", "lo": 0.3, "hi": 0.5, "weight": 0.5},
        {"kind": "truncnorm", "mean": 0.8, "sd": 0.1, "lo": 0.6, "hi": 1.0,
         "weight": 0.4}]}

``weights`` and ``upper_bound`` are optional (uniform weights, support
maximum). Semantic errors carry the JSON path of the offending value.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .environment import (
    CohortSpec,
    DistributionSpec,
    EmpiricalTable,
    Mixture,
    PointMass,
    TruncNormalPart,
    UniformPart,
)
from .errors import ConfigError

__all__ = [
    "StrategySpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "config_to_dict",
    "with_strategy",
]

_STRATEGY_KINDS = ("bcb", "etc", "oracle", "uniform")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    alpha: float
    t_trials: int | None = None

    def __post_init__(self):
        if self.kind not in _STRATEGY_KINDS:
            raise ConfigError(f"strategy.kind must be one of {_STRATEGY_KINDS}, got {self.kind!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"strategy.alpha must lie in (0,1], got {self.alpha}")
        if self.kind == "etc":
            if self.t_trials is None or self.t_trials < 1:
                raise ConfigError("strategy.t_trials must be an integer >= 1 for etc")
        elif self.t_trials is not None:
            raise ConfigError(f"strategy.t_trials is only valid for etc, not {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "etc":
            return f"ETC-{self.t_trials}"
        return {"bcb": "BCB", "oracle": "Oracle", "uniform": "Uniform"}[self.kind]


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: StrategySpec
    horizon: int
    replications: int
    master_seed: int
    population_total: int
    cohorts: tuple[CohortSpec, ...]
    volunteers_min: int
    volunteers_max: int
    output_dir: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon_T must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        if self.population_total < 1:
            raise ConfigError(f"population.total must be >= 1, got {self.population_total}")
        if not self.cohorts:
            raise ConfigError("population.cohorts must be non-empty")
        ids = [c.cohort_id for c in self.cohorts]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"cohort ids must be unique, got {ids}")
        total_prop = sum(c.proportion for c in self.cohorts)
        if abs(total_prop - 1.0) > 1e-9:
            raise ConfigError(f"cohort proportions must sum to 1, got {total_prop}")
        arm_counts = {c.n_arms for c in self.cohorts}
        if len(arm_counts) != 1:
            raise ConfigError(f"all cohorts must offer the same arm count, got {sorted(arm_counts)}")
        if not (0 <= self.volunteers_min <= self.volunteers_max):
            raise ConfigError(
                f"volunteers must satisfy 0 <= min <= max, got "
                f"[{self.volunteers_min}, {self.volunteers_max}]"
            )
        if self.volunteers_max > self.population_total:
            raise ConfigError(
                f"volunteers.max {self.volunteers_max} exceeds population total "
                f"{self.population_total}"
            )

    @property
    def alpha(self) -> float:
        return self.strategy.alpha


def _need(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return obj[key]


def _as_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    return float(value)


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _parse_component(obj: Any, where: str) -> tuple[Any, float]:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    kind = _need(obj, "kind", where)
    weight = _as_number(_need(obj, "weight", where), f"{where}.weight")
    try:
        if kind == "point":
            return PointMass(_as_number(_need(obj, "value", where), f"{where}.value")), weight
        if kind == "uniform":
            return (
                UniformPart(
                    _as_number(_need(obj, "lo", where), f"{where}.lo"),
                    _as_number(_need(obj, "hi", where), f"{where}.hi"),
                ),
                weight,
            )
        if kind == "truncnorm":
            return (
                TruncNormalPart(
                    _as_number(_need(obj, "mean", where), f"{where}.mean"),
                    _as_number(_need(obj, "sd", where), f"{where}.sd"),
                    _as_number(_need(obj, "lo", where), f"{where}.lo"),
                    _as_number(_need(obj, "hi", where), f"{where}.hi"),
                ),
                weight,
            )
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: unknown component kind {kind!r}")


def _parse_distribution(obj: Any, where: str) -> DistributionSpec:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    kind = _need(obj, "kind", where)
    try:
        if kind == "table":
            values = tuple(
                _as_number(v, f"{where}.values[{i}]")
                for i, v in enumerate(_need(obj, "values", where))
            )
            weights = obj.get("weights")
            if weights is not None:
                weights = tuple(
                    _as_number(w, f"{where}.weights[{i}]") for i, w in enumerate(weights)
                )
            law: EmpiricalTable | Mixture = EmpiricalTable(values=values, weights=weights)
        elif kind == "mixture":
            raw = _need(obj, "components", where)
            if not isinstance(raw, list) or not raw:
                raise ConfigError(f"{where}.components: expected a non-empty list")
            parsed = [
                _parse_component(comp, f"{where}.components[{i}]") for i, comp in enumerate(raw)
            ]
            law = Mixture(
                components=tuple(c for c, _ in parsed), probs=tuple(w for _, w in parsed)
            )
        else:
            raise ConfigError(f"{where}.kind: unknown distribution kind {kind!r}")
        upper = obj.get("upper_bound")
        if upper is None:
            upper = law.support()[1]
        else:
            upper = _as_number(upper, f"{where}.upper_bound")
        return DistributionSpec(law=law, upper_bound=upper)
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from None


def _parse_cohort(obj: Any, where: str) -> CohortSpec:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    cohort_id = _need(obj, "id", where)
    if not isinstance(cohort_id, str) or not cohort_id:
        raise ConfigError(f"{where}.id: expected a non-empty string")
    proportion = _as_number(_need(obj, "proportion", where), f"{where}.proportion")
    raw_arms = _need(obj, "arms", where)
    if not isinstance(raw_arms, list):
        raise ConfigError(f"{where}.arms: expected a list")
    arms = tuple(_parse_distribution(a, f"{where}.arms[{i}]") for i, a in enumerate(raw_arms))
    bounds = obj.get("upper_bounds")
    if bounds is None:
        bounds = tuple(a.upper_bound for a in arms)
    else:
        bounds = tuple(
            _as_number(b, f"{where}.upper_bounds[{i}]") for i, b in enumerate(bounds)
        )
    try:
        return CohortSpec(
            cohort_id=cohort_id, proportion=proportion, arms=arms, upper_bounds=bounds
        )
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(obj: Any, where: str = "config") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from already-parsed JSON data."""
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected a JSON object at the top level")

    raw_strategy = _need(obj, "strategy", where)
    if not isinstance(raw_strategy, Mapping):
        raise ConfigError(f"{where}.strategy: expected an object")
    kind = raw_strategy.get("kind")
    if not isinstance(kind, str):
        raise ConfigError(f"{where}.strategy.kind: expected a string")
    t_trials = raw_strategy.get("t_trials")
    if t_trials is not None:
        t_trials = _as_int(t_trials, f"{where}.strategy.t_trials")
    try:
        strategy = StrategySpec(
            kind=kind,
            alpha=_as_number(
                _need(raw_strategy, "alpha", f"{where}.strategy"), f"{where}.strategy.alpha"
            ),
            t_trials=t_trials,
        )
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from None

    raw_pop = _need(obj, "population", where)
    if not isinstance(raw_pop, Mapping):
        raise ConfigError(f"{where}.population: expected an object")
    raw_cohorts = _need(raw_pop, "cohorts", f"{where}.population")
    if not isinstance(raw_cohorts, list) or not raw_cohorts:
        raise ConfigError(f"{where}.population.cohorts: expected a non-empty list")
    cohorts = tuple(
        _parse_cohort(c, f"{where}.population.cohorts[{i}]") for i, c in enumerate(raw_cohorts)
    )

    raw_vol = _need(obj, "volunteers", where)
    if not isinstance(raw_vol, Mapping):
        raise ConfigError(f"{where}.volunteers: expected an object")

    output_dir = obj.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError(f"{where}.output_dir: expected a string")

    try:
        return ExperimentConfig(
            strategy=strategy,
            horizon=_as_int(_need(obj, "horizon_T", where), f"{where}.horizon_T"),
            replications=_as_int(_need(obj, "replications", where), f"{where}.replications"),
            master_seed=_as_int(_need(obj, "master_seed", where), f"{where}.master_seed"),
            population_total=_as_int(
                _need(raw_pop, "total", f"{where}.population"), f"{where}.population.total"
            ),
            cohorts=cohorts,
            volunteers_min=_as_int(
                _need(raw_vol, "min", f"{where}.volunteers"), f"{where}.volunteers.min"
            ),
            volunteers_max=_as_int(
                _need(raw_vol, "max", f"{where}.volunteers"), f"{where}.volunteers.max"
            ),
            output_dir=output_dir,
        )
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a JSON config file.

    Parse errors are anchored to file line/column; semantic errors to the
    JSON path of the offending value.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(data, where=str(path))
    except ConfigError:
        raise


def _component_to_dict(comp: Any, weight: float) -> dict[str, Any]:
    if isinstance(comp, PointMass):
        return {"kind": "point", "value": comp.value, "weight": weight}
    if isinstance(comp, UniformPart):
        return {"kind": "uniform", "lo": comp.lo, "hi": comp.hi, "weight": weight}
    return {
        "kind": "truncnorm",
        "mean": comp.mean,
        "sd": comp.sd,
        "lo": comp.lo,
        "hi": comp.hi,
        "weight": weight,
    }


def _distribution_to_dict(spec: DistributionSpec) -> dict[str, Any]:
    if isinstance(spec.law, EmpiricalTable):
        out: dict[str, Any] = {"kind": "table", "values": list(spec.law.values)}
        if spec.law.weights is not None:
            out["weights"] = list(spec.law.weights)
    else:
        out = {
            "kind": "mixture",
            "components": [
                _component_to_dict(c, w)
                for c, w in zip(spec.law.components, spec.law.probs)
            ],
        }
    out["upper_bound"] = spec.upper_bound
    return out


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    """Round-trippable dict form of the effective config, minus output_dir
    (report files must not depend on where they are written)."""
    strategy: dict[str, Any] = {"kind": config.strategy.kind, "alpha": config.strategy.alpha}
    if config.strategy.t_trials is not None:
        strategy["t_trials"] = config.strategy.t_trials
    return {
        "strategy": strategy,
        "horizon_T": config.horizon,
        "replications": config.replications,
        "master_seed": config.master_seed,
        "population": {
            "total": config.population_total,
            "cohorts": [
                {
                    "id": c.cohort_id,
                    "proportion": c.proportion,
                    "upper_bounds": list(c.upper_bounds),
                    "arms": [_distribution_to_dict(a) for a in c.arms],
                }
                for c in config.cohorts
            ],
        },
        "volunteers": {"min": config.volunteers_min, "max": config.volunteers_max},
    }


def with_strategy(config: ExperimentConfig, strategy: StrategySpec) -> ExperimentConfig:
    """The same experiment under a different identification strategy."""
    return dataclasses.replace(config, strategy=strategy)
