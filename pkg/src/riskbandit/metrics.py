"""Risk measures and agronomic indicators.

Pure functions: empirical VaR/CVaR of a sample, exact CVaR of a finite
discrete law, distribution-free CVaR confidence intervals on bounded
support, and the yield-based efficiency indicators used as reward signals.

Conventions. Rewards are gains (larger is better); the CVaR at level
``alpha`` in (0, 1] is the mean of the lower-``alpha`` tail, so ``alpha = 1``
recovers the plain mean. The empirical quantile of level ``alpha`` is the
``ceil(alpha * n)``-th order statistic (1-based) of the sorted sample, with
no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "YieldRecord",
    "agronomic_efficiency",
    "yield_excess",
    "empirical_var",
    "empirical_cvar",
    "true_cvar_finite",
    "cvar_confidence_interval",
]


@dataclass(frozen=True)
class YieldRecord:
    """One season's yields for a practice, its control, and nitrogen input.

    ``yield_pi`` and ``yield_0`` are crop yields (kg/ha) with and without
    the practice, ``n_applied`` is nitrogen applied (kg N/ha) and
    ``ane_ref`` the reference efficiency (kg grain / kg N).
    """

    yield_pi: float
    yield_0: float
    n_applied: float
    ane_ref: float = 15.0

    def __post_init__(self):
        for name in ("yield_pi", "yield_0", "n_applied", "ane_ref"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.n_applied < 0:
            raise DomainError("n_applied must be >= 0")
        if self.ane_ref <= 0:
            raise DomainError("ane_ref must be > 0")


def agronomic_efficiency(rec: YieldRecord) -> float:
    """Yield gain over the control per unit of nitrogen applied."""
    if rec.n_applied == 0:
        raise DomainError("efficiency undefined for zero nitrogen")
    return (rec.yield_pi - rec.yield_0) / rec.n_applied


def yield_excess(rec: YieldRecord) -> float:
    """Yield gain penalized by the nitrogen input at the reference efficiency.

    Computed additively as ``(yield_pi - yield_0) - n_applied * ane_ref``,
    which stays defined when ``n_applied`` is zero; whenever the efficiency
    is defined it equals ``gain * (1 - ane_ref / efficiency)``.
    """
    return (rec.yield_pi - rec.yield_0) - rec.n_applied * rec.ane_ref


def _as_sample(sample) -> np.ndarray:
    values = np.asarray(sample, dtype=np.float64)
    if values.ndim != 1:
        values = values.reshape(-1)
    if values.size == 0:
        raise DomainError("sample must be non-empty")
    if not np.all(np.isfinite(values)):
        raise DomainError("sample values must be finite")
    return values


def _check_level(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError("alpha must lie in (0,1]")
    return alpha


def _quantile_index(alpha: float, n: int) -> int:
    """1-based rank of the level-``alpha`` empirical quantile."""
    return min(max(math.ceil(alpha * n), 1), n)


def empirical_var(sample, alpha: float) -> float:
    """Empirical value-at-risk: the ``ceil(alpha*n)``-th smallest value."""
    alpha = _check_level(alpha)
    values = np.sort(_as_sample(sample))
    return float(values[_quantile_index(alpha, values.size) - 1])


def empirical_cvar(sample, alpha: float) -> float:
    """Empirical CVaR: ``q - (1/(n*alpha)) * sum(max(q - y_i, 0))``.

    ``q`` is :func:`empirical_var` of the sample at the same level. The
    input is copied, never mutated, and its order is irrelevant.
    """
    alpha = _check_level(alpha)
    values = np.sort(_as_sample(sample))
    n = values.size
    q = float(values[_quantile_index(alpha, n) - 1])
    shortfall = float(np.maximum(q - values, 0.0).sum())
    return q - shortfall / (n * alpha)


def _sorted_cvar(values: np.ndarray, alpha: float) -> float:
    """CVaR of an already-sorted, validated sample (internal fast path)."""
    n = values.size
    q = float(values[_quantile_index(alpha, n) - 1])
    m = _quantile_index(alpha, n)
    shortfall = q * (m - 1) - float(values[: m - 1].sum()) if m > 1 else 0.0
    return q - shortfall / (n * alpha)


def true_cvar_finite(values, probabilities, alpha: float) -> float:
    """Exact CVaR of a finite discrete law.

    The lower-``alpha`` tail is averaged with the boundary atom weighted
    fractionally so the tail mass is exactly ``alpha``. Probabilities must
    be non-negative and sum to 1 within 1e-12.
    """
    alpha = _check_level(alpha)
    atoms = np.asarray(values, dtype=np.float64).reshape(-1)
    probs = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    if atoms.size == 0 or atoms.shape != probs.shape:
        raise DomainError("values and probabilities must be equal-length and non-empty")
    if not np.all(np.isfinite(atoms)):
        raise DomainError("atoms must be finite")
    if np.any(probs < 0):
        raise DomainError("probabilities must be >= 0")
    if abs(float(probs.sum()) - 1.0) > 1e-12:
        raise DomainError(f"probabilities must sum to 1, got {float(probs.sum())!r}")

    order = np.argsort(atoms, kind="stable")
    atoms = atoms[order]
    probs = probs[order]
    cum = np.cumsum(probs)
    prev = np.concatenate(([0.0], cum[:-1]))
    tail = np.clip(np.minimum(cum, alpha) - np.minimum(prev, alpha), 0.0, None)
    return float(np.dot(atoms, tail) / alpha)


def _quantile_integral(sorted_values: np.ndarray, a: float, b: float) -> float:
    """Integral of the empirical quantile function over [a, b] within [0, 1].

    The empirical quantile function is the step function taking value
    ``y_i`` on ``((i-1)/n, i/n]``.
    """
    if b <= a:
        return 0.0
    n = sorted_values.size
    edges = np.arange(n + 1, dtype=np.float64) / n
    overlap = np.clip(np.minimum(b, edges[1:]) - np.maximum(a, edges[:-1]), 0.0, None)
    return float(np.dot(sorted_values, overlap))


def cvar_confidence_interval(
    sample,
    alpha: float,
    delta: float,
    support: tuple[float, float],
) -> tuple[float, float]:
    """Distribution-free CVaR confidence interval on bounded support.

    Shifts the empirical CDF up and down by the two-sided DKW band
    ``eps = sqrt(log(2/delta) / (2n))`` and integrates the implied quantile
    envelopes over [0, alpha], padding with the declared support bounds
    where the band leaves [0, 1]. The interval contains the empirical CVaR
    and holds with probability at least ``1 - delta``; its width shrinks
    as O(sqrt(log(1/delta)/n)).
    """
    alpha = _check_level(alpha)
    delta = float(delta)
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must lie in (0,1)")
    lo, hi = float(support[0]), float(support[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise DomainError("support bounds must be finite with lo <= hi")
    values = np.sort(_as_sample(sample))
    if values[0] < lo or values[-1] > hi:
        raise DomainError(
            f"sample violates declared support [{lo}, {hi}]: "
            f"observed range [{values[0]}, {values[-1]}]"
        )
    n = values.size
    eps = math.sqrt(math.log(2.0 / delta) / (2.0 * n))

    if alpha <= eps:
        lower = lo
    else:
        lower = (eps * lo + _quantile_integral(values, 0.0, alpha - eps)) / alpha
    over = max(alpha + eps - 1.0, 0.0)
    upper = (_quantile_integral(values, min(eps, 1.0), min(alpha + eps, 1.0)) + over * hi) / alpha
    return max(lower, lo), min(upper, hi)
