"""Hot kernels for batched noisy-CVaR scoring.

Each farmer scores every arm by reweighting the arm's sorted reward history
with fresh Dirichlet(1, ..., 1) weights and taking a noisy empirical CVaR,
then picks the argmax with uniform random tie-breaking. With batch sizes in
the tens, seasons in the hundreds and histories in the thousands this loop
dominates campaign runtime, so it is compiled with numba. A pure-numpy
fallback implements the exact same operation order (sequential cumulative
sums, identical threshold comparisons and tie-break arithmetic), so both
backends produce bit-identical trajectories.

Backend selection: the ``RISKBANDIT_KERNEL`` environment variable may be set
to ``numba``, ``numpy`` or ``auto`` (default: numba when importable).

Randomness is injected, not generated here: Dirichlet(1, ..., 1) weights are
standard exponentials normalized by their sum, so callers pass a matrix of
Exp(1) draws plus one tie-break uniform per farmer. The prefix rule works on
unnormalized cumulative sums compared against ``alpha * total``, which is
algebraically the normalized rule and keeps ``alpha = 1`` exact (the full
prefix always qualifies).
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError

__all__ = [
    "active_backend",
    "available_backends",
    "bcb_batch_choose",
]

_BACKEND_ENV = "RISKBANDIT_KERNEL"

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but the
    _HAVE_NUMBA = False  # numpy path must stay importable without it


def _resolve_backend() -> str:
    mode = os.environ.get(_BACKEND_ENV, "auto").strip().lower()
    if mode not in ("auto", "numba", "numpy"):
        raise ConfigError(f"{_BACKEND_ENV} must be one of auto|numba|numpy, got {mode!r}")
    if mode == "numpy":
        return "numpy"
    if _HAVE_NUMBA:
        return "numba"
    if mode == "numba":
        raise ConfigError("RISKBANDIT_KERNEL=numba but numba is not importable")
    return "numpy"


_ACTIVE = _resolve_backend()


def active_backend() -> str:
    """Backend used by :func:`bcb_batch_choose` when none is forced."""
    return _ACTIVE


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _choose_numba(values, offsets, alpha, expo, tie_u, choices, scores):
        n_farmers = expo.shape[0]
        n_arms = offsets.shape[0] - 1
        for f in range(n_farmers):
            for k in range(n_arms):
                a = offsets[k]
                b = offsets[k + 1]
                total = 0.0
                for i in range(a, b):
                    total += expo[f, i]
                thr = alpha * total
                # j = largest prefix length whose cumulative weight stays <= thr;
                # prefixes are non-decreasing, so stop at the first overshoot.
                j = 0
                prefix = 0.0
                weighted = 0.0
                prev_prefix = 0.0
                prev_weighted = 0.0
                for i in range(a, b):
                    step = prefix + expo[f, i]
                    if step <= thr:
                        prev_prefix = prefix
                        prev_weighted = weighted
                        prefix = step
                        weighted = weighted + expo[f, i] * values[i]
                        j += 1
                    else:
                        break
                if j < 1:
                    j = 1
                x_j = values[a + j - 1]
                if j >= 2 and thr > 0.0:
                    pen = (x_j * prev_prefix - prev_weighted) / thr
                    if pen < 0.0:
                        pen = 0.0
                else:
                    pen = 0.0
                scores[f, k] = x_j - pen
            best = scores[f, 0]
            for k in range(1, n_arms):
                if scores[f, k] > best:
                    best = scores[f, k]
            ties = 0
            for k in range(n_arms):
                if scores[f, k] == best:
                    ties += 1
            kth = int(tie_u[f] * ties)
            if kth > ties - 1:
                kth = ties - 1
            seen = 0
            for k in range(n_arms):
                if scores[f, k] == best:
                    if seen == kth:
                        choices[f] = k
                        break
                    seen += 1
        return choices


def _choose_numpy(values, offsets, alpha, expo, tie_u, choices, scores):
    n_farmers = expo.shape[0]
    n_arms = offsets.shape[0] - 1
    for k in range(n_arms):
        a, b = offsets[k], offsets[k + 1]
        x = values[a:b]
        seg = expo[:, a:b]
        cum = np.cumsum(seg, axis=1)
        thr = alpha * cum[:, -1]
        j = (cum <= thr[:, None]).sum(axis=1)
        np.maximum(j, 1, out=j)
        weighted = np.cumsum(seg * x[None, :], axis=1)
        x_j = x[j - 1]
        prev = np.maximum(j - 2, 0)[:, None]
        prev_prefix = np.take_along_axis(cum, prev, axis=1)[:, 0]
        prev_weighted = np.take_along_axis(weighted, prev, axis=1)[:, 0]
        pen = np.zeros(n_farmers)
        live = (j >= 2) & (thr > 0.0)
        pen[live] = np.maximum((x_j[live] * prev_prefix[live] - prev_weighted[live]) / thr[live], 0.0)
        scores[:, k] = x_j - pen
    best = scores.max(axis=1)
    tie_mask = scores == best[:, None]
    ties = tie_mask.sum(axis=1)
    kth = np.minimum((tie_u * ties).astype(np.int64), ties - 1)
    rank = np.cumsum(tie_mask, axis=1) - 1
    choices[:] = (tie_mask & (rank == kth[:, None])).argmax(axis=1)
    return choices


def bcb_batch_choose(
    values: np.ndarray,
    offsets: np.ndarray,
    alpha: float,
    expo: np.ndarray,
    tie_u: np.ndarray,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Score every (farmer, arm) pair and pick one arm per farmer.

    ``values`` holds the per-arm sorted histories concatenated, delimited by
    ``offsets`` (length ``n_arms + 1``); ``expo`` is an Exp(1) matrix of shape
    ``(n_farmers, len(values))``; ``tie_u`` one uniform per farmer. Returns
    ``(choices, scores)`` with shapes ``(n_farmers,)`` and
    ``(n_farmers, n_arms)``.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    expo = np.ascontiguousarray(expo, dtype=np.float64)
    tie_u = np.ascontiguousarray(tie_u, dtype=np.float64)
    n_farmers = expo.shape[0]
    n_arms = offsets.size - 1
    if n_arms < 1 or offsets[0] != 0 or offsets[-1] != values.size:
        raise ValueError("offsets must start at 0 and end at len(values)")
    if np.any(np.diff(offsets) < 1):
        raise ValueError("every arm needs a non-empty history")
    if expo.shape[1] != values.size or tie_u.shape != (n_farmers,):
        raise ValueError("expo/tie_u shapes do not match values/offsets")

    choices = np.empty(n_farmers, dtype=np.int64)
    scores = np.empty((n_farmers, n_arms), dtype=np.float64)
    which = backend or _ACTIVE
    if which == "numba":
        if not _HAVE_NUMBA:
            raise ConfigError("numba backend requested but numba is not importable")
        _choose_numba(values, offsets, alpha, expo, tie_u, choices, scores)
    elif which == "numpy":
        _choose_numpy(values, offsets, alpha, expo, tie_u, choices, scores)
    else:
        raise ConfigError(f"unknown kernel backend {which!r}")
    return choices, scores
