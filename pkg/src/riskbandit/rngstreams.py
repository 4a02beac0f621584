"""Keyed, splittable random streams.

Every source of randomness in a campaign is a PCG64 generator derived from
``(master_seed, *key)`` through :class:`numpy.random.SeedSequence`, so the
same key always yields the same stream no matter which thread, process or
call order touches it first.
"""

from __future__ import annotations

import numpy as np

# Role tags used as stream-key components.
ROLE_ENVIRONMENT = 0
ROLE_POLICY = 1
ROLE_VOLUNTEER = 2

# Fixed salt for Monte-Carlo evaluation of true CVaRs, so the "ground truth"
# of a given environment does not move with the experiment's master seed.
TRUE_CVAR_SALT = 0x5EED_CAFE


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(master_seed, *key)``.

    All key components must be non-negative integers.
    """
    parts = (master_seed,) + key
    for part in parts:
        if part < 0:
            raise ValueError(f"stream key components must be >= 0, got {parts}")
    return np.random.default_rng(np.random.SeedSequence(list(parts)))
