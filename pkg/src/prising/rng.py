"""Seed plumbing shared by samplers and the experiment harness."""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def stream(seed, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under a master ``seed``.

    The key is mixed in as a SeedSequence spawn key, so streams for
    different keys are statistically independent and do not depend on
    the order in which they are requested.
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive keyed streams from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy,
                                    spawn_key=tuple(seed.spawn_key) + tuple(key))
    else:
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
