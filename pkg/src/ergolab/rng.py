"""Seeded, splittable random streams.

Every random quantity in the package comes from a Philox (counter-based)
bit generator keyed by a :class:`numpy.random.SeedSequence`. Trial ``t`` of an
experiment with master seed ``m`` uses the stream keyed by ``(m, t)``, so the
result of a trial does not depend on which worker ran it or in which order.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def generator(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for ``seed`` (optionally split further by ``key``)."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed of trial ``trial`` derived from ``master_seed``.

    The derived value is itself a valid path seed, which lets a single trial
    be replayed with :func:`ergolab.random_model.sample_selectors`.
    """
    ss = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    return [trial_seed(master_seed, t) for t in range(trials)]
