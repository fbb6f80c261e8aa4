"""Seeded random streams.

Every random quantity in the package is drawn from a Philox counter-based
generator. Parallel Monte Carlo replications get their own stream through

    child_seed = mix(master_seed, replication_index, kind_tag)

where ``mix`` is numpy's ``SeedSequence`` entropy hash. The same triple always
gives the same child seed, on any platform and in any execution order.
"""

from __future__ import annotations

import numpy as np

KIND_TAGS = {
    "gaussian": 1,
    "hadamard": 2,
    "clarkson_woodruff": 3,
    "uniform": 4,
    "leverage_aware": 5,
}

_MASK64 = (1 << 64) - 1


def mix(*words: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit seed."""
    entropy = [int(w) & _MASK64 for w in words]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def child_seed(master_seed: int, replication: int, kind: str | int) -> int:
    tag = KIND_TAGS[kind] if isinstance(kind, str) else int(kind)
    return mix(master_seed, replication, tag)


def generator(seed: int) -> np.random.Generator:
    """Philox generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))
