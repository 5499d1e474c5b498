"""Seed handling shared by the simulators and experiment harnesses.

Replicate ``i`` of a run with base seed ``s`` uses the generator seeded by
``SeedSequence(s, spawn_key=(i,))``, so replicate streams are independent
of each other and of the order in which replicates are executed.
"""

import numpy as np


def as_generator(random_state=None):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def replicate_rng(base_seed, index, *extra):
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(int(index), *map(int, extra))))
