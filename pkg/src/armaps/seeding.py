"""Named random streams derived from a single run seed.

``stream(seed, name)`` builds ``SeedSequence([seed, STREAMS[name]])``; every
consumer of randomness draws from its own named stream so adding draws in one
place never shifts another.
"""
import numpy as np

STREAMS = {"split": 0, "init": 1, "augment": 2, "shuffle": 3, "data": 4}


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name]]))
