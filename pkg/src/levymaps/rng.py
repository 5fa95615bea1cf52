"""Seeded counter-based generators and per-replica stream trees."""

import numpy as np


def make_rng(seed=None, *stream):
    """Philox generator for ``seed`` and an optional stream path.

    ``make_rng(7, 2, 1)`` is the generator of replica 2, stage 1 of a run
    seeded with 7; two different stream paths never share state.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def stream_id(seed, *stream):
    return f"{seed}/" + "/".join(str(int(s)) for s in stream)
