"""Deterministic counter-based RNG streams.

Every random draw in the environment/learning stack comes from a Philox
generator keyed by a structured tuple (seed, purpose, counters...), never
from shared sequential state.  Identical keys give identical streams, which
is what makes batch composition irrelevant to a single env's trajectory and
lets independently-written loops (DAgger vs iterative BC) consume identical
randomness.
"""
from __future__ import annotations

import numpy as np

# purpose tags
EPISODE_INIT = 1
PHYSICS_PARAMS = 2
OBS_NOISE = 3
POLICY_SAMPLE = 4
MIXING = 5
TRAIN_SHUFFLE = 6
PARAM_INIT = 7
EVAL = 8
AUGMENT_EPISODE = 9


def stream(*key) -> np.random.Generator:
    """Philox generator for a structured integer key."""
    flat = tuple(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flat)))
