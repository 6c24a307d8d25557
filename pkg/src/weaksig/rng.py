"""Deterministic random substreams keyed by (seed, replicate, purpose)."""

from __future__ import annotations

import numpy as np

TAG_DATA = 0
TAG_BOOTSTRAP = 1
TAG_ORACLE = 2


def substream(seed: int, replicate: int, tag: int) -> np.random.SeedSequence:
    """Independent seed sequence for one replicate and purpose.

    The stream depends only on its key, so replicates can run in any order
    or in parallel and still reproduce bit-identical draws.
    """
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), int(tag)))


def generator(seed: int, replicate: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(substream(seed, replicate, tag))
