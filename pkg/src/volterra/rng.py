"""Counter-based random streams.

Every stochastic component draws from a Philox generator keyed by a master
seed plus integer purpose tags, so any individual stream can be reproduced
in isolation and results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import numpy as np

# Purpose tags (first spawn-key entry) for independent stream families.
TAG_INIT = 1       # network initialization
TAG_TRAIN = 2      # training-path simulation
TAG_EVAL = 3       # evaluation-path simulation
TAG_ORACLE = 4     # oracle-path simulation


def substream(seed: int | tuple, *tags: int) -> np.random.Generator:
    """Generator for the (seed, *tags) stream; same arguments, same stream."""
    if isinstance(seed, tuple):
        entropy, key = seed[0], tuple(seed[1:]) + tuple(tags)
    else:
        entropy, key = seed, tuple(tags)
    ss = np.random.SeedSequence(entropy=int(entropy),
                                spawn_key=tuple(int(t) for t in key))
    return np.random.Generator(np.random.Philox(ss))
