"""Counter-based random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Streams are Philox generators keyed by ``(seed, *path)`` so that any
sub-computation can be given its own reproducible stream independent of
how work is scheduled.
"""

import numpy as np


def stream(seed, *path):
    """Philox generator for the node ``path`` below ``seed``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(rng):
    """Draw a 63-bit seed from a generator, for handing off to ``stream``."""
    return int(rng.integers(0, 2**63 - 1))
