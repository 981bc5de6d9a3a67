"""Deterministic RNG derivation.

Every source of randomness in a run (init, minibatch order, subsampling,
bagging, per-candidate streams) is derived from one root seed plus a
fixed string label, so each component is independently reproducible.
"""

import hashlib

import numpy as np


def child_seed(root_seed: int, *labels) -> np.random.SeedSequence:
    """Derive a SeedSequence from a root seed and a label path.

    Labels may be strings or ints; the derivation is stable across runs
    and platforms (sha256 of the rendered label path).
    """
    digest = hashlib.sha256("/".join(str(x) for x in labels).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(root_seed)] + words)


def rng_for(root_seed: int, *labels) -> np.random.Generator:
    """A Generator seeded from `child_seed(root_seed, *labels)`."""
    return np.random.default_rng(child_seed(root_seed, *labels))
