"""Deterministic, splittable random streams.

Every random draw in the package flows from one master seed.  Independent
streams are derived with ``numpy.random.SeedSequence`` spawn keys so that
runs can be generated in any order (or in parallel) without changing the
result: the stream for (device 3, class 1, run 17) is a pure function of
the master seed and that path.

Path components are small non-negative integers.  The first component is a
domain constant so that, e.g., corpus generation and attack-run generation
never share a stream even for identical (device, class, run) indices.
"""

import numpy as np

# Stream domains.  Never renumber: serialized corpora depend on them.
DOMAIN_CORPUS = 0
DOMAIN_ATTACK = 1
DOMAIN_BATTERY = 2
DOMAIN_MODEL = 3
DOMAIN_DEFENSE = 4
DOMAIN_EXPLAIN = 5
DOMAIN_ADVERSARIAL = 6


def seed_sequence(master_seed, *path):
    """SeedSequence for the stream at ``path`` under ``master_seed``."""
    if any((not isinstance(p, (int, np.integer))) or p < 0 for p in path):
        raise ValueError(f"stream path must be non-negative integers, got {path!r}")
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))


def stream(master_seed, *path):
    """A fresh ``numpy.random.Generator`` for the stream at ``path``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))
