"""Deterministic random-stream derivation.

Every stochastic component owns a generator derived from (base_seed, *key),
so adding individuals, replications or grid points never perturbs the
streams of earlier ones.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep derived streams for different purposes disjoint even when
# their numeric keys coincide.
COVARIATE_STREAM = 1
TRUTH_STREAM = 2
DATA_STREAM = 3
PRIOR_STREAM = 4
ANNEAL_STREAM = 5
REPLICATION_STREAM = 6
MASK_STREAM = 7


def derive_rng(base_seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (base_seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence((int(base_seed), *map(int, key))))


def derive_seed(base_seed: int, *key: int) -> int:
    """Collapse (base_seed, *key) to a single reproducible integer seed."""
    ss = np.random.SeedSequence((int(base_seed), *map(int, key)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
