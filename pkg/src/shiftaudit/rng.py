"""Deterministic random-stream management.

All sampling in this package goes through named Philox substreams. Philox is
a counter-based 64-bit generator, so distinct (seed, stream, index) keys give
statistically independent streams and results never depend on the order in
which streams are consumed. This is what makes parallel execution reproduce
serial results exactly.
"""

from __future__ import annotations

import numpy as np

# Fixed stream identifiers. New streams must be appended, never renumbered,
# or previously published seeds would generate different data.
STREAM_U = 0          # latent mixture component
STREAM_A = 1          # subgroup assignment
STREAM_X = 2          # covariates
STREAM_Y = 3          # labels
STREAM_S = 4          # selection flags
STREAM_FOLDS = 5      # cross-validation fold shuffling
STREAM_BOOTSTRAP = 6  # bootstrap replicate draws
STREAM_CHUNK = 7      # rejection-sampling chunk sequence


def substream(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Return a Generator for the (seed, stream, *extra) key.

    ``extra`` indexes replicates or chunks within a stream; e.g. bootstrap
    replicate ``r`` uses ``substream(seed, STREAM_BOOTSTRAP, r)`` so replicate
    draws are reproducible independently of execution order.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, *extra))
    return np.random.Generator(np.random.Philox(ss))
