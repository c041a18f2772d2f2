"""Derived random streams.

Every stochastic block draws from its own generator, keyed by a tuple of
non-negative integers (master seed, cell indices, stream id) through
``numpy.random.SeedSequence``. Results therefore do not depend on execution
order or on how trials are spread across workers.
"""
from __future__ import annotations

import numpy as np

# Stream identifiers within one trial.
BITS = 0
TX_LASER = 1
LO_LASER = 2
CHANNEL = 3
RX_NOISE = 4
SYSTEM = 5


def derive_seed(*keys: int) -> int:
    """A 63-bit integer seed from a key tuple."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int(state[0]) << 31 ^ int(state[1])


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
