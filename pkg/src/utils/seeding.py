"""Deterministic seed derivation

Every random stream in the system is derived from the run seed plus a stream
tag and indices, so any epoch, worker or episode can be regenerated without
carrying generator state around.
"""

import numpy as np

# Stream tags
NETWORK_INIT_STREAM = 1
ROLLOUT_STREAM = 4
SHUFFLE_STREAM = 5
EVALUATION_STREAM = 6
EXPORT_STREAM = 7


def derive_seed(base_seed, *keys):
    """Derive a 63-bit integer seed from a base seed and integer keys"""
    sequence = np.random.SeedSequence([int(base_seed)] + [int(k) for k in keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_rng(base_seed, *keys):
    """Create a numpy Generator for the stream identified by (base_seed, keys)"""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed)] + [int(k) for k in keys]))
