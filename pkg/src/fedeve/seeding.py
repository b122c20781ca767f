"""Stable seed derivation so every random stream is independent of execution order."""

import numpy as np

# stream tags keep e.g. sampling and client training from sharing seeds
SAMPLE = 1
CLIENT = 2
VIEW = 3


def derive_seed(*keys: int) -> int:
    """Map a tuple of non-negative integers to a 63-bit seed."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])
