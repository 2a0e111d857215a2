"""Named sub-seed derivation so every random stream flows from one base seed."""
import zlib

import numpy as np


def subseed(base_seed: int, name: str) -> np.random.SeedSequence:
    """Deterministic seed sequence for the random stream called `name`."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.SeedSequence((int(base_seed) & 0xFFFFFFFFFFFFFFFF, tag))


def named_rng(base_seed: int, name: str) -> np.random.Generator:
    """Generator seeded from (base_seed, name); same pair, same stream."""
    return np.random.default_rng(subseed(base_seed, name))


def derived_seed(base_seed: int, name: str) -> int:
    """Integer seed derived from (base_seed, name), for nested components."""
    return int(subseed(base_seed, name).generate_state(1, np.uint64)[0])
