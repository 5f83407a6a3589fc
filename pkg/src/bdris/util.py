"""Shared numerics helpers: seeded RNG construction, complex Gaussian draws,
dB conversions."""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Build the library-wide random generator for a seed.

    Philox is counter-based with documented state, so a seed pins the whole
    stream; all random draws in the library go through this constructor.
    """
    return np.random.Generator(np.random.Philox(seed))


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)
