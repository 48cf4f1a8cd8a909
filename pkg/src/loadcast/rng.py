"""Seeded, splittable random-number generation.

Every stochastic component (weight init, dropout, shuffling, synthetic data)
draws from a generator derived from one root seed, so runs are
bit-reproducible. Splitting uses numpy's ``SeedSequence.spawn`` with the
PCG64 bit generator — a modern small-state splittable PRNG.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "split_rng"]


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for a run. ``seed`` must be an explicit integer."""
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int, got {type(seed).__name__}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from ``rng``.

    Children are a deterministic function of the parent's current state;
    the parent advances once per call.
    """
    seeds = rng.integers(0, 2**63 - 1, size=n)
    return [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
