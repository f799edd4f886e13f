"""Per-replicate random streams.

Every replicate draws from its own stream keyed by ``(seed, replicate)``, so a
batch gives identical numbers whether it runs in one process or many.
"""
from __future__ import annotations

import numpy as np


def replicate_seedseq(seed: int, replicate: int, *purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(replicate),) + tuple(int(part) for part in purpose))


def replicate_rng(seed: int, replicate: int, *purpose: int) -> np.random.Generator:
    """Generator for replicate ``replicate`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(replicate_seedseq(seed, replicate, *purpose)))


def replicate_seeds32(seed: int, start: int, stop: int, *purpose: int) -> np.ndarray:
    """uint32 seeds for the numba kernels, one per replicate in ``[start, stop)``."""
    return np.array(
        [replicate_seedseq(seed, rep, *purpose).generate_state(1, np.uint32)[0] for rep in range(start, stop)],
        dtype=np.int64,
    )

