"""Deterministic named RNG substreams derived from a single run seed.

Every source of randomness in the package (weight init, shuffling, dropout,
synthetic data) pulls its generator from :func:`substream`, so a run is fully
reproducible from one integer seed and substream names are stable across
code reorderings.
"""

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) % (2**32)


def substream(seed: int, *path) -> np.random.Generator:
    """Return a Generator for the substream named by ``path`` under ``seed``.

    ``path`` elements may be strings or integers. The same (seed, path) pair
    always produces the same stream regardless of creation order.
    """
    key = tuple(_key_part(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed) % (2**63), spawn_key=key)
    return np.random.default_rng(ss)
