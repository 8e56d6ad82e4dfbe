"""Reproducible counter-based random streams.

Each (seed, replicate) pair owns an independent Philox 4x64 stream keyed
by the low 128 bits of SHA-256 over the string "{seed}:{replicate}".
Counter-based generation makes draws position-stable: the j-th variate
of a replicate is the same whether sampled alone, in a batch, or on a
different thread count, which is what the byte-identical-output
guarantees rest on.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, replicate: int) -> int:
    digest = hashlib.sha256(f"{seed}:{replicate}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def replicate_generator(seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, replicate)))


def uniform_block(seed: int, replicates: list[int], draws: int) -> np.ndarray:
    """Leading uniforms of many replicate streams, one row per replicate."""
    out = np.empty((len(replicates), draws), dtype=np.float64)
    for i, rep in enumerate(replicates):
        out[i] = replicate_generator(seed, rep).random(draws)
    return out
