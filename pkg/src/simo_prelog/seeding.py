"""Deterministic substream derivation for all Monte Carlo work.

Every random draw in the package comes from a counter-based generator
(Philox) keyed on a top-level seed plus a label path, e.g.
``substream(seed, "logdet", chunk_index)``.  Streams depend only on
their key, never on creation or evaluation order, so batched work can
be partitioned across workers without changing any result.
"""
import hashlib

import numpy as np

__all__ = ["substream", "complex_normal"]


def _key_word(part):
    """Map one path element to a stable 64-bit integer."""
    if isinstance(part, (bool, float)):
        raise TypeError(f"stream path elements must be int or str, got {part!r}")
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("integer path elements must be nonnegative")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream path elements must be int or str, got {part!r}")


def substream(seed, *path):
    """Return a Generator for the substream named by ``path`` under ``seed``.

    The same ``(seed, path)`` always yields an identical stream on any
    platform and in any process.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = tuple(_key_word(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng, *shape):
    """Draw i.i.d. standard circularly symmetric complex Gaussians.

    Unit total variance per entry: real and imaginary parts are
    independent N(0, 1/2).
    """
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.sqrt(2.0)
