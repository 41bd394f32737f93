"""Deterministic counter-based random streams.

Every random draw in the package flows from one root seed through Philox
substreams keyed by (seed, purpose, index, ...).  Streams with distinct keys
are independent, so parallel and sequential execution of the same draws
produce identical results.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _token(part: int | str) -> int:
    if isinstance(part, str):
        digest = hashlib.blake2s(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return int(part) & _MASK64


def substream(root_seed: int, *path: int | str) -> np.random.Generator:
    """Return an independent generator keyed by (root_seed, *path)."""
    entropy = [_token(root_seed)] + [_token(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(root_seed: int, *path: int | str) -> int:
    """Collapse (root_seed, *path) into a stable 64-bit seed."""
    entropy = [_token(root_seed)] + [_token(p) for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
