"""Deterministic seed derivation.

All randomness in the toolkit funnels through one master seed. Child seeds are
derived from (root, *parts) so that adding a new consumer (a policy, a trial)
never perturbs the streams of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF


def name_key(name: str) -> int:
    """Stable 32-bit key for a string (sha256-based, platform independent)."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:4], "big")


def derive_seed(root: int, *parts: int | str) -> int:
    """Derive a 64-bit child seed from a root seed and a key path.

    Parts may be non-negative ints or strings; strings are hashed with
    `name_key`. The derivation uses numpy's SeedSequence spawn keys, so
    distinct paths give statistically independent streams.
    """
    key = tuple(
        (name_key(p) if isinstance(p, str) else int(p)) & _MASK32 for p in parts
    )
    ss = np.random.SeedSequence(entropy=int(root) & _MASK64, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])
