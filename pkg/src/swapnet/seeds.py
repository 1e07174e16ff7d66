"""Deterministic sub-seed derivation for multi-run experiments.

Child seeds are 63-bit integers hashed from the master seed and a list
of textual parts, so runs are reproducible, order-independent, and
uncorrelated across indices without coordination.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(master: int, *parts) -> int:
    """Hash (master, parts...) into a stable 63-bit seed."""
    text = repr((int(master),) + tuple(str(p) for p in parts))
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
