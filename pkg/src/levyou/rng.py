"""Deterministic seed derivation for named substreams.

A master seed plus a text label is hashed (SHA-256) into generator entropy, so
every replica of every experiment gets an independent, reproducible stream that
does not depend on Python's per-process hash randomization or on the order in
which streams are created.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_entropy(master_seed: int, label: str) -> list[int]:
    """Hash (master_seed, label) into eight 32-bit entropy words."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]


def substream(master_seed: int, label: str) -> np.random.Generator:
    """Independent generator for the given label."""
    return np.random.default_rng(np.random.SeedSequence(derive_entropy(master_seed, label)))


def derive_seed(master_seed: int, label: str) -> int:
    """64-bit integer seed for APIs that take a plain seed (e.g. path simulation)."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def replica_seed(master_seed: int, name: str, index: int) -> int:
    """Seed for replica `index` of the ensemble `name`."""
    return derive_seed(master_seed, f"{name}/{index}")
