"""Named random substreams derived from a single root seed.

Every randomized routine in the package (fold shuffling, tree bootstraps,
SMO pair selection, trial synthesis) draws from a substream named after its
role, so a single root seed yields bit-reproducible results regardless of
which routines run or in what order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_words(names) -> list[int]:
    tag = hashlib.sha256("/".join(str(n) for n in names).encode("utf-8")).digest()
    return [int.from_bytes(tag[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *names) -> np.random.Generator:
    """Return a Generator for the substream of ``seed`` identified by ``names``."""
    entropy = [int(seed) & 0xFFFFFFFF] + _name_words(names)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *names) -> int:
    """Stable integer sub-seed for APIs that take a seed rather than a Generator."""
    words = _name_words(names)
    return (int(seed) ^ words[0] ^ (words[1] << 16)) & 0x7FFFFFFF
