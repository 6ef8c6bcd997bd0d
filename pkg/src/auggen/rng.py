"""Named deterministic random streams.

Every stochastic operation in this package draws from a stream addressed by
a path of labels, e.g. ``stream(seed, "gen", epoch, candidate)``. Distinct
paths give statistically independent generators, so parallel consumers
(per-candidate generation, per-regime runs) never contend for shared state
and results do not depend on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _entropy(part: int | str) -> int:
    if isinstance(part, bool) or not isinstance(part, (int, str)):
        raise TypeError(f"stream path parts must be int or str, got {part!r}")
    if isinstance(part, int):
        return part & _MASK64
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(*path: int | str) -> np.random.Generator:
    """Return a PCG64 generator keyed by ``path``."""
    if not path:
        raise ValueError("stream path must not be empty")
    return np.random.default_rng([_entropy(part) for part in path])
