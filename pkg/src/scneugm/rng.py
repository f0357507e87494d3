"""Named, counter-keyed random streams derived from one master seed.

A stream is identified by ``(seed, name, *counters)``; the same key always
yields the same generator, independent of what other streams were drawn.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("topology", "backoff", "decode", "mobility", "es", "batch", "bucket",
           "init", "sample", "pg", "eval")


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode())


def stream(seed: int, name: str, *counters: int) -> np.random.Generator:
    """Generator for the named stream, optionally keyed by integer counters."""
    key = [int(seed) & 0xFFFFFFFF, _name_key(name), *(int(c) for c in counters)]
    return np.random.default_rng(np.random.SeedSequence(key))


def child_seed(seed: int, name: str, *counters: int) -> int:
    """Derive a plain integer seed for handing to another seeded API."""
    return int(stream(seed, name, *counters).integers(0, 2**31 - 1))


STAGE_IDS = {"embed": 0, "predictors": 1, "dhf": 2, "es": 3, "pg": 4, "eval": 5, "grid": 6}


def topology_seed(seed: int, stage: str, step: int) -> int:
    """Seed of the fresh network drawn at ``step`` of a training stage."""
    return int(stream(seed, "topology", STAGE_IDS[stage], step).integers(2**31))
