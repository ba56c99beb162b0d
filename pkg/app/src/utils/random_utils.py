"""Deterministic random streams derived from one root seed."""
import zlib

import numpy as np


def component_rng(root_seed: int, component: str) -> np.random.Generator:
    """Independent generator for a named component of a run.

    The same (root_seed, component) pair always yields the same stream, and
    different components never share one.
    """
    key = zlib.crc32(component.encode('utf-8'))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(root_seed), spawn_key=(key,)))


def chunk_seeds(rng: np.random.Generator, n_chunks: int) -> list:
    """Per-chunk child generators for sampling that is split into batches."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(
        int(rng.integers(0, 2**63 - 1))).spawn(n_chunks)]
