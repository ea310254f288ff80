"""
Counter-based noise streams.

Every path owns an independent Philox generator keyed by (seed, stream, path_index),
so the k-th variate of a path never depends on how paths are scheduled.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Sub-keys separating independent noise sources of one seed."""

    W = 0
    B = 1
    EXACT = 2


def path_generator(seed: int, stream: int, path_index: int) -> np.random.Generator:
    """
    Build the generator for one (seed, stream, path) key.

    Args:
        seed: Scenario seed (non-negative integer)
        stream: Stream id (see Stream)
        path_index: Global index of the path within the ensemble

    Returns:
        numpy Generator backed by Philox
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(path_index)))
    return np.random.Generator(np.random.Philox(seq))


def path_normals(seed: int, stream: int, path_index: int, steps: int, dim: int) -> np.ndarray:
    """Standard normals of shape (steps, dim) for one path."""
    return path_generator(seed, stream, path_index).standard_normal((steps, dim))


def block_normals(
    seed: int, stream: int, start: int, stop: int, steps: int, dim: int
) -> np.ndarray:
    """
    Standard normals for paths [start, stop).

    Returns:
        Array of shape (steps, stop - start, dim)
    """
    draws = np.empty((steps, stop - start, dim))
    for offset, path_index in enumerate(range(start, stop)):
        draws[:, offset, :] = path_normals(seed, stream, path_index, steps, dim)
    return draws
