"""Seeded random streams.

Every random draw in :mod:`gepbench` comes from a :class:`Rng` built from an
explicit 64-bit seed, so results are a pure function of the configuration.

Algorithm
=========

An :class:`Rng` is numpy's PCG64 bit generator seeded through
:class:`numpy.random.SeedSequence`::

    Rng(seed) == numpy.random.Generator(numpy.random.PCG64(numpy.random.SeedSequence(seed)))

Child seeds are derived by :func:`split`, which hashes the parent seed
together with a *spawn key* (a tuple of non-negative integers) and takes the
first 64 bits of the resulting state::

    split(seed, *path) == int(SeedSequence(seed, spawn_key=path).generate_state(1, np.uint64)[0])

A child seed depends only on ``(seed, path)``, never on how many draws the
parent has made, so children are independent of the parent's continuation and
of scheduling order. :func:`stream` derives a child seed from a readable
stream name by using the CRC-32 of the name as the spawn key.

- :py:class:`Rng`
- :py:meth:`split`
- :py:meth:`stream`
"""

import zlib

import numpy as np


SEED_MAX = 2**64 - 1


def _check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed > SEED_MAX:
        raise ValueError(f"Seed {seed} is not a 64-bit unsigned integer.")
    return seed


def split(seed, *path):
    """Derive a child seed.

    Parameters
    ----------
    seed : int
        Parent seed.
    *path : int
        Spawn key. Must be non-negative integers.

    Returns
    -------
    child : int
        A 64-bit unsigned seed.
    """
    seed = _check_seed(seed)
    key = tuple(int(p) for p in path)
    if any(p < 0 for p in key):
        raise ValueError(f"Spawn key {key} must be non-negative.")
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed, name, *path):
    """Derive a child seed for a named purpose.

    Parameters
    ----------
    seed : int
        Parent seed.
    name : str
        Name of the stream, e.g. "source" or "corruption:additive_noise".
    *path : int
        Further spawn key entries appended after the name.

    Returns
    -------
    child : int
    """
    return split(seed, zlib.crc32(name.encode("utf-8")), *path)


class Rng:
    """A seeded PCG64 generator that knows its seed.

    All drawing methods of :class:`numpy.random.Generator` (`normal`,
    `uniform`, `integers`, `choice`, `permutation`, ...) are available
    directly on the instance.

    Parameters
    ----------
    seed : int
        64-bit unsigned seed.
    """

    def __init__(self, seed):
        self.seed = _check_seed(seed)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed))
        )

    def __getattr__(self, name):
        # Only called for attributes not found on the instance
        if name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def split(self, *path):
        """Child generator for the given spawn key."""
        return Rng(split(self.seed, *path))

    def stream(self, name, *path):
        """Child generator for a named stream."""
        return Rng(stream(self.seed, name, *path))

    def __repr__(self):
        return f"Rng(seed={self.seed})"
