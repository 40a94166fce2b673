"""Deterministic, splittable random number streams and sampling helpers.

All randomness in the library flows through `rng_split`, which maps a
(seed, stream_id) pair to an independent counter-based stream. Candidate
draws, problem generation, and direction vectors each get their own
stream so that parallel evaluation cannot change results.
"""

from __future__ import annotations

import numpy as np

from .types import Perturbation

# Reserved stream ids for infrastructure draws; per-candidate streams use
# small ids (iteration * slots + index) and must stay below this block.
STREAM_ALPHA_INIT = 2**62 + 1
STREAM_OMEGA_INIT = 2**62 + 2
STREAM_DIRECTIONS = 2**62 + 3
STREAM_PROBLEM_GEN = 2**62 + 16
STREAM_DATA_TRAIN = 2**62 + 17
STREAM_DATA_VAL = 2**62 + 18
STREAM_DATA_SHUFFLE = 2**62 + 19


def rng_split(seed: int, stream_id: int) -> np.random.Generator:
    """Return a reproducible generator for the given (seed, stream_id).

    Streams are backed by the counter-based Philox generator keyed on both
    integers, so the same pair always yields the same sequence and distinct
    pairs yield statistically independent sequences.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    if stream_id < 0 or stream_id >= 2**64:
        raise ValueError("stream_id must fit in an unsigned 64-bit integer")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_gaussian(rng: np.random.Generator, d: int) -> Perturbation:
    """Draw a d-dimensional standard normal perturbation."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    u = rng.standard_normal(d)
    return Perturbation.from_vector(u)


def sample_sphere(rng: np.random.Generator, d: int, radius: float) -> Perturbation:
    """Draw uniformly from the sphere of the given radius.

    Direction is a normalized Gaussian draw; the all-zero draw is resampled
    (probability is negligible but the branch must exist).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    while True:
        g = rng.standard_normal(d)
        norm = float(np.linalg.norm(g))
        if norm > 0.0:
            break
    # (g / norm) * radius keeps the d=1 case exactly at +-radius.
    u = (g / norm) * radius
    return Perturbation.from_vector(u)


def orthonormal_pair(rng: np.random.Generator, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw two random orthonormal direction vectors in dimension d >= 2."""
    if d < 2:
        raise ValueError("orthonormal pair needs dimension >= 2")
    while True:
        v1 = rng.standard_normal(d)
        n1 = float(np.linalg.norm(v1))
        if n1 > 0.0:
            v1 = v1 / n1
            break
    while True:
        g = rng.standard_normal(d)
        # Two Gram-Schmidt passes keep |<v1, v2>| at rounding level.
        g = g - np.dot(g, v1) * v1
        g = g - np.dot(g, v1) * v1
        n2 = float(np.linalg.norm(g))
        if n2 > 1e-8:
            return v1, g / n2
