"""Reproducible random streams.

Every stochastic routine draws from a Philox-4x64 generator (a counter-based
64-bit bit generator) keyed by ``SeedSequence(seed, spawn_key=stream_id)``.
The key derivation is platform independent, so a given ``(seed, stream_id)``
pair yields the same numbers everywhere, and distinct stream ids give
independent streams that can be consumed in any order or in parallel.
"""

import numpy as np
from scipy.special import ndtri


def stream(seed, *stream_id):
    """Return the generator for ``(seed, stream_id)``."""
    if seed is None:
        raise ValueError("a seed is required")
    key = tuple(int(i) for i in stream_id)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def uniforms(rng, size):
    # open interval (0, 1): ndtri(0) would be -inf
    u = rng.random(size)
    return np.where(u == 0.0, np.nextafter(0.0, 1.0), u)


def standard_normals(rng, size):
    """Gaussian draws by inverse-CDF of uniforms."""
    return ndtri(uniforms(rng, size))


def level_key(x):
    """Integer stream-id component for a real parameter such as a level."""
    return int(round(float(x) * 1_000_000))
