"""Counter-based random number helpers.

Draws are pure functions of integer keys (seed, index, attempt, ...), so any
consumer gets identical numbers regardless of evaluation order, chunking or
worker count.  The mixer is SplitMix64, which passes BigCrush and is cheap to
vectorise with uint64 numpy ops.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_KEY_PRIMES = (
    np.uint64(0xD1B54A32D192ED03),
    np.uint64(0x8CB92BA72F3D8DD7),
    np.uint64(0xABC98388FB8FAC03),
    np.uint64(0x49D49D49D49D49D5),
)


def _splitmix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _as_u64(key):
    if isinstance(key, (int, np.integer)):
        return np.uint64(int(key) & 0xFFFFFFFFFFFFFFFF)
    return np.asarray(key).astype(np.int64).astype(np.uint64)


def hash_u64(*keys):
    """Mix integer keys (scalars or broadcastable arrays) into uint64 words."""
    acc = np.uint64(0)
    with np.errstate(over="ignore"):
        for i, key in enumerate(keys):
            k = _as_u64(key)
            acc = _splitmix64(acc ^ (k * _KEY_PRIMES[i % len(_KEY_PRIMES)] + np.uint64(i)))
    return acc


def hash_uniform(*keys):
    """Uniform draws in (0, 1), one per broadcast element of the keys."""
    bits = hash_u64(*keys) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * (2.0 ** -53)


def hash_normal(*keys):
    """Standard normal draws via Box-Muller on two decorrelated uniforms."""
    u1 = hash_uniform(*keys, 0)
    u2 = hash_uniform(*keys, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
