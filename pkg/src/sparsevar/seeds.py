"""Deterministic seed derivation.

Every stochastic stage of the pipeline receives its own seed derived from a
master seed through a 64-bit mix (splitmix64 finalizer), so that runs are
reproducible regardless of scheduling or parallelism.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(seed: int, *indices: int) -> int:
    """Derive a child seed from ``seed`` and one or more stream indices.

    The same (seed, indices) always yields the same child; distinct index
    tuples yield statistically independent streams.
    """
    z = seed & _MASK
    for idx in indices:
        z = (z ^ ((idx & _MASK) + _GAMMA)) & _MASK
        z = (z + _GAMMA) & _MASK
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & _MASK
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & _MASK
        z ^= z >> 31
    return z
