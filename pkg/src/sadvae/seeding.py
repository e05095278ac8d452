"""Deterministic RNG stream derivation.

Every stochastic component draws from its own named stream so that, e.g.,
the batch-shuffling order of a run does not depend on how much noise the
model consumed. Streams are derived from (seed, tag...) via SeedSequence,
which is stable and collision-resistant.
"""

import numpy as np

# Stream tags. Values are arbitrary but frozen: changing them changes every
# seeded result.
INIT = 1
DATA = 2
NOISE = 3
PERM = 4
SPLIT = 5
CLASSIFIER = 6
CALIBRATE = 7
SEARCH = 8
SYNTH = 9


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Return an independent generator for (seed, tags)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, tags)])))


def fisher_yates_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform permutation of range(n) by the classic in-place shuffle.

    Draws exactly n-1 integers from ``rng`` (``rng.integers(0, i + 1)`` for
    i = n-1 .. 1), so the consumed stream is fully documented.
    """
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm
