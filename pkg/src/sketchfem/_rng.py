"""Deterministic random streams on top of the counter-based Philox generator.

Every stochastic routine in the package draws from a generator produced by
:func:`make_rng`.  The 128-bit Philox key is packed as

    word 0: the user seed (64 bits)
    word 1: stream id (low 32 bits) | retry attempt (high 32 bits)

so distinct (seed, stream, attempt) triples give statistically independent
streams and results are bit-reproducible across platforms and thread
schedules.  Stream 0 is the sketch sampler, stream 1 the field generator.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

STREAM_SKETCH = 0
STREAM_FIELD = 1


def make_rng(seed, stream=0, attempt=0):
    """Return a ``numpy.random.Generator`` for the given logical stream."""
    key = [int(seed) & _MASK64,
           (int(stream) & _MASK32) | ((int(attempt) & _MASK32) << 32)]
    return np.random.Generator(np.random.Philox(key=key))


def query_seed(base_seed, query_index):
    """Per-query seed: the run seed XOR the zero-based query index."""
    return (int(base_seed) ^ int(query_index)) & _MASK64
