"""Reproducible random streams.

Every replication owns a Philox (counter-based) stream keyed by a 64-bit
seed. Child seeds are derived with ``derive_seed(base, *keys)``: the keys
are fed to ``numpy.random.SeedSequence`` as entropy and two 32-bit words of
its output are packed into one 64-bit integer. Results therefore depend only
on (base seed, replication index), never on scheduling.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(base, *keys):
    words = [int(base) & _MASK64] + [int(k) & _MASK64 for k in keys]
    hi, lo = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def replication_seeds(base, count, *keys):
    return [derive_seed(base, *keys, i) for i in range(count)]


def generator(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) & _MASK64)))
