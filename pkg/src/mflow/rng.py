"""Named random-number streams derived from a single master seed.

Every source of randomness in the library is a `numpy.random.Generator`
obtained from :func:`stream`. A stream is identified by a name (one of
``STREAMS``) plus optional integer indices (episode number, training step,
...), and is seeded with the tuple ``(master_seed, stream_id, *indices)``
fed to ``numpy.random.SeedSequence``. Two consequences:

* runs with the same master seed and config are bit-identical, and
* work units (episodes, training steps) can be generated independently or
  in parallel without consuming a shared stream, so results do not depend
  on scheduling order.
"""

import numpy as np

STREAMS = {
    "data": 0,   # demo generation, scene sampling
    "init": 1,   # parameter initialisation
    "train": 2,  # batch sampling, per-step noise draws
    "eval": 3,   # evaluation rollouts and sample draws
}


def stream(master_seed: int, name: str, *indices: int) -> np.random.Generator:
    """Return the generator for stream `name` under `master_seed`.

    Extra `indices` select a sub-stream, e.g. ``stream(seed, "eval", ep)``
    for episode `ep` or ``stream(seed, "train", step)`` for one training
    step. Each distinct tuple yields an independent generator.
    """
    if name not in STREAMS:
        raise ValueError(f"unknown stream {name!r}, expected one of {sorted(STREAMS)}")
    entropy = (int(master_seed), STREAMS[name]) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy))
