"""Counter-based random number streams.

Each draw site asks for a generator keyed by (seed, stream, counter), so results
do not depend on call order or on which worker process runs the draw.
"""
import numpy as np

BOOTSTRAP_STREAM = 1
SHUFFLE_STREAM = 2
SYNTH_STREAM = 3


def generator(seed: int, stream: int, counter: int = 0) -> np.random.Generator:
    """Returns a Philox generator for one (seed, stream, counter) key.

    Args:
        seed: Master seed (any non-negative 64-bit integer).
        stream: Named stream, one of the ``*_STREAM`` constants.
        counter: Index within the stream, e.g. a bootstrap replicate number.

    Returns:
        A fresh numpy generator.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(counter)))
    return np.random.Generator(np.random.Philox(sequence))
