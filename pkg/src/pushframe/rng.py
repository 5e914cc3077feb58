"""Counter-based random streams keyed by (seed, purpose, time step, channel).

Each draw site gets its own Philox stream, so results do not depend on the
order in which time steps or channels are evaluated.
"""

import numpy as np

MASK64 = (1 << 64) - 1

SHOT_A = 1
SHOT_B = 2
READ = 3
JITTER = 4


def keyed_generator(seed: int, tag: int, t: int, channel: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & MASK64, int(tag) & MASK64], dtype=np.uint64)
    counter = np.array([0, 0, int(t) & MASK64, int(channel) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
