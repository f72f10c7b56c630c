import numpy as np

# stream tags; every consumer draws from its own stream so that adding draws
# in one place never shifts another
POSITIONS = 1
CHANNELS = 2
PASSIVE_INIT = 3
SCA_INIT = 4


def stream(seed, tag, *key):
    """Independent generator for ``(seed, tag, *key)``."""
    seq = np.random.SeedSequence([int(seed), int(tag), *(int(k) for k in key)])
    return np.random.default_rng(seq)
