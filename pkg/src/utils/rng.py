import numpy as np
import torch


def derive_seed(*parts):
    """Mix integer parts (seed, round, purpose...) into one 63-bit seed."""
    seq = np.random.SeedSequence([int(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0]) >> 1


def torch_generator(*parts):
    g = torch.Generator()
    g.manual_seed(derive_seed(*parts))
    return g


def numpy_rng(*parts):
    return np.random.default_rng(derive_seed(*parts))


# Purpose tags, so streams for different jobs in the same round never coincide.
GEN_VARY = 1
GEN_DISC = 2
REAL_VARY = 3
REAL_EVAL = 4
FAKE_EVAL = 5
REAL_DISC = 6
METRICS = 7
MLE = 8
SAMPLE = 9
