"""Per-stage seed derivation.

Every stochastic stage gets its own generator, derived from the master seed
by XOR with a fixed stage tag, so stages can be re-run in isolation.
"""

import numpy as np

MASK64 = (1 << 64) - 1

SUBSAMPLE = 0x5B5A_4D50_4C45_0001
SPLIT = 0x5B5A_5350_4C49_0002
INJECT = 0x5B5A_494E_4A43_0003
SMOTE = 0x5B5A_534D_4F54_0004
FOLDS = 0x5B5A_464F_4C44_0005
MODEL = 0x5B5A_4D4F_4445_0006
SYNTH = 0x5B5A_5359_4E54_0007


def stage_seed(master_seed: int, tag: int) -> int:
    return (int(master_seed) ^ tag) & MASK64


def stage_rng(master_seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(stage_seed(master_seed, tag))


def trial_seed(master_seed: int, index: int) -> int:
    """Seed for the ``index``-th trial (grid combo, fold, tree...) under a master seed."""
    ss = np.random.SeedSequence([int(master_seed) & MASK64, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
