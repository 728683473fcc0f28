"""Named, counter-based random substreams.

Every random quantity of a trial comes from its own Philox stream keyed by
``(master seed, trial, role[, extra...])``. Streams are therefore
independent of thread scheduling and of how many numbers other roles
consume, which also gives common random numbers across scenarios that only
differ in array size, error level or SNR.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Role(IntEnum):
    CHANNEL = 0
    BS_ERRORS = 1
    UE_ERRORS = 2
    NOISE = 3
    SCHEDULE = 4


def substream(master: int, trial: int, role: Role, *extra: int) -> np.random.Generator:
    """Generator for one ``(master, trial, role, *extra)`` key."""
    if master < 0 or trial < 0:
        raise ValueError("seed and trial index must be non-negative")
    seq = np.random.SeedSequence(int(master), spawn_key=(int(trial), int(role), *map(int, extra)))
    return np.random.Generator(np.random.Philox(seq))
