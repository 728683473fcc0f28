"""Exception types raised by the simulator."""

import numpy as np


class ConfigError(ValueError):
    """A scenario configuration violates one of its invariants."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. an all-zero channel)."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be inverted is numerically rank deficient."""
