"""Phase-space crystals of a resonantly kicked harmonic oscillator."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    PhaseCrystalError,
    NumericFailure,
    ConfigError,
)
from ._accel import backend_name  # noqa: F401
