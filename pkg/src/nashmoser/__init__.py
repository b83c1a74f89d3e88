"""Nash-Moser-Hormander iteration on truncated Fourier lattices of T^d."""

from .hypotheses import IterationParams, TameConstants, derive_constants, validate
from .iterator import run
from .scale import SpectralFunction
from .smoothing import SmoothingFamily

__all__ = ["IterationParams", "TameConstants", "derive_constants", "validate", "run", "SpectralFunction", "SmoothingFamily"]
__version__ = "0.1.0"
