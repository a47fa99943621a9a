"""
Errors: every failure the library raises on purpose.

Input problems subclass ValueError and solver failures subclass RuntimeError,
so callers (run.py, src.cli) can keep catching the builtin families.
"""


class TexSepValidationError(ValueError):
    """Input rejected before any compute."""


class InvalidField(TexSepValidationError):
    """Grid is not a finite, power-of-two, at least 2x2 real array."""


class NonHermitianSpectrum(TexSepValidationError):
    """Spectrum cannot come from a real field (usually a broken mask)."""


class NotZeroMean(TexSepValidationError):
    """G-ball machinery only accepts zero-mean fields."""


class DimensionMismatch(TexSepValidationError):
    """Two grids that must agree in shape do not."""


class ScaleOutOfRange(TexSepValidationError):
    """Littlewood-Paley scale does not fit on the grid."""


class BadDirectionIndex(TexSepValidationError):
    """Direction index l outside [0, L) or L < 2."""


class FrequencyOutOfRange(TexSepValidationError):
    """Frequency below 1 or above what the grid can carry."""


class SpecOutOfRange(TexSepValidationError):
    """Scene spec asks for something the grid cannot represent."""


class CutoffOutOfRange(TexSepValidationError):
    """Noise cutoff at or above the grid Nyquist frequency."""


class SolverError(RuntimeError):
    """Iterative solver could not produce a usable result."""


class BisectionStall(SolverError):
    """TV-vs-radius curve could not be bracketed within the step budget."""
