"""
Field: periodic grids on the torus [0, 2pi)^2 and the operators every
other module is built on.

Sample (i, k) of a Field is f(x = 2*pi*k/width, y = 2*pi*i/height). Norms carry
the cell-area factor h^2 (h = 2*pi/width) so they approximate the continuous
torus integrals and parameter values transfer across grid sizes.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft

from src.errors import DimensionMismatch, InvalidField, NonHermitianSpectrum

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# Relative Hermitian violation above which a spectrum is rejected
HERMITIAN_TOLERANCE = 1e-6
# Imaginary residue (relative to dynamic range) dropped silently on inverse
IMAG_RESIDUE_TOLERANCE = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Field:
    """Real periodic grid, samples[i, k] with i the row (y) and k the column (x)."""
    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise InvalidField(f"Field needs a 2-D array, got shape {arr.shape}")
        height, width = arr.shape
        if not (_is_power_of_two(width) and _is_power_of_two(height)):
            raise InvalidField(f"Field dimensions must be powers of two >= 2, got {width}x{height}")
        if not np.all(np.isfinite(arr)):
            raise InvalidField("Field samples must be finite")
        object.__setattr__(self, "samples", _readonly(arr))

    @classmethod
    def zeros(cls, width: int, height: int | None = None) -> "Field":
        return cls(np.zeros((height or width, width)))

    @classmethod
    def constant(cls, value: float, width: int, height: int | None = None) -> "Field":
        return cls(np.full((height or width, width), float(value)))

    @classmethod
    def from_function(cls, func, width: int, height: int | None = None) -> "Field":
        """Sample func(x, y) on the torus grid (x along columns)."""
        x, y = torus_coordinates(width, height or width)
        return cls(np.broadcast_to(func(x, y), (height or width, width)))

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def cell_size(self) -> float:
        """h = 2*pi/width."""
        return TWO_PI / self.width

    def mean(self) -> float:
        return float(self.samples.mean())

    def value_range(self) -> float:
        """max - min of the samples."""
        return float(np.ptp(self.samples))

    def max_abs(self) -> float:
        return float(np.abs(self.samples).max())

    def centered(self) -> "Field":
        """Zero-mean copy; exactly zero when the field is constant."""
        if self.value_range() == 0.0:
            return Field.zeros(self.width, self.height)
        return Field(self.samples - self.samples.mean())

    def _check_same_shape(self, other: "Field") -> None:
        if self.shape != other.shape:
            raise DimensionMismatch(f"Field shapes differ: {self.shape} vs {other.shape}")

    def __add__(self, other: "Field") -> "Field":
        self._check_same_shape(other)
        return Field(self.samples + other.samples)

    def __sub__(self, other: "Field") -> "Field":
        self._check_same_shape(other)
        return Field(self.samples - other.samples)

    def __neg__(self) -> "Field":
        return Field(-self.samples)

    def __mul__(self, alpha: float) -> "Field":
        return Field(float(alpha) * self.samples)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair (p1, p2) of same-size Fields: x and y components."""
    p1: Field
    p2: Field

    def __post_init__(self) -> None:
        if self.p1.shape != self.p2.shape:
            raise DimensionMismatch(f"VectorField components differ: {self.p1.shape} vs {self.p2.shape}")

    @classmethod
    def zeros(cls, width: int, height: int | None = None) -> "VectorField":
        return cls(Field.zeros(width, height), Field.zeros(width, height))

    @property
    def shape(self) -> tuple[int, int]:
        return self.p1.shape

    def magnitude(self) -> np.ndarray:
        """Pointwise sqrt(p1^2 + p2^2)."""
        return np.hypot(self.p1.samples, self.p2.samples)

    def sup_norm(self) -> float:
        return float(self.magnitude().max())


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Unitary DFT coefficients in numpy FFT layout: coeffs[m, n] is attached to the
    integer frequency (xi_x, xi_y) = (fftfreq(width)*width)[n], (fftfreq(height)*height)[m],
    i.e. xi in [-N/2, N/2) in cycles per torus.
    """
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if arr.ndim != 2:
            raise InvalidField(f"Spectrum needs a 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "coeffs", _readonly(arr))

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def height(self) -> int:
        return self.coeffs.shape[0]

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        return frequency_grid(self.width, self.height)

    def radial_frequency(self) -> np.ndarray:
        xi_x, xi_y = self.frequencies()
        return np.hypot(xi_x, xi_y)

    def energy(self) -> float:
        """Cell-area weighted spectral energy; equals norm_l2sq of the field."""
        h = TWO_PI / self.width
        return float(h * h * np.sum(np.abs(self.coeffs) ** 2))

    def hermitian_violation(self) -> float:
        """max |c(xi) - conj(c(-xi))| relative to max |c|."""
        scale = float(np.abs(self.coeffs).max())
        if scale == 0.0:
            return 0.0
        mirrored = np.roll(np.flip(self.coeffs, axis=(0, 1)), shift=1, axis=(0, 1))
        return float(np.abs(self.coeffs - np.conj(mirrored)).max()) / scale


def torus_coordinates(width: int, height: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Broadcastable (x, y) sample positions, x along columns."""
    height = height or width
    x = TWO_PI * np.arange(width) / width
    y = TWO_PI * np.arange(height) / height
    return x[np.newaxis, :], y[:, np.newaxis]


def frequency_grid(width: int, height: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequency grids (xi_x, xi_y) aligned with the Spectrum layout."""
    height = height or width
    xi_x = np.rint(np.fft.fftfreq(width) * width).astype(np.int64)
    xi_y = np.rint(np.fft.fftfreq(height) * height).astype(np.int64)
    return np.broadcast_to(xi_x[np.newaxis, :], (height, width)), np.broadcast_to(xi_y[:, np.newaxis], (height, width))


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def forward_transform(f: Field) -> Spectrum:
    return Spectrum(scipy.fft.fft2(f.samples, norm="ortho"))


def inverse_transform(spectrum: Spectrum) -> Field:
    """Real field from a Hermitian spectrum; small imaginary residue is discarded."""
    violation = spectrum.hermitian_violation()
    if violation > HERMITIAN_TOLERANCE:
        raise NonHermitianSpectrum(
            f"Spectrum is not Hermitian (relative violation {violation:.3e}); check the mask"
        )
    complex_samples = scipy.fft.ifft2(spectrum.coeffs, norm="ortho")
    real = complex_samples.real
    residue = float(np.abs(complex_samples.imag).max())
    dynamic = float(np.ptp(real)) or float(np.abs(real).max()) or 1.0
    if residue > IMAG_RESIDUE_TOLERANCE * dynamic:
        logger.debug("Discarding imaginary residue %.3e (range %.3e)", residue, dynamic)
    return Field(real)


# ---------------------------------------------------------------------------
# Differential operators (periodic, pixel units)
# ---------------------------------------------------------------------------

def gradient(u: Field) -> VectorField:
    """Forward differences with periodic wrap."""
    s = u.samples
    dx = np.roll(s, -1, axis=1) - s
    dy = np.roll(s, -1, axis=0) - s
    return VectorField(Field(dx), Field(dy))


def divergence(p: VectorField) -> Field:
    """Backward differences with periodic wrap: the negative adjoint of gradient."""
    p1 = p.p1.samples
    p2 = p.p2.samples
    return Field((p1 - np.roll(p1, 1, axis=1)) + (p2 - np.roll(p2, 1, axis=0)))


def inner(a: Field, b: Field) -> float:
    """Plain pixel sum of a*b (no area factor)."""
    return float(np.sum(a.samples * b.samples))


def inner_vector(p: VectorField, q: VectorField) -> float:
    return inner(p.p1, q.p1) + inner(p.p2, q.p2)


# ---------------------------------------------------------------------------
# Norms (cell-area weighted)
# ---------------------------------------------------------------------------

def norm_l1(f: Field) -> float:
    h = f.cell_size
    return float(h * h * np.abs(f.samples).sum())


def norm_l2sq(f: Field) -> float:
    h = f.cell_size
    return float(h * h * np.square(f.samples).sum())


def norm_tv(f: Field) -> float:
    """Isotropic total variation h * sum |grad f| (|Du| seminorm, no L1 term)."""
    g = gradient(f)
    return float(f.cell_size * g.magnitude().sum())
