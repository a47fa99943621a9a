"""
Synth: synthetic scenes with their ground truth.

A scene is cartoon (piecewise-constant shapes) + textures (enveloped cosines)
+ optional filtered white noise, sampled on the torus grid. Shape geometry is
given in fractions of the torus side, so one spec works at any grid size.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.fft
from PIL import Image, ImageDraw
from scipy import ndimage

from src.errors import CutoffOutOfRange, SpecOutOfRange
from src.field import Field, torus_coordinates
from src.lpbank import meyer_ramp

logger = logging.getLogger(__name__)

# Width of the smooth envelope edge, in pixels
ENVELOPE_RAMP_PIXELS = 2.0
REALNESS_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float
    level: float = 1.0
    kind: Literal["disk"] = "disk"

    def indicator(self, size: int) -> np.ndarray:
        t = (np.arange(size) + 0.5) / size
        return ((t[np.newaxis, :] - self.cx) ** 2 + (t[:, np.newaxis] - self.cy) ** 2 <= self.radius**2).astype(float)

    def within_unit_square(self) -> bool:
        return (
            self.radius > 0
            and 0.0 <= self.cx - self.radius and self.cx + self.radius <= 1.0
            and 0.0 <= self.cy - self.radius and self.cy + self.radius <= 1.0
        )


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float
    level: float = 1.0
    kind: Literal["rectangle"] = "rectangle"

    def indicator(self, size: int) -> np.ndarray:
        t = (np.arange(size) + 0.5) / size
        cols = (t >= self.x0) & (t < self.x1)
        rows = (t >= self.y0) & (t < self.y1)
        return (rows[:, np.newaxis] & cols[np.newaxis, :]).astype(float)

    def within_unit_square(self) -> bool:
        return 0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]
    level: float = 1.0
    kind: Literal["polygon"] = "polygon"

    def indicator(self, size: int) -> np.ndarray:
        canvas = Image.new("L", (size, size), 0)
        ImageDraw.Draw(canvas).polygon([(x * size, y * size) for x, y in self.vertices], fill=1)
        return np.asarray(canvas, dtype=float)

    def within_unit_square(self) -> bool:
        return len(self.vertices) >= 3 and all(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0 for x, y in self.vertices)


Shape = Disk | Rectangle | Polygon


# ---------------------------------------------------------------------------
# Specs and ground truth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Texture:
    """amplitude * envelope(x) * cos(omega*(x cos theta + y sin theta) + phase); no envelope = full support."""
    amplitude: float
    omega: float
    theta: float = 0.0
    phase: float = 0.0
    envelope: Shape | None = None

    @classmethod
    def from_wavevector(cls, kx: int, ky: int, amplitude: float = 1.0, envelope: Shape | None = None) -> "Texture":
        """Tone on the integer frequency (kx, ky)."""
        return cls(amplitude, math.hypot(kx, ky), math.atan2(ky, kx), 0.0, envelope)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    cutoff: int
    seed: int = 0


@dataclass(frozen=True)
class SceneSpec:
    size: int = 512
    cartoon: tuple[Shape, ...] = ()
    textures: tuple[Texture, ...] = ()
    noise: NoiseSpec | None = None

    def validate(self) -> None:
        if self.size < 2 or self.size & (self.size - 1):
            raise SpecOutOfRange(f"Grid size must be a power of two >= 2, got {self.size}")
        nyquist = self.size // 2
        for i, texture in enumerate(self.textures):
            if abs(texture.omega) > nyquist:
                raise SpecOutOfRange(f"Texture {i}: omega {texture.omega} above Nyquist {nyquist}")
            if texture.envelope is not None and not texture.envelope.within_unit_square():
                raise SpecOutOfRange(f"Texture {i}: envelope leaves the unit square")
        for i, shape in enumerate(self.cartoon):
            if not shape.within_unit_square():
                raise SpecOutOfRange(f"Cartoon shape {i} leaves the unit square")


@dataclass(frozen=True, eq=False)
class NoiseCoefficients:
    """g[l + cutoff, k + cutoff] for |k|, |l| <= cutoff, Hermitian: g(-k,-l) = conj g(k,l)."""
    coeffs: np.ndarray
    cutoff: int
    sigma: float
    seed: int

    def at(self, k: int, l: int) -> complex:
        return complex(self.coeffs[l + self.cutoff, k + self.cutoff])

    def on_grid(self, size: int) -> np.ndarray:
        """Coefficients scattered into a size x size array in FFT layout (zero elsewhere)."""
        grid = np.zeros((size, size), dtype=np.complex128)
        idx = np.arange(-self.cutoff, self.cutoff + 1) % size
        grid[np.ix_(idx, idx)] = self.coeffs
        return grid

    def support(self, size: int) -> np.ndarray:
        mask = np.zeros((size, size), dtype=bool)
        idx = np.arange(-self.cutoff, self.cutoff + 1) % size
        mask[np.ix_(idx, idx)] = True
        return mask


@dataclass(frozen=True, eq=False)
class GroundTruth:
    cartoon: Field
    textures: list[Field] = field(default_factory=list)
    noise: Field | None = None
    noise_coefficients: NoiseCoefficients | None = None

    def compose(self) -> Field:
        total = self.cartoon.samples.copy()
        for texture in self.textures:
            total = total + texture.samples
        if self.noise is not None:
            total = total + self.noise.samples
        return Field(total)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def smooth_envelope(shape: Shape, size: int) -> np.ndarray:
    """Indicator of shape with a nu-ramp from 0 at the edge to 1 two pixels inside."""
    inside = shape.indicator(size)
    depth = ndimage.distance_transform_edt(inside > 0)
    return meyer_ramp((depth - 0.5) / ENVELOPE_RAMP_PIXELS) * (inside > 0)


def _cartoon(shapes: tuple[Shape, ...], size: int) -> Field:
    total = np.zeros((size, size))
    for shape in shapes:
        total += shape.level * shape.indicator(size)
    return Field(total)


def _texture(texture: Texture, size: int) -> Field:
    x, y = torus_coordinates(size)
    phase = texture.omega * (x * math.cos(texture.theta) + y * math.sin(texture.theta)) + texture.phase
    envelope = 1.0 if texture.envelope is None else smooth_envelope(texture.envelope, size)
    return Field(np.broadcast_to(texture.amplitude * envelope * np.cos(phase), (size, size)))


def make_filtered_noise(sigma: float, cutoff: int, seed: int = 0, size: int = 512) -> tuple[Field, NoiseCoefficients]:
    """
    sigma * sum_{|k|,|l| <= cutoff} g_kl e^{i(kx + ly)} with g_kl complex standard
    normal (E|g|^2 = 1), Hermitian-paired so the field is real; g_00 is real N(0, 1).
    """
    if cutoff < 0 or cutoff >= size // 2:
        raise CutoffOutOfRange(f"Noise cutoff {cutoff} must be in [0, {size // 2}) for a {size} grid")
    if sigma < 0:
        raise SpecOutOfRange(f"Noise sigma must be >= 0, got {sigma}")

    n = 2 * cutoff + 1
    rng = np.random.default_rng(seed)
    raw = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    coeffs = (raw + np.conj(raw[::-1, ::-1])) / math.sqrt(2.0)
    coeffs[cutoff, cutoff] = coeffs[cutoff, cutoff].real
    truth = NoiseCoefficients(coeffs, cutoff, sigma, seed)

    if sigma == 0.0:
        return Field.zeros(size), truth
    samples = sigma * size * size * scipy.fft.ifft2(truth.on_grid(size))
    residue = float(np.abs(samples.imag).max())
    if residue > REALNESS_TOLERANCE * max(1.0, float(np.abs(samples.real).max())):
        logger.warning("Noise field imaginary residue %.3e", residue)
    return Field(samples.real), truth


def make_scene(spec: SceneSpec) -> tuple[Field, GroundTruth]:
    spec.validate()
    cartoon = _cartoon(spec.cartoon, spec.size)
    textures = [_texture(t, spec.size) for t in spec.textures]
    noise_field, noise_coeffs = None, None
    if spec.noise is not None:
        noise_field, noise_coeffs = make_filtered_noise(spec.noise.sigma, spec.noise.cutoff, spec.noise.seed, spec.size)
    truth = GroundTruth(cartoon, textures, noise_field, noise_coeffs)
    logger.debug(
        "Scene %d px: %d shapes, %d textures, noise=%s", spec.size, len(spec.cartoon), len(textures), spec.noise
    )
    return truth.compose(), truth


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

REFERENCE_OMEGA_LOW = 25.6
REFERENCE_OMEGA_HIGH = 256.0
REFERENCE_SIZE = 512


def reference_scene(size: int = REFERENCE_SIZE, omega2: float | None = None, amplitude2: float = 0.3,
                noise: NoiseSpec | None = None) -> SceneSpec:
    """
    Cartoon of three shapes plus two enveloped tones, omega1 = 25.6 and omega2 = 256 at 512 px
    (both scale with the grid). The omega2 texture is textures[1].
    """
    scale = size / REFERENCE_SIZE
    return SceneSpec(
        size=size,
        cartoon=(
            Disk(0.30, 0.32, 0.17, level=0.8),
            Rectangle(0.58, 0.56, 0.88, 0.86, level=0.5),
            Polygon(((0.10, 0.92), (0.30, 0.58), (0.48, 0.92)), level=-0.4),
        ),
        textures=(
            Texture(0.3, REFERENCE_OMEGA_LOW * scale, envelope=Rectangle(0.08, 0.08, 0.52, 0.52)),
            Texture(amplitude2, omega2 if omega2 is not None else REFERENCE_OMEGA_HIGH * scale,
                    envelope=Disk(0.72, 0.30, 0.20)),
        ),
        noise=noise,
    )


def two_shell_scene(size: int = 128, amplitude: float = 1.0) -> SceneSpec:
    """
    Disk cartoon plus full-support tones at |xi| = size/4 and size/16: each sits in the
    plateau of one of the two top scales and the stopband of the other.
    """
    return SceneSpec(
        size=size,
        cartoon=(Disk(0.5, 0.5, 0.25, level=0.5),),
        textures=(
            Texture.from_wavevector(size // 4, 0, amplitude),
            Texture.from_wavevector(size // 16, 0, amplitude),
        ),
    )


# (kx, ky) at 128 px: two in the outer shell (8 sectors), two in the inner shell (4 sectors)
FOUR_TEXTURE_WAVEVECTORS = ((28, 8), (-17, 24), (7, 4), (-4, 7))


def four_texture_scene(size: int = 128, amplitude: float = 1.0) -> SceneSpec:
    """
    Tones landing in sectors 0 and 5 of 8 (outer shell) and 0 and 2 of 4 (inner shell) of
    the two top scales. Wavevectors scale with size/128, so size must be 128 times a power of two.
    """
    factor = size // 128
    if size < 128 or factor * 128 != size or factor & (factor - 1):
        raise SpecOutOfRange(f"four-texture scene needs 128 * 2^k pixels, got {size}")
    return SceneSpec(
        size=size,
        cartoon=(Rectangle(0.3, 0.3, 0.7, 0.7, level=0.5),),
        textures=tuple(
            Texture.from_wavevector(factor * kx, factor * ky, amplitude) for kx, ky in FOUR_TEXTURE_WAVEVECTORS
        ),
    )


PRESETS = {
    "reference": reference_scene,
    "two-shell": two_shell_scene,
    "four-texture": four_texture_scene,
}
