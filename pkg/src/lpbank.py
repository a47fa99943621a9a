"""
LP bank: Littlewood-Paley radial masks and directional shell-sector masks on
the DFT grid.

Radial gain at scale j (|xi| in cycles per torus):
  0 for |xi| <= 2^(j-2), ramp up to 2^(j-1), 1 on [2^(j-1), 2^j], ramp down to 2^(j+1), 0 beyond.
Ramps are the Meyer polynomial in log2 |xi|. Plateau and stopband are decided on
integer |xi|^2 so they hold exactly. Directional masks multiply the radial gain
by angular windows over [0, pi) that sum to one.

Usage:
  python -m src.lpbank --scale 5 --size 128 --out output/mask_j5.pgm
  python -m src.lpbank --scale 5 --directions 8 --direction 2 --size 128
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft

from src.errors import BadDirectionIndex, DimensionMismatch, FrequencyOutOfRange, ScaleOutOfRange
from src.field import Field, Spectrum, forward_transform, frequency_grid, inverse_transform

logger = logging.getLogger(__name__)


def meyer_ramp(t):
    """nu(t) = t^4 (35 - 84t + 70t^2 - 20t^3) on t clipped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


@dataclass(frozen=True, eq=False)
class FilterMask:
    gains: np.ndarray
    scale: int
    direction: tuple[int, int] | None = None

    @property
    def width(self) -> int:
        return self.gains.shape[1]

    @property
    def height(self) -> int:
        return self.gains.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.gains.shape

    @property
    def label(self) -> str:
        if self.direction is None:
            return f"j{self.scale}"
        l, count = self.direction
        return f"j{self.scale}_d{l}of{count}"


@dataclass(frozen=True)
class BankSpec:
    """scales strictly decreasing; directions_per_scale[i] == 1 means isotropic."""
    scales: tuple[int, ...]
    directions_per_scale: tuple[int, ...]
    ramp: str = "meyer"

    def __post_init__(self) -> None:
        if not self.scales:
            raise ScaleOutOfRange("BankSpec needs at least one scale")
        if len(self.scales) != len(self.directions_per_scale):
            raise ScaleOutOfRange(
                f"{len(self.scales)} scales but {len(self.directions_per_scale)} direction counts"
            )
        if any(a <= b for a, b in zip(self.scales, self.scales[1:])):
            raise ScaleOutOfRange(f"Scales must be strictly decreasing, got {list(self.scales)}")
        if any(count < 1 for count in self.directions_per_scale):
            raise BadDirectionIndex(f"Direction counts must be >= 1, got {list(self.directions_per_scale)}")
        if self.ramp != "meyer":
            raise ValueError(f"Unknown ramp profile {self.ramp!r} (only 'meyer')")


def _check_scale(j: int, width: int, height: int) -> None:
    if j < 0:
        raise ScaleOutOfRange(f"Scale must be >= 0, got {j}")
    if 2**j > min(width, height) // 2:
        raise ScaleOutOfRange(
            f"Scale {j} plateau reaches {2**j} cycles, above Nyquist {min(width, height) // 2} for {width}x{height}"
        )


def _mirror(a: np.ndarray) -> np.ndarray:
    """a(-xi) in FFT layout."""
    return np.roll(np.flip(a, axis=(0, 1)), shift=1, axis=(0, 1))


@lru_cache(maxsize=64)
def _radial_gains(j: int, width: int, height: int) -> np.ndarray:
    logger.debug("Building radial mask j=%d on %dx%d", j, width, height)
    xi_x, xi_y = frequency_grid(width, height)
    r2 = (xi_x * xi_x + xi_y * xi_y).astype(np.float64)
    lo, plateau_lo, plateau_hi, hi = (4.0 ** (j + k) for k in (-2, -1, 0, 1))

    gains = np.zeros((height, width))
    with np.errstate(divide="ignore"):
        log_r = 0.5 * np.log2(r2)
    rising = (r2 > lo) & (r2 < plateau_lo)
    falling = (r2 > plateau_hi) & (r2 < hi)
    gains[rising] = meyer_ramp(log_r[rising] - (j - 2))
    gains[falling] = meyer_ramp((j + 1) - log_r[falling])
    gains[(r2 >= plateau_lo) & (r2 <= plateau_hi)] = 1.0
    gains.setflags(write=False)
    return gains


def _angular_windows(count: int, width: int, height: int) -> np.ndarray:
    """(count, height, width) windows over [0, pi) summing to one at every bin."""
    xi_x, xi_y = frequency_grid(width, height)
    # Fold onto the half-plane so xi and -xi share an angle
    flip = (xi_y < 0) | ((xi_y == 0) & (xi_x < 0))
    cx = np.where(flip, -xi_x, xi_x).astype(np.float64)
    cy = np.where(flip, -xi_y, xi_y).astype(np.float64)
    theta = np.mod(np.arctan2(cy, cx), np.pi)

    s = theta * count / np.pi
    boundary = np.rint(s)
    q = meyer_ramp(2.0 * (s - boundary) + 0.5)
    upper = np.mod(boundary.astype(np.int64), count)
    lower = np.mod(upper - 1, count)

    windows = np.zeros((count, height, width))
    rows, cols = np.indices((height, width))
    windows[upper, rows, cols] += q
    windows[lower, rows, cols] += 1.0 - q
    return windows


@lru_cache(maxsize=256)
def _directional_gains(j: int, l: int, count: int, width: int, height: int) -> np.ndarray:
    logger.debug("Building directional mask j=%d l=%d/%d on %dx%d", j, l, count, width, height)
    gains = _radial_gains(j, width, height) * _angular_windows(count, width, height)[l]
    # Only the Nyquist row/column can break symmetry; elsewhere this averages equal values
    gains = 0.5 * (gains + _mirror(gains))
    gains.setflags(write=False)
    return gains


def make_radial_mask(j: int, width: int, height: int | None = None) -> FilterMask:
    height = height or width
    _check_scale(j, width, height)
    return FilterMask(_radial_gains(j, width, height), j)


def make_directional_mask(j: int, l: int, count: int, width: int, height: int | None = None) -> FilterMask:
    height = height or width
    _check_scale(j, width, height)
    if count < 2:
        raise BadDirectionIndex(f"Directional masks need at least 2 directions, got {count}")
    if not 0 <= l < count:
        raise BadDirectionIndex(f"Direction index {l} outside [0, {count})")
    return FilterMask(_directional_gains(j, l, count, width, height), j, (l, count))


def make_bank(spec: BankSpec, width: int, height: int | None = None) -> list[list[FilterMask]]:
    """One list per scale: [radial] for count 1, else the count sector masks."""
    bank = []
    for j, count in zip(spec.scales, spec.directions_per_scale):
        if count == 1:
            bank.append([make_radial_mask(j, width, height)])
        else:
            bank.append([make_directional_mask(j, l, count, width, height) for l in range(count)])
    return bank


def apply_mask(f: Field, mask: FilterMask) -> Field:
    if f.shape != mask.shape:
        raise DimensionMismatch(f"Mask {mask.shape} does not match field {f.shape}")
    spectrum = forward_transform(f)
    return inverse_transform(Spectrum(mask.gains * spectrum.coeffs))


def impulse_response_l1(mask: FilterMask) -> float:
    """Sum |k| of the convolution kernel k = IDFT(gains); bounds the L1 gain of apply_mask."""
    kernel = scipy.fft.ifft2(mask.gains)
    return float(np.abs(kernel).sum())


def select_scale(omega: float, grid_size: int | None = None) -> int:
    """Smallest j with omega <= 2^j (exact powers of two map to their own exponent)."""
    if not omega >= 1.0:
        raise FrequencyOutOfRange(f"Frequency must be >= 1, got {omega}")
    mantissa, exponent = math.frexp(omega)
    j = exponent - 1 if mantissa == 0.5 else exponent
    if grid_size is not None and 2**j > grid_size // 2:
        raise FrequencyOutOfRange(
            f"Frequency {omega} needs scale {j}, above Nyquist {grid_size // 2} for a {grid_size} grid"
        )
    return j


def ring_energy_fraction(f: Field, lo: float, hi: float) -> float:
    """Share of spectral energy with lo <= |xi| <= hi."""
    coeffs = forward_transform(f).coeffs
    xi_x, xi_y = frequency_grid(f.width, f.height)
    radius = np.hypot(xi_x, xi_y)
    power = np.abs(coeffs) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float(power[(radius >= lo) & (radius <= hi)].sum()) / total


def export_mask_pgm(mask: FilterMask, path: Path) -> Path:
    """16-bit PGM of the gains with DC at the centre."""
    from src.imageio import write_pgm

    centred = np.fft.fftshift(mask.gains)
    levels = np.rint(np.clip(centred, 0.0, 1.0) * 65535).astype(np.uint16)
    return write_pgm(path, levels, 65535)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Export a filter mask as a 16-bit PGM")
    parser.add_argument("--scale", type=int, required=True, help="Scale j")
    parser.add_argument("--size", type=int, default=128, help="Grid size N (power of two)")
    parser.add_argument("--directions", type=int, default=1, help="Sector count L (1 = radial)")
    parser.add_argument("--direction", type=int, default=0, help="Sector index l")
    parser.add_argument("--out", type=Path, default=None, help="Output .pgm path")
    args = parser.parse_args(argv)

    try:
        if args.directions == 1:
            mask = make_radial_mask(args.scale, args.size)
        else:
            mask = make_directional_mask(args.scale, args.direction, args.directions, args.size)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2

    out = args.out or Path("output") / f"mask_{mask.label}_{args.size}.pgm"
    export_mask_pgm(mask, out)
    print(f"✓ Mask saved: {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
