"""
Imageio: grayscale images in and out, plus a lossless raw format for chaining
runs without quantization.

Raw layout: 8-byte magic TXSEPF64, uint32 LE width, uint32 LE height, then
width*height float64 LE samples, row-major.
"""

import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from src.errors import InvalidField
from src.field import Field

logger = logging.getLogger(__name__)

RAW_MAGIC = b"TXSEPF64"
RAW_HEADER = struct.Struct("<8sII")
RAW_SUFFIX = ".f64"


def write_raw(path: Path, f: Field) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(f.samples, dtype="<f8").tobytes()
    path.write_bytes(RAW_HEADER.pack(RAW_MAGIC, f.width, f.height) + payload)
    return path


def read_raw(path: Path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < RAW_HEADER.size:
        raise InvalidField(f"{path}: too short for a raw field header")
    magic, width, height = RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise InvalidField(f"{path}: not a raw field (magic {magic!r})")
    expected = RAW_HEADER.size + 8 * width * height
    if len(data) != expected:
        raise InvalidField(f"{path}: expected {expected} bytes for {width}x{height}, got {len(data)}")
    samples = np.frombuffer(data, dtype="<f8", offset=RAW_HEADER.size).reshape(height, width)
    return Field(samples)


def read_image(path: Path) -> Field:
    """Grayscale PGM/PNG scaled to [0, 1] by the format maxval, or a raw .f64 field."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Input image not found: {path}")
    if path.suffix.lower() == RAW_SUFFIX:
        return read_raw(path)
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.float64)
            maxval = 65535.0
        else:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
            maxval = 255.0
    logger.debug("Read %s (%dx%d, maxval %d)", path, arr.shape[1], arr.shape[0], maxval)
    return Field(arr / maxval)


def to_display(f: Field, maxval: int = 255) -> tuple[np.ndarray, tuple[float, float]]:
    """Affine [min, max] -> [0, maxval]; a constant field maps to 0. Returns (levels, (min, max))."""
    lo, hi = float(f.samples.min()), float(f.samples.max())
    dtype = np.uint8 if maxval <= 255 else np.uint16
    if hi == lo:
        return np.zeros(f.shape, dtype=dtype), (lo, hi)
    levels = np.rint((f.samples - lo) / (hi - lo) * maxval)
    return levels.astype(dtype), (lo, hi)


def write_pgm(path: Path, levels: np.ndarray, maxval: int = 255) -> Path:
    """Binary P5; samples are big-endian 16-bit when maxval > 255."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = levels.shape
    body = np.asarray(levels, dtype=">u2" if maxval > 255 else np.uint8).tobytes()
    path.write_bytes(f"P5\n{width} {height}\n{maxval}\n".encode("ascii") + body)
    return path


def write_png(path: Path, levels: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(levels, dtype=np.uint8)).save(path)
    return path


def write_field_images(out_dir: Path, name: str, f: Field) -> dict:
    """name.f64 (lossless) and name.png (display); returns the manifest entry."""
    out_dir = Path(out_dir)
    raw = write_raw(out_dir / f"{name}{RAW_SUFFIX}", f)
    levels, (lo, hi) = to_display(f)
    png = write_png(out_dir / f"{name}.png", levels)
    return {"raw": raw.name, "image": png.name, "display_min": lo, "display_max": hi}
