"""
Experiments: error curves of the filtered texture part against the planted
tone, spectrum images, and the white-noise diagnostics.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft
from scipy.stats import spearmanr

from src.config import worker_count
from src.decomp import ModelParams, decompose
from src.errors import DimensionMismatch, FrequencyOutOfRange, SpecOutOfRange
from src.field import Field, forward_transform, frequency_grid, norm_l1
from src.lpbank import apply_mask, make_radial_mask
from src.projector import ProjectionConfig, g_norm_upper_bound
from src.synth import NoiseCoefficients, SceneSpec, make_filtered_noise, make_scene

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_POINTS = 12
# Bins holding at least this share of a tone's peak power count as the tone's support
TONE_SUPPORT_FRACTION = 1e-3
ZERO_DEVIATION = 1e-12


# ---------------------------------------------------------------------------
# Error curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorRow:
    omega2: float
    err_w: float
    err_f: float
    converged: bool = True


@dataclass(frozen=True)
class ErrorCurve:
    rows: list[ErrorRow]
    slope: float
    intercept: float
    spearman: float
    bound_constant: float

    @property
    def omegas(self) -> list[float]:
        return [r.omega2 for r in self.rows]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def to_csv(self) -> str:
        lines = ["omega2,err_w,err_f"]
        lines += [f"{r.omega2:.17g},{r.err_w:.17g},{r.err_f:.17g}" for r in self.rows]
        lines.append(f"# slope={self.slope:.17g}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


def default_sweep(j: int, count: int = DEFAULT_SWEEP_POINTS) -> list[float]:
    """count log-spaced frequencies strictly inside the scale-j plateau."""
    return [float(x) for x in np.geomspace(2.0 ** (j - 1) * 1.05, 2.0**j * 0.95, count)]


def _check_sweep(omegas: list[float], j: int) -> None:
    if not omegas:
        raise SpecOutOfRange("Frequency sweep is empty")
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise SpecOutOfRange(f"Frequency sweep must be strictly increasing, got {omegas}")
    lo, hi = 2.0 ** (j - 2), 2.0 ** (j + 1)
    outside = [w for w in omegas if not lo < w < hi]
    if outside:
        raise FrequencyOutOfRange(f"Sweep points {outside} fall outside the scale-{j} ring ({lo:g}, {hi:g})")


def _fit_loglog(omegas: np.ndarray, errors: np.ndarray) -> tuple[float, float]:
    if len(omegas) < 2 or np.any(errors <= 0):
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(omegas), np.log(errors), 1)
    return float(slope), float(intercept)


def error_curve(
    base: SceneSpec,
    omegas: list[float],
    params: ModelParams,
    j: int,
    texture_index: int = 1,
    pcfg: ProjectionConfig | None = None,
    workers: int | None = None,
) -> ErrorCurve:
    """
    For each omega2: rebuild the scene with textures[texture_index] at omega2, decompose,
    filter at scale j, and take L1 errors of Delta_j[w] and Delta_j[f] against the unfiltered texture.
    """
    _check_sweep(list(omegas), j)
    if not 0 <= texture_index < len(base.textures):
        raise SpecOutOfRange(f"Scene has no texture {texture_index}")
    mask = make_radial_mask(j, base.size)

    def point(omega2: float) -> ErrorRow:
        textures = list(base.textures)
        textures[texture_index] = replace(textures[texture_index], omega=omega2)
        f, truth = make_scene(replace(base, textures=tuple(textures)))
        tone = truth.textures[texture_index]
        dec = decompose(f, params, pcfg)
        err_w = norm_l1(apply_mask(dec.w, mask) - tone)
        err_f = norm_l1(apply_mask(f, mask) - tone)
        logger.info("omega2=%.4g err_w=%.4g err_f=%.4g", omega2, err_w, err_f)
        return ErrorRow(float(omega2), err_w, err_f, dec.converged)

    workers = workers or worker_count()
    if workers <= 1:
        rows = [point(w) for w in omegas]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, omegas))

    w = np.array([r.omega2 for r in rows])
    e = np.array([r.err_w for r in rows])
    slope, intercept = _fit_loglog(w, e)
    rho = float(spearmanr(w, e)[0]) if len(rows) >= 2 else float("nan")
    bound_constant = float(np.max(e * params.lam * w / params.mu))
    return ErrorCurve(rows, slope, intercept, rho, bound_constant)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def spectrum_image(f: Field) -> Field:
    """log(1 + |coeff|), DC at the centre, scaled to [0, 1]."""
    magnitude = np.log1p(np.abs(forward_transform(f).coeffs))
    peak = float(magnitude.max())
    if peak == 0.0:
        return Field.zeros(f.width, f.height)
    return Field(np.fft.fftshift(magnitude) / peak)


def axis_energy(f: Field, half_width: int = 1, exclude_ring: tuple[float, float] | None = None) -> float:
    """
    Spectral energy on the bins within half_width of either frequency axis, DC excluded.
    exclude_ring=(lo, hi) drops bins with lo <= |xi| <= hi (e.g. a planted tone on an axis).
    """
    power = np.abs(forward_transform(f).coeffs) ** 2
    xi_x, xi_y = frequency_grid(f.width, f.height)
    on_axis = (np.abs(xi_x) <= half_width) | (np.abs(xi_y) <= half_width)
    on_axis &= (xi_x != 0) | (xi_y != 0)
    if exclude_ring is not None:
        radius = np.hypot(xi_x, xi_y)
        on_axis &= ~((radius >= exclude_ring[0]) & (radius <= exclude_ring[1]))
    return float(power[on_axis].sum())


def channel_containment(tone: Field, channels: list[Field]) -> list[float]:
    """
    Share of the energy on a planted tone's spectral support that each channel carries.
    Channels should partition the image (layers plus residual) for the shares to sum to one.
    """
    for channel in channels:
        if channel.shape != tone.shape:
            raise DimensionMismatch(f"Channel {channel.shape} does not match tone {tone.shape}")
    tone_power = np.abs(forward_transform(tone).coeffs) ** 2
    support = tone_power >= TONE_SUPPORT_FRACTION * float(tone_power.max())
    energies = np.array([float((np.abs(forward_transform(c).coeffs)[support] ** 2).sum()) for c in channels])
    total = float(energies.sum())
    if total == 0.0:
        return [0.0] * len(channels)
    return [float(e / total) for e in energies]


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseDiagnostic:
    """Per-frequency |w_hat(k) - sigma g_k| against the bound epsilon*N/|k|, DC excluded."""
    frequencies: np.ndarray
    deviations: np.ndarray
    bounds: np.ndarray
    epsilon: float
    cutoff: int
    passed: np.ndarray = field(repr=False, default=None)

    @property
    def pass_ratio(self) -> float:
        if self.passed is None or self.passed.size == 0:
            return 1.0
        return float(self.passed.mean())


def noise_diagnostic(w: Field, truth: NoiseCoefficients, epsilon: float, cutoff: int | None = None) -> NoiseDiagnostic:
    cutoff = truth.cutoff if cutoff is None else cutoff
    if w.width != w.height:
        raise DimensionMismatch(f"Noise diagnostic needs a square field, got {w.shape}")
    if cutoff >= w.width // 2 or cutoff > truth.cutoff:
        raise DimensionMismatch(f"Cutoff {cutoff} does not fit a {w.width} grid with {truth.cutoff}-coefficient truth")

    size = w.width
    w_hat = scipy.fft.fft2(w.samples) / (size * size)
    expected = truth.sigma * truth.on_grid(size)
    xi_x, xi_y = frequency_grid(size, size)
    support = (np.abs(xi_x) <= cutoff) & (np.abs(xi_y) <= cutoff) & ((xi_x != 0) | (xi_y != 0))

    radius = np.hypot(xi_x[support], xi_y[support])
    deviations = np.abs(w_hat - expected)[support]
    bounds = epsilon * cutoff / radius
    passed = deviations <= bounds + ZERO_DEVIATION * max(1.0, truth.sigma)
    return NoiseDiagnostic(
        frequencies=np.stack([xi_x[support], xi_y[support]], axis=1),
        deviations=deviations,
        bounds=bounds,
        epsilon=epsilon,
        cutoff=cutoff,
        passed=passed,
    )


@dataclass(frozen=True)
class NoiseGRow:
    cutoff: int
    g_upper_bound: float
    sqrt_log_cutoff: float

    @property
    def ratio(self) -> float:
        return self.g_upper_bound / self.sqrt_log_cutoff


def noise_g_profile(cutoffs: list[int], size: int = 256, seed: int = 0, sigma: float = 1.0) -> list[NoiseGRow]:
    """Certified G upper bound of sigma*R_N (one draw per cutoff) next to sqrt(log N)."""
    rows = []
    for cutoff in cutoffs:
        if cutoff < 2:
            raise SpecOutOfRange(f"Cutoff must be >= 2 for a log profile, got {cutoff}")
        noise, _ = make_filtered_noise(sigma, cutoff, seed, size)
        bound, _ = g_norm_upper_bound(noise)
        rows.append(NoiseGRow(cutoff, bound, math.sqrt(math.log(cutoff))))
    return rows
