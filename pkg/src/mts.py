"""
MTS: multiscale texture separation, and its directional variant.

From the top scale down, each stage decomposes the current image f_j, keeps the
band of its texture part w that the scale-j filter passes, and subtracts it:
  w_j = Delta_j[w],  f_{j+1} = f_j - w_j,  mu halves at every stage.
Hence f = f_J + sum_j w_j. The directional variant replaces Delta_j by its
sector masks, one channel per (scale, direction).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from src.config import worker_count
from src.decomp import Decomposition, ModelParams, decompose
from src.errors import ScaleOutOfRange, SolverError
from src.field import Field, norm_l2sq
from src.lpbank import apply_mask, make_directional_mask, make_radial_mask
from src.projector import ProjectionConfig

logger = logging.getLogger(__name__)

# mu_1 = REFERENCE_MU * 2^j1 / REFERENCE_OMEGA keeps mu/omega at the 512 px scene's ratio
REFERENCE_MU = 100.0
REFERENCE_OMEGA = 256.0

LayerStatus = Literal["ok", "failed", "skipped"]


@dataclass(frozen=True)
class MtsConfig:
    scales: int = 3
    lam: float = 1.0
    mu_top: float | None = None
    top_scale: int | None = None
    projection: ProjectionConfig | None = None
    outer_iterations: int | None = None
    outer_tolerance: float | None = None
    directions_per_scale: tuple[int, ...] | None = None
    retain_intermediates: bool = False
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.scales < 1:
            raise ScaleOutOfRange(f"Need at least one scale, got {self.scales}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.mu_top is not None and self.mu_top <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu_top}")
        if self.directions_per_scale is not None:
            if len(self.directions_per_scale) != self.scales:
                raise ScaleOutOfRange(
                    f"{len(self.directions_per_scale)} direction counts for {self.scales} scales"
                )
            if any(count < 1 for count in self.directions_per_scale):
                raise ValueError(f"Direction counts must be >= 1, got {list(self.directions_per_scale)}")

    def top(self, size: int) -> int:
        """Given top scale, or the highest j with 2^(j+1) <= size/2."""
        if self.top_scale is not None:
            return self.top_scale
        return int(math.log2(size)) - 2

    def scale_list(self, size: int) -> list[int]:
        top = self.top(size)
        scales = list(range(top, top - self.scales, -1))
        if scales[-1] < 0:
            raise ScaleOutOfRange(f"{self.scales} scales below top scale {top} go under scale 0")
        if 2**top > size // 2:
            raise ScaleOutOfRange(f"Top scale {top} does not fit a {size} grid")
        return scales

    def mu_schedule(self, size: int) -> list[float]:
        mu_top = self.mu_top if self.mu_top is not None else REFERENCE_MU * 2.0 ** self.top(size) / REFERENCE_OMEGA
        return [mu_top / 2.0**i for i in range(self.scales)]

    def directions(self) -> tuple[int, ...]:
        if self.directions_per_scale is not None:
            return self.directions_per_scale
        return (8,) + (4,) * (self.scales - 1)

    def model_params(self, mu: float) -> ModelParams:
        kwargs = {}
        if self.outer_iterations is not None:
            kwargs["outer_iterations"] = self.outer_iterations
        if self.outer_tolerance is not None:
            kwargs["outer_tolerance"] = self.outer_tolerance
        return ModelParams(lam=self.lam, mu=mu, **kwargs)


@dataclass(frozen=True, eq=False)
class MtsLayer:
    scale: int
    mu: float
    w: Field
    energy: float
    iterations: int = 0
    converged: bool = True
    status: LayerStatus = "ok"
    message: str = ""


@dataclass(frozen=True, eq=False)
class MtsResult:
    layers: list[MtsLayer]
    residual: Field
    intermediates: list[Field] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(layer.converged and layer.status == "ok" for layer in self.layers)

    @property
    def mu_schedule(self) -> list[float]:
        return [layer.mu for layer in self.layers]

    def reconstruct(self) -> Field:
        total = self.residual.samples.copy()
        for layer in self.layers:
            total = total + layer.w.samples
        return Field(total)

    def reconstruction_error(self, f: Field) -> float:
        return float(np.abs(self.reconstruct().samples - f.samples).max())


@dataclass(frozen=True, eq=False)
class DirectionalLayer:
    scale: int
    mu: float
    channels: list[Field]
    isotropic: Field
    iterations: int = 0
    converged: bool = True
    status: LayerStatus = "ok"
    message: str = ""

    @property
    def directions(self) -> int:
        return len(self.channels)

    def channel_sum(self) -> Field:
        total = np.zeros(self.isotropic.shape)
        for channel in self.channels:
            total = total + channel.samples
        return Field(total)

    @property
    def energies(self) -> list[float]:
        return [norm_l2sq(c) for c in self.channels]


@dataclass(frozen=True, eq=False)
class DirectionalMtsResult:
    layers: list[DirectionalLayer]
    residual: Field
    intermediates: list[Field] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(layer.converged and layer.status == "ok" for layer in self.layers)

    @property
    def mu_schedule(self) -> list[float]:
        return [layer.mu for layer in self.layers]

    def reconstruct(self) -> Field:
        total = self.residual.samples.copy()
        for layer in self.layers:
            for channel in layer.channels:
                total = total + channel.samples
        return Field(total)

    def reconstruction_error(self, f: Field) -> float:
        return float(np.abs(self.reconstruct().samples - f.samples).max())


def separate_scale(
    f_j: Field,
    j: int,
    params: ModelParams,
    pcfg: ProjectionConfig | None = None,
) -> tuple[Field, Field, Decomposition]:
    """One stage: returns (w_j, f_{j+1}, decomposition of f_j)."""
    mask = make_radial_mask(j, f_j.width, f_j.height)
    dec = decompose(f_j, params, pcfg)
    w_j = apply_mask(dec.w, mask)
    return w_j, f_j - w_j, dec


def run_mts(f: Field, cfg: MtsConfig) -> MtsResult:
    scales = cfg.scale_list(min(f.width, f.height))
    mus = cfg.mu_schedule(min(f.width, f.height))
    layers: list[MtsLayer] = []
    intermediates: list[Field] = [f] if cfg.retain_intermediates else []
    current = f
    failed = False

    for j, mu in zip(scales, mus):
        if failed:
            layers.append(MtsLayer(j, mu, Field.zeros(f.width, f.height), 0.0, status="skipped"))
            continue
        logger.info("MTS scale %d (mu=%.4g)", j, mu)
        try:
            w_j, current, dec = separate_scale(current, j, cfg.model_params(mu), cfg.projection)
        except SolverError as e:
            logger.error("MTS scale %d failed: %s", j, e)
            layers.append(MtsLayer(j, mu, Field.zeros(f.width, f.height), 0.0, status="failed", message=str(e)))
            failed = True
            continue
        layers.append(MtsLayer(j, mu, w_j, norm_l2sq(w_j), dec.iterations, dec.converged))
        if cfg.retain_intermediates:
            intermediates.append(current)

    return MtsResult(layers, current, intermediates)


def _directional_channels(w: Field, j: int, count: int, workers: int) -> list[Field]:
    if count == 1:
        return [apply_mask(w, make_radial_mask(j, w.width, w.height))]
    masks = [make_directional_mask(j, l, count, w.width, w.height) for l in range(count)]
    if workers <= 1:
        return [apply_mask(w, m) for m in masks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: apply_mask(w, m), masks))


def run_dmts(f: Field, cfg: MtsConfig) -> DirectionalMtsResult:
    size = min(f.width, f.height)
    scales = cfg.scale_list(size)
    mus = cfg.mu_schedule(size)
    workers = cfg.workers or worker_count()
    layers: list[DirectionalLayer] = []
    intermediates: list[Field] = [f] if cfg.retain_intermediates else []
    current = f
    failed = False
    zero = Field.zeros(f.width, f.height)

    for j, mu, count in zip(scales, mus, cfg.directions()):
        if failed:
            layers.append(DirectionalLayer(j, mu, [zero] * count, zero, status="skipped"))
            continue
        logger.info("DMTS scale %d (mu=%.4g, %d directions)", j, mu, count)
        try:
            dec = decompose(current, cfg.model_params(mu), cfg.projection)
        except SolverError as e:
            logger.error("DMTS scale %d failed: %s", j, e)
            layers.append(DirectionalLayer(j, mu, [zero] * count, zero, status="failed", message=str(e)))
            failed = True
            continue
        channels = _directional_channels(dec.w, j, count, workers)
        isotropic = apply_mask(dec.w, make_radial_mask(j, f.width, f.height))
        layer = DirectionalLayer(j, mu, channels, isotropic, dec.iterations, dec.converged)
        current = current - layer.channel_sum()
        layers.append(layer)
        if cfg.retain_intermediates:
            intermediates.append(current)

    return DirectionalMtsResult(layers, current, intermediates)
