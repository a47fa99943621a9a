"""
Decomp: three-part split f = u + v + w minimising
norm_tv(u) + lam*||v||^2 + mu*||w||_G, and the parameter-regime predicates
that say when the split degenerates.

Block-coordinate descent from the ROF split of f (w = 0), each sweep doing
  w-step  w = sigma - P_TV(sigma, mu/(2*lam)),  sigma = f - u (zero mean)
  u-step  u = (f - w) - P_G(f - w - mean, 1/(2*lam))
  v       = f - u - w
The mean of f stays in u.
"""

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from src.config import solver_defaults
from src.field import Field, VectorField, divergence, norm_l2sq, norm_tv
from src.projector import (
    ProjectionConfig,
    TvBallResult,
    g_norm_upper_bound,
    project_g_ball,
    project_tv_ball_certified,
    rof,
)

logger = logging.getLogger(__name__)

# Below this mu the BV_mu norm collapses to (1/mu)||.||_BV (isoperimetric band)
DEGENERATE_MU = 4.0 * np.pi
ENERGY_SLACK = 1e-12
# Relative tolerance for "the G projection reproduced f"
G_REPRODUCTION_TOLERANCE = 1e-6
SATURATION_FRACTION = 0.95

Certificate = Literal["yes", "no", "unknown"]


def _default(name: str):
    return lambda: solver_defaults()[name]


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.0
    mu: float = 100.0
    outer_iterations: int = field(default_factory=_default("outer_iterations"))
    outer_tolerance: float = field(default_factory=_default("outer_tolerance"))

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.outer_iterations < 1:
            raise ValueError(f"outer_iterations must be >= 1, got {self.outer_iterations}")
        if self.outer_tolerance <= 0:
            raise ValueError(f"outer_tolerance must be > 0, got {self.outer_tolerance}")
        if self.degenerate:
            logger.warning("mu=%.4g lies in the degenerate band (0, 4*pi]; expect u = 0", self.mu)

    @property
    def degenerate(self) -> bool:
        return self.mu <= DEGENERATE_MU

    @property
    def residual_radius(self) -> float:
        """G radius of the u-step residual, 1/(2*lam)."""
        return 1.0 / (2.0 * self.lam)

    @property
    def texture_budget(self) -> float:
        """TV budget of the w-step, mu/(2*lam)."""
        return self.mu / (2.0 * self.lam)


@dataclass(frozen=True, eq=False)
class Decomposition:
    u: Field
    v: Field
    w: Field
    dual_u: VectorField
    dual_w: VectorField
    residual_radius: float
    texture_radius: float
    energy: float
    iterations: int
    energies: list[float] = field(default_factory=list)
    converged: bool = True
    stalled: bool = False

    def reconstruction_error(self, f: Field) -> float:
        return float(np.abs(self.u.samples + self.v.samples + self.w.samples - f.samples).max())

    def residual_certificate(self) -> Field:
        """(1/(2 lam h)) div(dual_u): should reproduce v."""
        return Field(self.residual_radius / self.v.cell_size * divergence(self.dual_u).samples)


@dataclass(frozen=True)
class RegimeReport:
    tv_f: float
    predicted_w_zero: bool
    g_test: Certificate
    predicted_all_v: Certificate
    threshold_mu_over_2lambda: float
    threshold_mu_over_4lambda: float
    threshold_half_lambda: float
    g_lower_bound: float
    g_upper_bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SplitCharacter:
    """Which second-case branch of the regime theorem a computed split sits on."""
    tv_v: float
    tv_threshold: float
    g_lower_bound_v: float
    g_threshold: float
    branch: Literal["tv-saturated", "g-saturated", "both", "neither"]


def model_energy(u: Field, v: Field, texture_radius: float, params: ModelParams) -> float:
    """Objective with norm_tv for ||u||_BV and a certified radius for ||w||_G."""
    return norm_tv(u) + params.lam * norm_l2sq(v) + params.mu * texture_radius


def g_norm_lower_bound(f: Field) -> float:
    """||f - m||^2 / norm_tv(f) <= ||f - m||_G by the BV/G pairing."""
    g = f.centered()
    tv = norm_tv(g)
    if tv == 0.0:
        return 0.0
    return norm_l2sq(g) / tv


def texture_step(sigma: Field, params: ModelParams, pcfg: ProjectionConfig | None = None) -> tuple[Field, TvBallResult]:
    """w minimising lam*||sigma - w||^2 + mu*||w||_G; ||w||_G <= result.radius is certified."""
    tv_result = project_tv_ball_certified(sigma, params.texture_budget, pcfg)
    return sigma - tv_result.projection, tv_result


def decompose(f: Field, params: ModelParams | None = None, pcfg: ProjectionConfig | None = None) -> Decomposition:
    params = params or ModelParams()
    pcfg = pcfg or ProjectionConfig.from_env()
    stop = params.outer_tolerance * (f.value_range() or 1.0)

    # w = 0 start: plain ROF
    u, _, res_u = rof(f, params.lam, pcfg)
    w = Field.zeros(f.width, f.height)
    solves_converged = res_u.converged
    state = None
    energies: list[float] = []
    outer_converged = False
    stalled = False
    iterations = 0

    for iterations in range(1, params.outer_iterations + 1):
        sigma = (f - u).centered()
        w_new, tv_result = texture_step(sigma, params, pcfg)
        u_new, _, res_new = rof(f - w_new, params.lam, pcfg, res_u.dual)
        # v is the ROF residual of f - w, so dual_u certifies it
        v = f - u_new - w_new
        energy = model_energy(u_new, v, tv_result.radius, params)

        if energies and energy > energies[-1] + ENERGY_SLACK * max(1.0, abs(energies[-1])):
            logger.warning(
                "Outer sweep %d raised the energy (%.6g > %.6g); keeping the previous iterate",
                iterations, energy, energies[-1],
            )
            stalled = True
            iterations -= 1
            break

        solves_converged = solves_converged and res_new.converged and tv_result.converged
        energies.append(energy)
        u_change = float(np.abs(u_new.samples - u.samples).max())
        w_change = float(np.abs(w_new.samples - w.samples).max())
        state = (u_new, v, w_new, res_new.dual, tv_result.dual, tv_result.radius)
        u, w, res_u = u_new, w_new, res_new
        if u_change <= stop and w_change <= stop:
            outer_converged = True
            break

    u, v, w, dual_u, dual_w, rho_w = state
    # A stall keeps the last energy-decreasing iterate but never counts as convergence
    converged = solves_converged and outer_converged and not stalled
    if not converged:
        logger.warning("Decomposition stopped after %d outer sweeps without meeting tolerance", iterations)
    return Decomposition(
        u=u,
        v=v,
        w=w,
        dual_u=dual_u,
        dual_w=dual_w,
        residual_radius=params.residual_radius,
        texture_radius=rho_w,
        energy=energies[-1],
        iterations=iterations,
        energies=energies,
        converged=converged,
        stalled=stalled,
    )


def classify_regime(f: Field, params: ModelParams, pcfg: ProjectionConfig | None = None) -> RegimeReport:
    """
    Texture-free prediction from norm_tv(f) <= mu/(4 lam), and the all-residual case
    (norm_tv(f) <= mu/(2 lam) and ||f||_G <= 1/(2 lam)) reported as yes/no/unknown
    using only sufficient certificates for the G test.
    """
    tv_f = norm_tv(f)
    half_lambda = params.residual_radius
    mu_over_2 = params.texture_budget
    mu_over_4 = params.mu / (4.0 * params.lam)

    upper, _ = g_norm_upper_bound(f)
    lower = g_norm_lower_bound(f)
    if upper <= half_lambda:
        g_test: Certificate = "yes"
    elif lower > half_lambda:
        g_test = "no"
    else:
        centered = f.centered()
        result = project_g_ball(centered, half_lambda, pcfg)
        gap = float(np.sqrt(np.square(result.projection.samples - centered.samples).sum()))
        scale = float(np.sqrt(np.square(centered.samples).sum()))
        g_test = "yes" if gap <= G_REPRODUCTION_TOLERANCE * scale else "unknown"

    if tv_f > mu_over_2 or g_test == "no":
        all_v: Certificate = "no"
    elif g_test == "yes":
        all_v = "yes"
    else:
        all_v = "unknown"

    return RegimeReport(
        tv_f=tv_f,
        predicted_w_zero=tv_f <= mu_over_4,
        g_test=g_test,
        predicted_all_v=all_v,
        threshold_mu_over_2lambda=mu_over_2,
        threshold_mu_over_4lambda=mu_over_4,
        threshold_half_lambda=half_lambda,
        g_lower_bound=lower,
        g_upper_bound=upper,
    )


def characterize_split(dec: Decomposition, params: ModelParams) -> SplitCharacter:
    tv_v = norm_tv(dec.v)
    g_low = g_norm_lower_bound(dec.v)
    tv_hit = tv_v >= SATURATION_FRACTION * params.texture_budget
    g_hit = g_low >= SATURATION_FRACTION * params.residual_radius
    if tv_hit and g_hit:
        branch = "both"
    elif tv_hit:
        branch = "tv-saturated"
    elif g_hit:
        branch = "g-saturated"
    else:
        branch = "neither"
    return SplitCharacter(tv_v, params.texture_budget, g_low, params.residual_radius, branch)
