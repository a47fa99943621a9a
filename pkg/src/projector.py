"""
Projector: L2 projections onto G-balls and TV-balls, and the ROF split built
from them.

G-ball radii are in torus units. A projection of radius r is returned as
(r/h) * divergence(p) with |p| <= 1 pointwise, which certifies ||.||_G <= r
under the cell-area inner product used by norm_tv.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from src.config import solver_defaults
from src.errors import BisectionStall, NotZeroMean
from src.field import Field, VectorField, divergence, gradient, norm_tv

logger = logging.getLogger(__name__)

MAX_BISECTION_STEPS = 60
TV_BALL_TOLERANCE = 0.01
# Bracketing starts this many octaves below the certified G bound
BRACKET_OCTAVES = 30
GAP_CHECK_INTERVAL = 10


@dataclass(frozen=True)
class ProjectionConfig:
    """Fixed-point settings. tolerance bounds the certified L2 error relative to ||f||_2."""
    tau: float = 0.125
    max_iterations: int = 5000
    tolerance: float = 1e-3

    def __post_init__(self) -> None:
        if not (0.0 < self.tau <= 0.125):
            raise ValueError(f"tau must be in (0, 1/8], got {self.tau}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")

    @classmethod
    def from_env(cls) -> "ProjectionConfig":
        d = solver_defaults()
        return cls(tau=d["tau"], max_iterations=d["max_iterations"], tolerance=d["tolerance"])


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """projection = (radius/h) * div(dual); residuals[n] = ||f - projection_n||_2 (pixel sum)."""
    projection: Field
    dual: VectorField
    radius: float
    iterations: int
    final_residual: float
    converged: bool
    residuals: list[float] = field(default_factory=list)
    gap: float = 0.0

    @property
    def error_bound(self) -> float:
        """Certified ||projection - exact projection||_2 from the final duality gap."""
        return math.sqrt(2.0 * self.gap)

    @property
    def monotone(self) -> bool:
        r = np.asarray(self.residuals)
        if r.size < 2:
            return True
        slack = 1e-12 * max(1.0, float(r.max()))
        return bool(np.all(np.diff(r) <= slack))


@dataclass(frozen=True, eq=False)
class TvBallResult:
    """
    Projection of sigma onto {TV <= budget}. sigma - projection equals
    radius/h * div(dual), so its G-norm is certified <= radius.
    """
    projection: Field
    radius: float
    dual: VectorField
    steps: int
    converged: bool


def _check_zero_mean(f: Field) -> None:
    s = f.samples
    slack = 1e-9 * f.value_range() + 64 * np.finfo(float).eps * max(1.0, f.max_abs())
    if abs(float(s.mean())) > slack:
        raise NotZeroMean(f"G-ball projection needs a zero-mean field (mean {s.mean():.3e})")


def _normalized_dual(p1: np.ndarray, p2: np.ndarray) -> VectorField:
    scale = np.maximum(1.0, np.hypot(p1, p2))
    return VectorField(Field(p1 / scale), Field(p2 / scale))


def _duality_gap(f: np.ndarray, theta: float, p1: np.ndarray, p2: np.ndarray, div_p: np.ndarray) -> float:
    """
    theta * (sum|grad u| + <grad u, p>) at u = f - theta*div(p). For |p| <= 1 it is >= 0
    and ||theta*div(p) - P(f)||_2 <= sqrt(2*gap).
    """
    u = f - theta * div_p
    ux = np.roll(u, -1, axis=1) - u
    uy = np.roll(u, -1, axis=0) - u
    return max(0.0, theta * float(np.hypot(ux, uy).sum() + (ux * p1 + uy * p2).sum()))


def project_g_ball(
    f: Field,
    radius: float,
    cfg: ProjectionConfig | None = None,
    initial_dual: VectorField | None = None,
) -> ProjectionResult:
    """
    Nearest point to f in {g : ||g||_G <= radius} by the dual fixed point
    p <- (p + tau*grad(div p - f/theta)) / (1 + tau*|grad(div p - f/theta)|),
    theta = radius/h the pixel-unit radius.

    Stops once the duality gap certifies ||projection - P(f)||_2 <= tolerance*||f||_2.
    Fields whose explicit G certificate already fits the ball come back unchanged.
    """
    cfg = cfg or ProjectionConfig.from_env()
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    _check_zero_mean(f)

    f_norm = float(np.sqrt(np.square(f.samples).sum()))
    if radius == 0.0 or f.max_abs() == 0.0:
        zero = Field.zeros(f.width, f.height)
        return ProjectionResult(zero, VectorField.zeros(f.width, f.height), radius, 0, f_norm, True, [f_norm])

    bound, bound_dual = g_norm_upper_bound(f)
    if bound <= radius:
        scale = bound / radius
        dual = VectorField(Field(bound_dual.p1.samples * scale), Field(bound_dual.p2.samples * scale))
        return ProjectionResult(f, dual, radius, 0, 0.0, True, [0.0])

    theta = radius / f.cell_size
    target = f.samples / theta
    stop = cfg.tolerance * f_norm

    if initial_dual is not None and initial_dual.shape == f.shape:
        start = _normalized_dual(initial_dual.p1.samples, initial_dual.p2.samples)
        p1 = start.p1.samples.copy()
        p2 = start.p2.samples.copy()
    else:
        p1 = np.zeros(f.shape)
        p2 = np.zeros(f.shape)

    def div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a - np.roll(a, 1, axis=1)) + (b - np.roll(b, 1, axis=0))

    div_p = div(p1, p2)
    residuals = [float(np.sqrt(np.square(f.samples - theta * div_p).sum()))]
    gap = _duality_gap(f.samples, theta, p1, p2, div_p)
    converged = math.sqrt(2.0 * gap) <= stop
    iterations = 0
    tau = cfg.tau
    while not converged and iterations < cfg.max_iterations:
        iterations += 1
        g = div_p - target
        gx = np.roll(g, -1, axis=1) - g
        gy = np.roll(g, -1, axis=0) - g
        denom = 1.0 + tau * np.hypot(gx, gy)
        p1 = (p1 + tau * gx) / denom
        p2 = (p2 + tau * gy) / denom
        div_p = div(p1, p2)
        residuals.append(float(np.sqrt(np.square(f.samples - theta * div_p).sum())))
        if iterations % GAP_CHECK_INTERVAL == 0 or iterations == cfg.max_iterations:
            gap = _duality_gap(f.samples, theta, p1, p2, div_p)
            converged = math.sqrt(2.0 * gap) <= stop

    if not converged:
        logger.warning(
            "G-ball projection did not converge in %d iterations (radius %.4g, error bound %.3g)",
            cfg.max_iterations, radius, math.sqrt(2.0 * gap),
        )
    dual = _normalized_dual(p1, p2)
    div_dual = divergence(dual).samples
    projection = Field(theta * div_dual)
    final_gap = _duality_gap(f.samples, theta, dual.p1.samples, dual.p2.samples, div_dual)
    return ProjectionResult(
        projection=projection,
        dual=dual,
        radius=radius,
        iterations=iterations,
        final_residual=residuals[-1],
        converged=converged,
        residuals=residuals,
        gap=final_gap,
    )


def rof(f: Field, lam: float, cfg: ProjectionConfig | None = None, initial_dual: VectorField | None = None):
    """
    ROF split f = u + v minimising norm_tv(u) + lam*||v||^2: v is the projection of
    f - mean(f) onto the G-ball of radius 1/(2*lam); the mean stays in u.

    Returns (u, v, result).
    """
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    result = project_g_ball(f.centered(), 1.0 / (2.0 * lam), cfg, initial_dual)
    v = result.projection
    u = f - v
    return u, v, result


def g_norm_upper_bound(f: Field) -> tuple[float, VectorField]:
    """
    Explicit certificate F with f - mean = (1/h) div F: solve the periodic discrete
    Poisson equation div(grad phi) = f - mean and take F = h * grad(phi) scaled
    to torus units. Returns (sup |F|, F/sup|F|) so that (bound/h)*div(dual) = f - mean.
    """
    g = f.centered()
    if g.max_abs() == 0.0:
        return 0.0, VectorField.zeros(f.width, f.height)
    height, width = f.shape
    ky = np.fft.fftfreq(height)[:, np.newaxis]
    kx = np.fft.fftfreq(width)[np.newaxis, :]
    symbol = -(4.0 * np.sin(np.pi * kx) ** 2 + 4.0 * np.sin(np.pi * ky) ** 2)
    symbol[0, 0] = 1.0
    spectrum = scipy.fft.fft2(g.samples) / symbol
    spectrum[0, 0] = 0.0
    phi = Field(scipy.fft.ifft2(spectrum).real)
    grad_phi = gradient(phi)
    sup = grad_phi.sup_norm()
    bound = f.cell_size * sup
    dual = VectorField(Field(grad_phi.p1.samples / sup), Field(grad_phi.p2.samples / sup))
    return bound, dual


def project_tv_ball_certified(
    sigma: Field,
    budget: float,
    cfg: ProjectionConfig | None = None,
) -> TvBallResult:
    """
    Nearest point to sigma in {v : norm_tv(v) <= budget}, as v = sigma - P_G(sigma - mean, rho)
    with rho found by bisection (log scale) until norm_tv(v) is within 1% of budget.
    """
    cfg = cfg or ProjectionConfig.from_env()
    if budget < 0:
        raise ValueError(f"TV budget must be >= 0, got {budget}")
    zero_dual = VectorField.zeros(sigma.width, sigma.height)
    tv_sigma = norm_tv(sigma)
    if tv_sigma <= budget:
        return TvBallResult(sigma, 0.0, zero_dual, 0, True)

    centered = sigma.centered()
    bound, bound_dual = g_norm_upper_bound(sigma)
    mean_field = Field.constant(sigma.mean(), sigma.width, sigma.height)
    if budget == 0.0:
        return TvBallResult(mean_field, bound, bound_dual, 0, True)

    def evaluate(rho: float, warm: VectorField | None):
        result = project_g_ball(centered, rho, cfg, warm)
        v = sigma - result.projection
        return v, norm_tv(v), result

    steps = 0
    warm: VectorField | None = None
    # Upper end of the bracket is the certified bound itself: the ball then holds
    # sigma - mean and the projection is the constant mean(sigma).
    hi = bound
    hi_state = (mean_field, 0.0, bound_dual)
    lo = bound * 2.0 ** -BRACKET_OCTAVES
    while True:
        v_lo, tv_lo, res_lo = evaluate(lo, warm)
        steps += 1
        warm = res_lo.dual
        if tv_lo > budget:
            break
        if abs(tv_lo - budget) <= TV_BALL_TOLERANCE * budget:
            return TvBallResult(v_lo, lo, res_lo.dual, steps, res_lo.converged)
        hi, hi_state = lo, (v_lo, tv_lo, res_lo.dual)
        lo *= 2.0 ** -10
        if steps >= MAX_BISECTION_STEPS:
            raise BisectionStall(f"could not bracket TV budget {budget:.4g} (TV(sigma)={tv_sigma:.4g})")

    all_converged = True
    while steps < MAX_BISECTION_STEPS:
        mid = math.sqrt(lo * hi)
        v_mid, tv_mid, res_mid = evaluate(mid, warm)
        steps += 1
        warm = res_mid.dual
        all_converged = all_converged and res_mid.converged
        if abs(tv_mid - budget) <= TV_BALL_TOLERANCE * budget:
            return TvBallResult(v_mid, mid, res_mid.dual, steps, all_converged)
        if tv_mid > budget:
            lo = mid
        else:
            hi, hi_state = mid, (v_mid, tv_mid, res_mid.dual)
        if hi / lo - 1.0 < 1e-12:
            break

    logger.warning(
        "TV-ball bisection stopped at TV %.4g for budget %.4g after %d steps; returning the feasible end",
        hi_state[1], budget, steps,
    )
    return TvBallResult(hi_state[0], hi, hi_state[2], steps, False)


def project_tv_ball(sigma: Field, budget: float, cfg: ProjectionConfig | None = None) -> Field:
    return project_tv_ball_certified(sigma, budget, cfg).projection
