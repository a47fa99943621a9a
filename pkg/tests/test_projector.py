"""Unit tests for src/projector.py"""

from unittest.mock import patch

import numpy as np
import pytest

from src.errors import NotZeroMean
from src.field import Field, divergence, norm_l2sq, norm_tv
from src.projector import (
    ProjectionConfig,
    g_norm_upper_bound,
    project_g_ball,
    project_tv_ball,
    project_tv_ball_certified,
    rof,
)
from src.synth import Disk, SceneSpec, make_scene


def _zero_mean(rng, size: int = 16, scale: float = 1.0) -> Field:
    return Field(scale * rng.normal(size=(size, size))).centered()


def _certificate(result, f: Field) -> np.ndarray:
    return result.radius / f.cell_size * divergence(result.dual).samples


# ---------------------------------------------------------------------------
# ProjectionConfig
# ---------------------------------------------------------------------------

class TestProjectionConfig:
    def test_defaults(self):
        cfg = ProjectionConfig()
        assert cfg.tau == 0.125
        assert cfg.max_iterations == 5000

    @pytest.mark.parametrize("kwargs", [{"tau": 0.2}, {"tau": 0.0}, {"max_iterations": 0}, {"tolerance": 0.0}])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ProjectionConfig(**kwargs)

    def test_from_env(self):
        with patch.dict("os.environ", {"TEXSEP_TAU": "0.1", "TEXSEP_MAX_ITERATIONS": "77"}):
            cfg = ProjectionConfig.from_env()
        assert cfg.tau == 0.1
        assert cfg.max_iterations == 77


# ---------------------------------------------------------------------------
# G-ball projection
# ---------------------------------------------------------------------------

class TestProjectGBall:
    def test_requires_zero_mean(self):
        with pytest.raises(NotZeroMean):
            project_g_ball(Field.constant(1.0, 8), 0.5)

    def test_negative_radius(self, rng):
        with pytest.raises(ValueError):
            project_g_ball(_zero_mean(rng), -1.0)

    def test_zero_radius_gives_zero(self, rng):
        result = project_g_ball(_zero_mean(rng), 0.0)
        assert result.projection.max_abs() == 0.0
        assert result.converged

    def test_zero_field(self):
        result = project_g_ball(Field.zeros(8), 0.3)
        assert result.projection.max_abs() == 0.0

    def test_field_inside_ball_is_reproduced(self):
        f = Field.from_function(lambda x, y: 0.01 * np.cos(2 * x) + 0 * y, 32)
        cfg = ProjectionConfig(max_iterations=20000, tolerance=1e-9)
        result = project_g_ball(f, 1.0, cfg)
        assert np.abs(result.projection.samples - f.samples).max() <= 1e-4 * f.value_range()

    def test_dual_feasible_and_certifies_projection(self, rng):
        f = _zero_mean(rng)
        result = project_g_ball(f, 0.05, ProjectionConfig(max_iterations=2000))
        assert result.dual.sup_norm() <= 1.0 + 1e-9
        np.testing.assert_allclose(_certificate(result, f), result.projection.samples, atol=1e-12)

    def test_residual_history_is_monotone(self, rng):
        f = _zero_mean(rng)
        result = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=500, tolerance=1e-8))
        assert len(result.residuals) == result.iterations + 1
        assert result.monotone

    def test_reports_non_convergence(self, rng, caplog):
        f = _zero_mean(rng)
        result = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=2, tolerance=1e-12))
        assert not result.converged
        assert result.iterations == 2
        assert "did not converge" in caplog.text

    def test_warm_restart_at_projection_is_exact(self, rng):
        f = _zero_mean(rng)
        cfg = ProjectionConfig(max_iterations=3000, tolerance=1e-4)
        first = project_g_ball(f, 0.1, cfg)
        again = project_g_ball(first.projection, 0.1, cfg, initial_dual=first.dual)
        assert again.iterations == 0
        assert again.converged
        assert np.abs(again.projection.samples - first.projection.samples).max() <= 1e-12 * first.projection.value_range()

    def test_cold_repeat_stays_within_certified_bound(self, rng):
        f = _zero_mean(rng)
        cfg = ProjectionConfig(max_iterations=3000, tolerance=1e-4)
        first = project_g_ball(f, 0.1, cfg).projection
        second = project_g_ball(first, 0.1, cfg)
        moved = float(np.sqrt(np.square(second.projection.samples - first.samples).sum()))
        assert moved <= second.error_bound + 1e-9
        if second.converged:
            assert moved <= 1e-4 * float(np.sqrt(np.square(first.samples).sum())) + 1e-9

    def test_certified_member_repeats_exactly(self):
        f = Field.from_function(lambda x, y: 0.05 * np.cos(3 * x) * np.sin(2 * y), 32)
        bound, _ = g_norm_upper_bound(f)
        once = project_g_ball(f, 2.0 * bound)
        twice = project_g_ball(once.projection, 2.0 * bound)
        assert once.projection is f
        assert twice.projection is f
        assert once.iterations == 0

    def test_converged_result_meets_certified_tolerance(self, rng):
        f = _zero_mean(rng)
        result = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=5000, tolerance=1e-2))
        assert result.gap >= 0.0
        if result.converged:
            f_norm = float(np.sqrt(np.square(f.samples).sum()))
            assert result.error_bound <= 1e-2 * f_norm * (1 + 1e-6) + 1e-12

    def test_error_bounds_bracket_reference_run(self, rng):
        f = _zero_mean(rng)
        short = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=200, tolerance=1e-12))
        long = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=20000, tolerance=1e-12))
        distance = float(np.sqrt(np.square(short.projection.samples - long.projection.samples).sum()))
        assert distance <= short.error_bound + long.error_bound + 1e-9

    def test_tolerance_run_matches_long_reference_run(self):
        f = Field(np.random.default_rng(7).normal(size=(4, 4))).centered()
        short = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=100000, tolerance=1e-6))
        long = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=100000, tolerance=1e-300))
        distance = float(np.sqrt(np.square(short.projection.samples - long.projection.samples).sum()))
        assert distance <= short.error_bound + long.error_bound + 1e-12

    @pytest.mark.slow
    def test_matches_million_iteration_oracle(self):
        f = Field(np.random.default_rng(7).normal(size=(4, 4))).centered()
        oracle = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=1_000_000, tolerance=1e-300))
        result = project_g_ball(f, 0.1, ProjectionConfig(max_iterations=200000, tolerance=1e-8))
        distance = float(np.sqrt(np.square(result.projection.samples - oracle.projection.samples).sum()))
        assert distance <= result.error_bound + oracle.error_bound + 1e-12


# ---------------------------------------------------------------------------
# ROF
# ---------------------------------------------------------------------------

class TestRof:
    def test_split_is_additive_and_keeps_mean(self, rng):
        f = Field(rng.normal(2.0, 1.0, (16, 16)))
        u, v, result = rof(f, 1.0, ProjectionConfig(max_iterations=1000))
        assert np.abs(u.samples + v.samples - f.samples).max() <= 1e-12
        assert u.mean() == pytest.approx(f.mean(), abs=1e-12)
        assert abs(v.mean()) < 1e-12

    def test_residual_in_g_ball(self, rng):
        f = Field(rng.normal(size=(16, 16)))
        _, v, result = rof(f, 2.0, ProjectionConfig(max_iterations=1000))
        assert result.radius == pytest.approx(0.25)
        assert result.dual.sup_norm() <= 1.0 + 1e-9
        np.testing.assert_allclose(_certificate(result, f), v.samples, atol=1e-12)

    def test_rof_lowers_total_variation(self, rng):
        f = Field(rng.normal(size=(16, 16)))
        u, _, _ = rof(f, 1.0, ProjectionConfig(max_iterations=1000))
        assert norm_tv(u) < norm_tv(f)

    def test_rejects_bad_lambda(self, rng):
        with pytest.raises(ValueError):
            rof(Field(rng.normal(size=(8, 8))), 0.0)

    def test_oracle_on_seeded_input(self):
        f = Field(np.random.default_rng(7).normal(size=(4, 4)))
        u_short, _, short = rof(f, 1.0, ProjectionConfig(max_iterations=100000, tolerance=1e-6))
        u_long, _, long = rof(f, 1.0, ProjectionConfig(max_iterations=100000, tolerance=1e-300))
        distance = float(np.sqrt(np.square(u_short.samples - u_long.samples).sum()))
        assert distance <= short.error_bound + long.error_bound + 1e-12


# ---------------------------------------------------------------------------
# G-norm certificate
# ---------------------------------------------------------------------------

class TestGNormUpperBound:
    def test_certificate_reproduces_field(self, rng):
        f = Field(rng.normal(1.0, 1.0, (16, 16)))
        bound, dual = g_norm_upper_bound(f)
        rebuilt = bound / f.cell_size * divergence(dual).samples
        np.testing.assert_allclose(rebuilt, f.centered().samples, atol=1e-10)
        assert dual.sup_norm() == pytest.approx(1.0)

    def test_constant_has_zero_bound(self):
        bound, dual = g_norm_upper_bound(Field.constant(2.0, 8))
        assert bound == 0.0
        assert dual.sup_norm() == 0.0

    def test_oscillation_lowers_bound(self):
        low = Field.from_function(lambda x, y: np.cos(2 * x) + 0 * y, 64)
        high = Field.from_function(lambda x, y: np.cos(16 * x) + 0 * y, 64)
        assert g_norm_upper_bound(high)[0] < g_norm_upper_bound(low)[0] / 4

    def test_projection_with_bound_radius_is_identity(self):
        f = Field.from_function(lambda x, y: np.cos(3 * x) * np.cos(2 * y), 16)
        bound, _ = g_norm_upper_bound(f)
        result = project_g_ball(f, bound * 1.5, ProjectionConfig(max_iterations=20000, tolerance=1e-10))
        assert np.abs(result.projection.samples - f.samples).max() <= 1e-4


# ---------------------------------------------------------------------------
# TV-ball projection
# ---------------------------------------------------------------------------

class TestProjectTvBall:
    def test_inside_ball_is_unchanged(self, rng):
        sigma = _zero_mean(rng, 8)
        result = project_tv_ball_certified(sigma, norm_tv(sigma) * 2)
        assert result.projection is sigma
        assert result.radius == 0.0

    def test_zero_budget_gives_mean(self, rng):
        sigma = Field(rng.normal(0.5, 1.0, (8, 8)))
        result = project_tv_ball_certified(sigma, 0.0)
        assert np.allclose(result.projection.samples, sigma.mean())
        rebuilt = result.radius / sigma.cell_size * divergence(result.dual).samples
        np.testing.assert_allclose(rebuilt, sigma.centered().samples, atol=1e-10)

    def test_hits_budget_and_certifies_remainder(self, rng):
        sigma = _zero_mean(rng)
        budget = 0.5 * norm_tv(sigma)
        result = project_tv_ball_certified(sigma, budget, ProjectionConfig(max_iterations=2000, tolerance=1e-6))
        tv = norm_tv(result.projection)
        assert tv <= 1.01 * budget
        if result.converged:
            assert abs(tv - budget) <= 0.01 * budget
        assert result.projection.mean() == pytest.approx(sigma.mean(), abs=1e-12)
        remainder = sigma.samples - result.projection.samples
        rebuilt = result.radius / sigma.cell_size * divergence(result.dual).samples
        np.testing.assert_allclose(rebuilt, remainder, atol=1e-9)
        assert result.dual.sup_norm() <= 1.0 + 1e-9

    def test_plain_projection_returns_field(self, rng):
        sigma = _zero_mean(rng, 8)
        out = project_tv_ball(sigma, 0.3 * norm_tv(sigma), ProjectionConfig(max_iterations=1000))
        assert isinstance(out, Field)
        assert norm_tv(out) <= 0.3 * norm_tv(sigma) * 1.01

    def test_negative_budget(self, rng):
        with pytest.raises(ValueError):
            project_tv_ball_certified(_zero_mean(rng, 8), -1.0)

    def test_beats_random_points_of_the_ball(self, rng):
        f, _ = make_scene(SceneSpec(size=8, cartoon=(Disk(0.5, 0.5, 0.3, level=1.0),)))
        sigma = f + Field(0.05 * rng.normal(size=(8, 8)))
        budget = 0.5 * norm_tv(sigma)
        result = project_tv_ball_certified(sigma, budget, ProjectionConfig(max_iterations=20000, tolerance=1e-6))
        projected = result.projection
        assert abs(norm_tv(projected) - budget) <= 0.01 * budget
        # feasible set of the returned point: the TV ball it actually reaches
        reach = norm_tv(projected)
        best = norm_l2sq(sigma - projected)
        mean = projected.mean()
        for _ in range(1000):
            candidate = projected + Field(rng.uniform(0.01, 0.3) * rng.normal(size=(8, 8)))
            tv = norm_tv(candidate)
            if tv > reach:
                candidate = Field(mean + (candidate.samples - mean) * (reach / tv))
            assert best <= norm_l2sq(sigma - candidate) + 1e-9
