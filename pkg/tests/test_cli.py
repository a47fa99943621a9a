"""Unit tests for src/cli.py"""

import json
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from src import cli
from src.cli import EXIT_INTERNAL, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, main
from src.field import Field
from src.imageio import read_raw, write_raw
from src.run_config import SynthConfig

SMALL_SOLVER = {"max_iterations": 150, "tolerance": 1e-3, "outer_iterations": 1}


def _config(tmp_path, name: str = "config.json", **data) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _manifest(out_dir, command: str) -> dict:
    return json.loads((out_dir / f"{command}_manifest.json").read_text())


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

class TestSynth:
    def test_writes_scene_and_truth(self, tmp_path, capsys):
        out = tmp_path / "scene"
        code = main(["synth", "--scene", "two-shell", "--size", "64", "--out-dir", str(out)])
        assert code == EXIT_OK
        for name in ("scene", "cartoon", "texture_0", "texture_1"):
            assert (out / f"{name}.f64").exists()
            assert (out / f"{name}.png").exists()
        manifest = _manifest(out, "synth")
        assert manifest["command"] == "synth"
        assert manifest["config"]["scene"]["size"] == 64
        assert manifest["stats"]["texture_omegas"] == [16.0, 4.0]
        assert "✓ Done" in capsys.readouterr().out

    def test_manifest_records_resolved_solver(self, tmp_path):
        out = tmp_path / "scene"
        with patch.dict("os.environ", {"TEXSEP_MAX_ITERATIONS": "321"}):
            assert main(["synth", "--scene", "two-shell", "--size", "32", "--out-dir", str(out)]) == EXIT_OK
        solver = _manifest(out, "synth")["config"]["solver"]
        assert solver["max_iterations"] == 321
        assert None not in solver.values()

        replay = tmp_path / "replay"
        assert main(["synth", "--config", str(out / "synth_manifest.json"), "--out-dir", str(replay)]) == EXIT_OK
        assert _manifest(replay, "synth")["config"]["solver"] == solver

    def test_parts_sum_to_scene(self, tmp_path):
        out = tmp_path / "scene"
        assert main(["synth", "--scene", "two-shell", "--size", "32", "--out-dir", str(out)]) == EXIT_OK
        scene = read_raw(out / "scene.f64").samples
        parts = sum(read_raw(out / f"{n}.f64").samples for n in ("cartoon", "texture_0", "texture_1"))
        np.testing.assert_allclose(scene, parts, atol=1e-12)

    def test_seed_changes_only_noise(self, tmp_path):
        config = _config(tmp_path, scene={"preset": "two-shell", "size": 32, "noise": {"sigma": 0.1, "cutoff": 4}})
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--config", config, "--seed", "1", "--out-dir", str(a)]) == EXIT_OK
        assert main(["synth", "--config", config, "--seed", "2", "--out-dir", str(b)]) == EXIT_OK
        for name in ("cartoon", "texture_0", "texture_1"):
            assert (a / f"{name}.f64").read_bytes() == (b / f"{name}.f64").read_bytes()
        assert (a / "noise.f64").read_bytes() != (b / "noise.f64").read_bytes()
        assert np.load(a / "noise_coefficients.npy").shape == (9, 9)

    def test_same_seed_is_reproducible(self, tmp_path):
        config = _config(tmp_path, scene={"preset": "two-shell", "size": 32, "noise": {"sigma": 0.1, "cutoff": 4}})
        a, b = tmp_path / "a", tmp_path / "b"
        main(["synth", "--config", config, "--out-dir", str(a)])
        main(["synth", "--config", config, "--out-dir", str(b)])
        assert (a / "scene.f64").read_bytes() == (b / "scene.f64").read_bytes()

    def test_texture_above_nyquist(self, tmp_path, capsys):
        config = _config(tmp_path, scene={"preset": None, "size": 64, "textures": [{"omega": 40}]})
        assert main(["synth", "--config", config, "--out-dir", str(tmp_path / "x")]) == EXIT_INVALID
        assert "Nyquist" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        config = _config(tmp_path, mu=100.0)
        assert main(["synth", "--config", config, "--out-dir", str(tmp_path / "x")]) == EXIT_INVALID

    def test_missing_config(self, tmp_path):
        assert main(["synth", "--config", str(tmp_path / "nope.json")]) == EXIT_INVALID

    def test_internal_error(self, tmp_path, capsys):
        boom = MagicMock(side_effect=RuntimeError("disk on fire"))
        with patch.dict(cli.COMMANDS, {"synth": (SynthConfig, boom)}):
            assert main(["synth", "--out-dir", str(tmp_path)]) == EXIT_INTERNAL
        boom.assert_called_once()
        assert "disk on fire" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------

class TestDecompose:
    def test_constant_input(self, tmp_path):
        image = write_raw(tmp_path / "flat.f64", Field.constant(0.25, 16))
        out = tmp_path / "dec"
        assert main(["decompose", "--input", str(image), "--out-dir", str(out)]) == EXIT_OK
        np.testing.assert_array_equal(read_raw(out / "u.f64").samples, np.full((16, 16), 0.25))
        assert np.all(read_raw(out / "v.f64").samples == 0.0)
        assert np.all(read_raw(out / "w.f64").samples == 0.0)
        stats = _manifest(out, "decompose")["stats"]
        assert stats["converged"]
        assert stats["regime"]["predicted_w_zero"]
        assert stats["split_branch"] == "neither"

    def test_png_input(self, tmp_path):
        from PIL import Image

        levels = np.zeros((16, 16), dtype=np.uint8)
        levels[4:12, 4:12] = 200
        Image.fromarray(levels).save(tmp_path / "square.png")
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "dec"
        code = main(["decompose", "--config", config, "--input", str(tmp_path / "square.png"), "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        stats = _manifest(out, "decompose")["stats"]
        assert stats["reconstruction_error"] <= 1e-12

    def test_scene_stats(self, tmp_path):
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "dec"
        code = main(["decompose", "--config", config, "--scene", "two-shell", "--size", "32",
                     "--lambda", "1", "--mu", "50", "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        manifest = _manifest(out, "decompose")
        assert manifest["config"]["lam"] == 1.0 and manifest["config"]["mu"] == 50.0
        assert manifest["stats"]["w_ring_scale"] == 3
        assert 0.0 <= manifest["stats"]["w_ring_fraction"] <= 1.0
        assert set(manifest["outputs"]) == {"u", "v", "w"}

    def test_not_converged_exit(self, tmp_path, capsys):
        config = _config(tmp_path, solver={"max_iterations": 1, "outer_iterations": 1})
        out = tmp_path / "dec"
        code = main(["decompose", "--config", config, "--scene", "two-shell", "--size", "32", "--out-dir", str(out)])
        assert code == EXIT_NOT_CONVERGED
        assert (out / "w.f64").exists()
        assert "before reaching its tolerance" in capsys.readouterr().err

    def test_energy_stall_exits_not_converged(self, tmp_path):
        config = _config(tmp_path, solver={"max_iterations": 150, "outer_iterations": 3, "outer_tolerance": 1e-12})
        out = tmp_path / "dec"
        with patch("src.decomp.model_energy", side_effect=[1.0, 2.0, 3.0]):
            code = main(["decompose", "--config", config, "--scene", "two-shell", "--size", "32",
                         "--lambda", "1", "--mu", "1", "--out-dir", str(out)])
        assert code == EXIT_NOT_CONVERGED
        stats = _manifest(out, "decompose")["stats"]
        assert stats["converged"] is False

    def test_missing_input(self, tmp_path):
        assert main(["decompose", "--input", str(tmp_path / "none.png"), "--out-dir", str(tmp_path)]) == EXIT_INVALID

    def test_bad_lambda(self, tmp_path):
        assert main(["decompose", "--lambda", "-1", "--out-dir", str(tmp_path)]) == EXIT_INVALID


# ---------------------------------------------------------------------------
# mts / dmts
# ---------------------------------------------------------------------------

class TestMultiscale:
    def test_mts(self, tmp_path):
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "mts"
        code = main(["mts", "--config", config, "--scene", "two-shell", "--size", "32", "--scales", "2",
                     "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        manifest = _manifest(out, "mts")
        assert manifest["stats"]["scales"] == [3, 2]
        assert manifest["stats"]["mu_schedule"] == [3.125, 1.5625]
        assert manifest["stats"]["relative_reconstruction_error"] <= 1e-10
        assert len(manifest["stats"]["containment"]) == 2
        assert (out / "w_j3.f64").exists() and (out / "residual.f64").exists()

    def test_mts_explicit_mu(self, tmp_path):
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "mts"
        main(["mts", "--config", config, "--scene", "two-shell", "--size", "32", "--scales", "1",
              "--mu", "40", "--top-scale", "3", "--out-dir", str(out)])
        assert _manifest(out, "mts")["stats"]["mu_schedule"] == [40.0]

    def test_dmts(self, tmp_path):
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "dmts"
        code = main(["dmts", "--config", config, "--scene", "two-shell", "--size", "32", "--scales", "2",
                     "--directions", "4,2", "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        stats = _manifest(out, "dmts")["stats"]
        assert stats["directions"] == [4, 2]
        assert stats["relative_reconstruction_error"] <= 1e-10
        assert len(stats["containment"][0]) == 4 + 2 + 1
        assert (out / "w_j3_d3.f64").exists()

    def test_scale_above_grid(self, tmp_path):
        assert main(["mts", "--scene", "two-shell", "--size", "32", "--top-scale", "5",
                     "--out-dir", str(tmp_path)]) == EXIT_INVALID


# ---------------------------------------------------------------------------
# curves / spectrum
# ---------------------------------------------------------------------------

CUSTOM_SCENE = {
    "preset": None,
    "size": 32,
    "cartoon": [{"kind": "disk", "cx": 0.5, "cy": 0.5, "radius": 0.25}],
    "textures": [{"amplitude": 0.3, "omega": 3}, {"amplitude": 0.3, "omega": 6}],
}


class TestCurves:
    def test_small_sweep_and_replay(self, tmp_path):
        config = _config(tmp_path, scene=CUSTOM_SCENE, mu=20.0, solver=SMALL_SOLVER)
        first = tmp_path / "first"
        code = main(["curves", "--config", config, "--scale", "3", "--omegas", "5,6", "--out-dir", str(first)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        lines = (first / "curves.csv").read_text().splitlines()
        assert lines[0] == "omega2,err_w,err_f"
        assert [line.split(",")[0] for line in lines[1:3]] == ["5", "6"]
        assert lines[-1].startswith("# slope=")

        second = tmp_path / "second"
        manifest = str(first / "curves_manifest.json")
        assert main(["curves", "--config", manifest, "--out-dir", str(second)]) == code
        assert (second / "curves.csv").read_text() == (first / "curves.csv").read_text()

    def test_default_sweep(self, tmp_path):
        config = _config(tmp_path, scene=CUSTOM_SCENE, mu=20.0,
                         solver={"max_iterations": 80, "tolerance": 1e-3, "outer_iterations": 1})
        out = tmp_path / "curves"
        code = main(["curves", "--config", config, "--scale", "3", "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        assert len((out / "curves.csv").read_text().splitlines()) == 1 + 12 + 1
        stats = _manifest(out, "curves")["stats"]
        assert stats["scale"] == 3
        assert isinstance(stats["w_beats_f"], bool)

    def test_unconverged_points_set_exit_code(self, tmp_path):
        config = _config(tmp_path, scene=CUSTOM_SCENE, mu=20.0, solver={"max_iterations": 1, "outer_iterations": 1})
        out = tmp_path / "curves"
        assert main(["curves", "--config", config, "--scale", "3", "--omegas", "5,6",
                     "--out-dir", str(out)]) == EXIT_NOT_CONVERGED
        assert _manifest(out, "curves")["stats"]["converged"] is False

    def test_scale_from_texture(self, tmp_path):
        config = _config(tmp_path, scene=CUSTOM_SCENE, solver=SMALL_SOLVER)
        out = tmp_path / "curves"
        main(["curves", "--config", config, "--omegas", "5", "--out-dir", str(out)])
        assert _manifest(out, "curves")["stats"]["scale"] == 3

    def test_empty_sweep(self, tmp_path, capsys):
        config = _config(tmp_path, scene=CUSTOM_SCENE)
        assert main(["curves", "--config", config, "--scale", "3", "--omegas", "",
                     "--out-dir", str(tmp_path)]) == EXIT_INVALID
        assert "empty" in capsys.readouterr().err

    def test_sweep_outside_ring(self, tmp_path):
        config = _config(tmp_path, scene=CUSTOM_SCENE)
        assert main(["curves", "--config", config, "--scale", "3", "--omegas", "1.5,6",
                     "--out-dir", str(tmp_path)]) == EXIT_INVALID


class TestSpectrum:
    def test_reference_scene(self, tmp_path):
        config = _config(tmp_path, solver=SMALL_SOLVER)
        out = tmp_path / "spec"
        code = main(["spectrum", "--config", config, "--scene", "reference", "--size", "64", "--out-dir", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        assert (out / "spectrum_w.png").exists() and (out / "spectrum_f.png").exists()
        stats = _manifest(out, "spectrum")["stats"]
        assert stats["scale"] == 5
        assert stats["axis_energy_f"] > 0.0

    def test_input_needs_scale(self, tmp_path):
        image = write_raw(tmp_path / "flat.f64", Field.constant(1.0, 16))
        assert main(["spectrum", "--input", str(image), "--out-dir", str(tmp_path / "s")]) == EXIT_INVALID


@pytest.mark.slow
class TestFullSize:
    def test_reference_decomposition(self, tmp_path):
        out = tmp_path / "dec"
        main(["decompose", "--scene", "reference", "--out-dir", str(out)])
        stats = _manifest(out, "decompose")["stats"]
        assert stats["w_ring_scale"] == 8
        assert stats["w_ring_fraction"] >= 0.6
        assert not stats["regime"]["predicted_w_zero"]

    def test_reference_axis_leakage(self, tmp_path):
        out = tmp_path / "spec"
        main(["spectrum", "--scene", "reference", "--out-dir", str(out)])
        assert _manifest(out, "spectrum")["stats"]["axis_leakage_ratio"] < 1.0
