"""
CLI: synthesize scenes, decompose images, run the multiscale pipelines and the
experiments, writing images, raw fields and a JSON manifest per run.

  python -m src.cli synth --out-dir output/scene
  python -m src.cli decompose --lambda 1 --mu 100 --size 256
  python -m src.cli mts --scene two-shell --size 128 --scales 2
  python -m src.cli dmts --scene four-texture --size 128 --scales 2 --directions 8,4
  python -m src.cli curves --size 512 --scale 8
  python -m src.cli spectrum --size 512

Exit codes: 0 ok, 2 invalid input, 3 finished but a solver did not converge, 1 internal error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from src import __version__
from src.config import log_level
from src.decomp import ModelParams, characterize_split, classify_regime, decompose
from src.experiments import (
    axis_energy,
    channel_containment,
    default_sweep,
    error_curve,
    spectrum_image,
)
from src.field import Field, norm_l2sq
from src.imageio import read_image, to_display, write_field_images, write_png
from src.lpbank import apply_mask, make_radial_mask, ring_energy_fraction, select_scale
from src.mts import MtsConfig, run_dmts, run_mts
from src.run_config import (
    CurvesConfig,
    DecomposeConfig,
    InputRunModel,
    MtsRunConfig,
    SpectrumConfig,
    SynthConfig,
    load_config,
)
from src.synth import GroundTruth, SceneSpec, make_scene

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

# Band kept out of the axis-energy comparison around a planted tone
TONE_RING_HALF_WIDTH = 0.1


def _configure_logging() -> None:
    logging.basicConfig(level=log_level(), format="  [%(name)s] %(message)s")


def _resolved_config(config) -> dict:
    """Config as JSON with every solver value resolved."""
    data = config.model_dump(mode="json")
    if "solver" in data:
        data["solver"] = config.solver.resolved().model_dump(mode="json")
    return data


def write_manifest(out_dir: Path, command: str, config, outputs: dict, stats: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "command": command,
        "config": _resolved_config(config),
        "outputs": outputs,
        "stats": stats,
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _load_input(cfg: InputRunModel) -> tuple[Field, SceneSpec | None, GroundTruth | None]:
    if cfg.input:
        print(f"Input: {cfg.input}")
        return read_image(Path(cfg.input)), None, None
    spec = cfg.scene.to_spec(cfg.seed)
    print(f"Synth: {cfg.scene.preset or 'custom'} scene, {spec.size} px")
    f, truth = make_scene(spec)
    return f, spec, truth


def _top_omega(spec: SceneSpec | None, index: int | None = None) -> float | None:
    if spec is None or not spec.textures:
        return None
    if index is not None:
        if index >= len(spec.textures):
            return None
        return spec.textures[index].omega
    return max(t.omega for t in spec.textures)


def _containment(truth: GroundTruth | None, channels: list[Field]) -> list[list[float]] | None:
    if truth is None:
        return None
    return [channel_containment(tone, channels) for tone in truth.textures]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: SynthConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    spec = cfg.scene.to_spec(cfg.seed)
    print(f"Synth: {cfg.scene.preset or 'custom'} scene, {spec.size} px")
    f, truth = make_scene(spec)

    outputs = {"scene": write_field_images(out_dir, "scene", f)}
    outputs["cartoon"] = write_field_images(out_dir, "cartoon", truth.cartoon)
    for i, texture in enumerate(truth.textures):
        outputs[f"texture_{i}"] = write_field_images(out_dir, f"texture_{i}", texture)
    if truth.noise is not None:
        outputs["noise"] = write_field_images(out_dir, "noise", truth.noise)
        coeff_path = out_dir / "noise_coefficients.npy"
        np.save(coeff_path, truth.noise_coefficients.coeffs)
        outputs["noise_coefficients"] = coeff_path.name

    stats = {
        "size": spec.size,
        "range": f.value_range(),
        "energy": norm_l2sq(f),
        "texture_omegas": [t.omega for t in spec.textures],
    }
    manifest = write_manifest(out_dir, "synth", cfg, outputs, stats)
    print(f"✓ Done: {manifest}")
    return True


def cmd_decompose(cfg: DecomposeConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    f, spec, _ = _load_input(cfg)
    params = ModelParams(lam=cfg.lam, mu=cfg.mu, **cfg.solver.outer())
    pcfg = cfg.solver.projection()

    regime = classify_regime(f, params, pcfg)
    print(f"Regime: TV(f)={regime.tv_f:.4g}, w=0 predicted: {regime.predicted_w_zero}, all-v: {regime.predicted_all_v}")
    print(f"Decompose: lambda={cfg.lam:g}, mu={cfg.mu:g}")
    dec = decompose(f, params, pcfg)

    outputs = {name: write_field_images(out_dir, name, part) for name, part in (("u", dec.u), ("v", dec.v), ("w", dec.w))}
    split = characterize_split(dec, params)
    stats = {
        "energy": dec.energy,
        "energies": dec.energies,
        "iterations": dec.iterations,
        "converged": dec.converged,
        "stalled": dec.stalled,
        "residual_radius": dec.residual_radius,
        "texture_radius": dec.texture_radius,
        "reconstruction_error": dec.reconstruction_error(f),
        "w_l2": float(np.sqrt(norm_l2sq(dec.w))),
        "w_max_abs": dec.w.max_abs(),
        "range": f.value_range(),
        "degenerate_mu": params.degenerate,
        "regime": regime.to_dict(),
        "split_branch": split.branch,
    }
    omega = _top_omega(spec)
    if omega is not None and omega >= 1:
        j = select_scale(omega, f.width)
        stats["w_ring_scale"] = j
        stats["w_ring_fraction"] = ring_energy_fraction(dec.w, 2.0 ** (j - 1), 2.0**j)
    manifest = write_manifest(out_dir, "decompose", cfg, outputs, stats)
    print(f"  energy={dec.energy:.6g} after {dec.iterations} sweeps, ||w||={stats['w_l2']:.4g}")
    print(f"✓ Done: {manifest}")
    return dec.converged


def _mts_config(cfg: MtsRunConfig, directional: bool) -> MtsConfig:
    outer = cfg.solver.outer()
    return MtsConfig(
        scales=cfg.scales,
        lam=cfg.lam,
        mu_top=cfg.mu_top,
        top_scale=cfg.top_scale,
        projection=cfg.solver.projection(),
        outer_iterations=outer.get("outer_iterations"),
        outer_tolerance=outer.get("outer_tolerance"),
        directions_per_scale=tuple(cfg.directions) if directional and cfg.directions else None,
    )


def cmd_mts(cfg: MtsRunConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    f, _, truth = _load_input(cfg)
    mts_cfg = _mts_config(cfg, directional=False)
    print(f"MTS: {cfg.scales} scales from j={mts_cfg.top(f.width)}")
    result = run_mts(f, mts_cfg)

    outputs = {}
    for layer in result.layers:
        outputs[f"w_j{layer.scale}"] = write_field_images(out_dir, f"w_j{layer.scale}", layer.w)
        print(f"  j={layer.scale} mu={layer.mu:.4g} energy={layer.energy:.4g} [{layer.status}]")
    outputs["residual"] = write_field_images(out_dir, "residual", result.residual)

    error = result.reconstruction_error(f)
    stats = {
        "scales": [layer.scale for layer in result.layers],
        "mu_schedule": result.mu_schedule,
        "energies": [layer.energy for layer in result.layers],
        "status": [layer.status for layer in result.layers],
        "converged": result.converged,
        "reconstruction_error": error,
        "relative_reconstruction_error": error / (f.value_range() or 1.0),
        "containment": _containment(truth, [layer.w for layer in result.layers] + [result.residual]),
    }
    manifest = write_manifest(out_dir, "mts", cfg, outputs, stats)
    print(f"✓ Done: {manifest}")
    return result.converged


def cmd_dmts(cfg: MtsRunConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    f, _, truth = _load_input(cfg)
    mts_cfg = _mts_config(cfg, directional=True)
    print(f"DMTS: {cfg.scales} scales, directions {list(mts_cfg.directions())}")
    result = run_dmts(f, mts_cfg)

    outputs = {}
    channels: list[Field] = []
    for layer in result.layers:
        for l, channel in enumerate(layer.channels):
            name = f"w_j{layer.scale}_d{l}"
            outputs[name] = write_field_images(out_dir, name, channel)
            channels.append(channel)
        print(f"  j={layer.scale} mu={layer.mu:.4g} directions={layer.directions} [{layer.status}]")
    outputs["residual"] = write_field_images(out_dir, "residual", result.residual)

    error = result.reconstruction_error(f)
    stats = {
        "scales": [layer.scale for layer in result.layers],
        "directions": [layer.directions for layer in result.layers],
        "mu_schedule": result.mu_schedule,
        "energies": [layer.energies for layer in result.layers],
        "status": [layer.status for layer in result.layers],
        "converged": result.converged,
        "reconstruction_error": error,
        "relative_reconstruction_error": error / (f.value_range() or 1.0),
        "containment": _containment(truth, channels + [result.residual]),
    }
    manifest = write_manifest(out_dir, "dmts", cfg, outputs, stats)
    print(f"✓ Done: {manifest}")
    return result.converged


def cmd_curves(cfg: CurvesConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    spec = cfg.scene.to_spec(cfg.seed)
    scale = cfg.scale
    if scale is None:
        omega = _top_omega(spec, cfg.texture_index)
        if omega is None:
            raise ValueError(f"Scene has no texture {cfg.texture_index} to pick a scale from")
        scale = select_scale(omega, spec.size)
    omegas = cfg.omegas if cfg.omegas is not None else default_sweep(scale)
    params = ModelParams(lam=cfg.lam, mu=cfg.mu, **cfg.solver.outer())
    print(f"Curves: {len(omegas)} points at scale {scale}")
    curve = error_curve(spec, omegas, params, scale, cfg.texture_index, cfg.solver.projection())

    csv_path = curve.write_csv(out_dir / "curves.csv")
    stats = {
        "scale": scale,
        "slope": curve.slope,
        "intercept": curve.intercept,
        "spearman": curve.spearman,
        "bound_constant": curve.bound_constant,
        "w_beats_f": all(r.err_w <= r.err_f for r in curve.rows),
        "converged": curve.converged,
    }
    manifest = write_manifest(out_dir, "curves", cfg, {"csv": csv_path.name}, stats)
    print(f"  slope={curve.slope:.3f} spearman={curve.spearman:.3f}")
    print(f"✓ Done: {manifest}")
    return curve.converged


def cmd_spectrum(cfg: SpectrumConfig) -> bool:
    out_dir = Path(cfg.out_dir)
    f, spec, _ = _load_input(cfg)
    omega = _top_omega(spec, cfg.texture_index)
    scale = cfg.scale
    if scale is None:
        if omega is None:
            raise ValueError("spectrum needs --scale when the input has no planted texture")
        scale = select_scale(omega, f.width)
    mask = make_radial_mask(scale, f.width, f.height)
    params = ModelParams(lam=cfg.lam, mu=cfg.mu, **cfg.solver.outer())
    print(f"Decompose: lambda={cfg.lam:g}, mu={cfg.mu:g}")
    dec = decompose(f, params, cfg.solver.projection())
    filtered_w = apply_mask(dec.w, mask)
    filtered_f = apply_mask(f, mask)

    outputs = {}
    for name, part in (("spectrum_w", filtered_w), ("spectrum_f", filtered_f)):
        levels, _ = to_display(spectrum_image(part))
        outputs[name] = write_png(out_dir / f"{name}.png", levels).name

    ring = None
    if omega is not None:
        ring = (omega * (1.0 - TONE_RING_HALF_WIDTH), omega * (1.0 + TONE_RING_HALF_WIDTH))
    axis_w = axis_energy(filtered_w, exclude_ring=ring)
    axis_f = axis_energy(filtered_f, exclude_ring=ring)
    ratio = axis_w / axis_f if axis_f > 0 else float("nan")
    stats = {
        "scale": scale,
        "axis_energy_w": axis_w,
        "axis_energy_f": axis_f,
        "axis_leakage_ratio": ratio,
        "converged": dec.converged,
    }
    manifest = write_manifest(out_dir, "spectrum", cfg, outputs, stats)
    print(f"  axis leakage ratio (w/f): {ratio:.4g}")
    print(f"✓ Done: {manifest}")
    return dec.converged


COMMANDS = {
    "synth": (SynthConfig, cmd_synth),
    "decompose": (DecomposeConfig, cmd_decompose),
    "mts": (MtsRunConfig, cmd_mts),
    "dmts": (MtsRunConfig, cmd_dmts),
    "curves": (CurvesConfig, cmd_curves),
    "spectrum": (SpectrumConfig, cmd_spectrum),
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Cartoon / texture separation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config or an earlier manifest")
        p.add_argument("--out-dir", dest="out_dir", default=None, help="Output directory")
        p.add_argument("--seed", type=int, default=None, help="Noise seed")
        p.add_argument("--scene", choices=["reference", "two-shell", "four-texture"], default=None, help="Scene preset")
        p.add_argument("--size", type=int, default=None, help="Scene grid size N")
        if name != "synth":
            p.add_argument("--lambda", dest="lam", type=float, default=None, help="Fidelity weight")
        if name in ("decompose", "mts", "dmts", "spectrum"):
            p.add_argument("--input", default=None, help="Input image (.pgm, .png or .f64)")
        if name in ("decompose", "curves", "spectrum"):
            p.add_argument("--mu", type=float, default=None, help="Texture weight")
        if name in ("mts", "dmts"):
            p.add_argument("--mu", "--mu-top", dest="mu_top", type=float, default=None, help="mu at the top scale")
            p.add_argument("--scales", type=int, default=None, help="Number of scales J")
            p.add_argument("--top-scale", dest="top_scale", type=int, default=None, help="Top scale j1")
        if name == "dmts":
            p.add_argument("--directions", type=_int_list, default=None, help="Directions per scale, e.g. 8,4")
        if name in ("curves", "spectrum"):
            p.add_argument("--scale", type=int, default=None, help="Filter scale j")
        if name == "curves":
            p.add_argument("--omegas", type=_float_list, default=None, help="Comma-separated omega2 sweep")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("out_dir", "seed", "lam", "mu", "mu_top", "scales", "top_scale", "directions", "scale", "omegas", "input")
    overrides = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    if args.scene is not None:
        overrides["scene.preset"] = args.scene
    if args.size is not None:
        overrides["scene.size"] = args.size
    return overrides


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    model, command = COMMANDS[args.command]
    try:
        cfg = load_config(model, args.config, _overrides(args))
        converged = command(cfg)
    except (ValueError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    if not converged:
        print("Warning: a solver stopped before reaching its tolerance; see the log", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
