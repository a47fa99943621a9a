"""
Run config: pydantic models for the CLI's JSON configs.

A config file is read first, then command-line flags override it. A manifest
from an earlier run is also accepted: its "config" block is the config.
"""

import json
from pathlib import Path
from typing import Annotated, Literal, TypeVar

from pydantic import AliasChoices, BaseModel, ConfigDict, Field

from src.config import output_dir, solver_defaults
from src.projector import ProjectionConfig
from src.synth import PRESETS, Disk, NoiseSpec, Polygon, Rectangle, SceneSpec, Texture

ModelT = TypeVar("ModelT", bound=BaseModel)


# ---------------------------------------------------------------------------
# Scene models
# ---------------------------------------------------------------------------

class DiskModel(BaseModel):
    kind: Literal["disk"] = "disk"
    cx: float
    cy: float
    radius: float = Field(..., gt=0)
    level: float = 1.0

    def to_shape(self) -> Disk:
        return Disk(self.cx, self.cy, self.radius, self.level)


class RectangleModel(BaseModel):
    kind: Literal["rectangle"] = "rectangle"
    x0: float
    y0: float
    x1: float
    y1: float
    level: float = 1.0

    def to_shape(self) -> Rectangle:
        return Rectangle(self.x0, self.y0, self.x1, self.y1, self.level)


class PolygonModel(BaseModel):
    kind: Literal["polygon"] = "polygon"
    vertices: list[tuple[float, float]] = Field(..., min_length=3)
    level: float = 1.0

    def to_shape(self) -> Polygon:
        return Polygon(tuple(tuple(v) for v in self.vertices), self.level)


ShapeModel = Annotated[DiskModel | RectangleModel | PolygonModel, Field(discriminator="kind")]


class TextureModel(BaseModel):
    amplitude: float = 1.0
    omega: float = Field(..., gt=0)
    theta: float = 0.0
    phase: float = 0.0
    envelope: ShapeModel | None = None

    def to_texture(self) -> Texture:
        envelope = self.envelope.to_shape() if self.envelope is not None else None
        return Texture(self.amplitude, self.omega, self.theta, self.phase, envelope)


class NoiseModel(BaseModel):
    sigma: float = Field(..., ge=0)
    cutoff: int = Field(..., ge=0)


class SceneModel(BaseModel):
    """A named preset, or explicit cartoon/texture lists when preset is null."""
    preset: Literal["reference", "two-shell", "four-texture"] | None = "reference"
    size: int = Field(512, ge=2)
    cartoon: list[ShapeModel] = []
    textures: list[TextureModel] = []
    noise: NoiseModel | None = None

    def to_spec(self, seed: int = 0) -> SceneSpec:
        noise = NoiseSpec(self.noise.sigma, self.noise.cutoff, seed) if self.noise is not None else None
        if self.preset is None:
            return SceneSpec(
                size=self.size,
                cartoon=tuple(s.to_shape() for s in self.cartoon),
                textures=tuple(t.to_texture() for t in self.textures),
                noise=noise,
            )
        spec = PRESETS[self.preset](size=self.size)
        return SceneSpec(spec.size, spec.cartoon, spec.textures, noise)


class SolverModel(BaseModel):
    """Unset values come from the environment defaults."""
    tau: float | None = Field(None, gt=0, le=0.125)
    max_iterations: int | None = Field(None, ge=1)
    tolerance: float | None = Field(None, gt=0)
    outer_iterations: int | None = Field(None, ge=1)
    outer_tolerance: float | None = Field(None, gt=0)

    def projection(self) -> ProjectionConfig:
        base = ProjectionConfig.from_env()
        return ProjectionConfig(
            tau=self.tau if self.tau is not None else base.tau,
            max_iterations=self.max_iterations if self.max_iterations is not None else base.max_iterations,
            tolerance=self.tolerance if self.tolerance is not None else base.tolerance,
        )

    def outer(self) -> dict:
        """ModelParams keyword overrides."""
        kwargs = {}
        if self.outer_iterations is not None:
            kwargs["outer_iterations"] = self.outer_iterations
        if self.outer_tolerance is not None:
            kwargs["outer_tolerance"] = self.outer_tolerance
        return kwargs

    def resolved(self) -> "SolverModel":
        """Every value filled in, environment defaults for the unset ones."""
        pcfg = self.projection()
        defaults = solver_defaults()
        return SolverModel(
            tau=pcfg.tau,
            max_iterations=pcfg.max_iterations,
            tolerance=pcfg.tolerance,
            outer_iterations=self.outer_iterations or defaults["outer_iterations"],
            outer_tolerance=self.outer_tolerance or defaults["outer_tolerance"],
        )


# ---------------------------------------------------------------------------
# Per-command models
# ---------------------------------------------------------------------------

class RunModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    out_dir: str = Field(default_factory=output_dir)
    seed: int = 0
    solver: SolverModel = SolverModel()


class SynthConfig(RunModel):
    scene: SceneModel = SceneModel()


class InputRunModel(RunModel):
    """Either an image path or a scene to synthesize; input wins when both are set."""
    input: str | None = None
    scene: SceneModel = SceneModel()
    lam: float = Field(1.0, gt=0, validation_alias=AliasChoices("lam", "lambda"))


class DecomposeConfig(InputRunModel):
    mu: float = Field(100.0, gt=0)


class MtsRunConfig(InputRunModel):
    mu_top: float | None = Field(None, gt=0, validation_alias=AliasChoices("mu_top", "mu"))
    scales: int = Field(3, ge=1)
    top_scale: int | None = Field(None, ge=0)
    directions: list[int] | None = None


class CurvesConfig(RunModel):
    scene: SceneModel = SceneModel()
    lam: float = Field(1.0, gt=0, validation_alias=AliasChoices("lam", "lambda"))
    mu: float = Field(100.0, gt=0)
    scale: int | None = Field(None, ge=1)
    omegas: list[float] | None = None
    texture_index: int = Field(1, ge=0)


class SpectrumConfig(InputRunModel):
    mu: float = Field(100.0, gt=0)
    scale: int | None = Field(None, ge=1)
    texture_index: int = Field(1, ge=0)


def load_config(model: type[ModelT], path: Path | None = None, overrides: dict | None = None) -> ModelT:
    """
    File values, then non-None overrides on top (flags win). Dotted override keys
    such as "scene.size" reach into nested blocks.
    """
    data: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        if isinstance(raw, dict) and "config" in raw and "version" in raw:
            raw = raw["config"]
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        data.update(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "lam":
            data.pop("lambda", None)
        if key == "mu_top":
            data.pop("mu", None)
        *parents, leaf = key.split(".")
        target = data
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = value
    return model.model_validate(data)
