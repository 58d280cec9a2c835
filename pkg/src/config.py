"""Run configuration.

Every command is driven by one :class:`RunConfig`, built by pydantic-settings
from these layers, highest priority first:

1. explicit overrides (CLI flags)
2. environment variables (``DSR_`` prefix, ``__`` between nested names)
3. a ``.env`` file
4. a config file (TOML or JSON) given with ``--config``
5. defaults
"""

import logging
from contextvars import ContextVar
from functools import lru_cache
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from src.errors import FileFormatError
from src.imaging.textures import BACKGROUND_GAMMA, TARGET_GAMMA
from src.optim.losses import LossWeights
from src.optim.reconstruct import PoseOptions, ReconstructOptions
from src.radar.geometry import standard_view_grid
from src.radar.models import (
    DEFAULT_DEPTH_MARGIN,
    DEFAULT_REFERENCE_RANGE,
    PoseParameters,
    RadarView,
)
from src.render.raster import RenderParams

logger = logging.getLogger(__name__)

CONFIG_SUFFIXES = (".toml", ".json")

# config file consulted by RunConfig's sources; set by load_config
_config_file: ContextVar[Path | None] = ContextVar("dsr_config_file", default=None)


class GridSettings(BaseModel):
    """Mapping-plane discretization shared by all views."""

    n_x: int = Field(default=128, ge=1, description="Azimuth cells")
    n_z: int = Field(default=128, ge=1, description="Slant-range cells")
    r_z: float = Field(default=0.05, gt=0, description="Slant-range cell size (m)")


class SceneSettings(BaseModel):
    """Radar distance and depth cut-off planes."""

    reference_range: float = Field(default=DEFAULT_REFERENCE_RANGE, gt=0, description="f (m)")
    depth_margin: float = Field(
        default=DEFAULT_DEPTH_MARGIN, gt=0, description="Z_n = f - margin, Z_f = f + margin"
    )
    radar_position: tuple[float, float, float] | None = Field(
        default=None, description="Antenna phase center; None puts it f meters from the origin"
    )


class ViewSettings(BaseModel):
    """One viewing direction and target pose."""

    incident: float = Field(description="Incident angle alpha in degrees")
    azimuth: float = Field(default=0.0, description="Azimuth angle beta in degrees")
    euler: tuple[float, float, float] = Field(default=(0.0, 0.0, 0.0))
    scale: float = Field(default=1.0, gt=0)
    name: str | None = None

    def to_view(self, scene: SceneSettings) -> RadarView:
        return RadarView(
            incident=self.incident,
            azimuth=self.azimuth,
            euler=self.euler,
            scale=self.scale,
            name=self.name,
            **_scene_fields(scene),
        )


class LossSettings(BaseModel):
    """Weights of the hybrid loss (the silhouette term has weight 1)."""

    lambda_tex: float = Field(default=1.0, ge=0, description="Texture (L1) weight")
    lambda_lap: float = Field(default=0.03, ge=0, description="Laplacian weight")
    lambda_flat: float = Field(default=0.003, ge=0, description="Flatness weight")

    def weights(self) -> LossWeights:
        return LossWeights(tex=self.lambda_tex, lap=self.lambda_lap, flat=self.lambda_flat)


class PoseSettings(PoseOptions):
    """Pose estimation settings with the initial and (optional) true pose."""

    init: PoseParameters = Field(default_factory=PoseParameters)
    truth: PoseParameters | None = None


class TextureSettings(BaseModel):
    """Gamma texture parameters for the target and background regions."""

    target_shape: float = Field(default=TARGET_GAMMA[0], gt=0)
    target_scale: float = Field(default=TARGET_GAMMA[1], gt=0)
    background_shape: float = Field(default=BACKGROUND_GAMMA[0], gt=0)
    background_scale: float = Field(default=BACKGROUND_GAMMA[1], gt=0)
    ground_height: float = Field(
        default=0.0, description="Facets entirely at or below this Y belong to the background"
    )


def _scene_fields(scene: SceneSettings) -> dict[str, Any]:
    f = scene.reference_range
    return {
        "reference_range": f,
        "radar_position": scene.radar_position,
        "near": f - scene.depth_margin,
        "far": f + scene.depth_margin,
    }


class RunConfig(BaseSettings):
    """Everything a command needs.

    Example:
        >>> config = RunConfig(_env_file=None, optim={"epochs": 10})
        >>> config.optim.epochs, config.optim.lr
        (10, 0.01)
    """

    model_config = SettingsConfigDict(
        env_prefix="DSR_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    meshes: list[str] = Field(default_factory=list, description="Input mesh paths")
    seed: int = Field(default=0, ge=0, description="Seed for every random choice")
    threads: int = Field(default=1, ge=1, description="Worker thread cap")
    output_dir: str = Field(default="out", description="Directory for command outputs")
    debug: bool = Field(default=False, description="Verbose logging")

    grid: GridSettings = Field(default_factory=GridSettings)
    render: RenderParams = Field(default_factory=RenderParams)
    scene: SceneSettings = Field(default_factory=SceneSettings)
    views: list[ViewSettings] = Field(
        default_factory=list, description="Explicit views; empty means the 32-view grid"
    )
    loss: LossSettings = Field(default_factory=LossSettings)
    optim: ReconstructOptions = Field(default_factory=ReconstructOptions)
    pose: PoseSettings = Field(default_factory=PoseSettings)
    texture: TextureSettings = Field(default_factory=TextureSettings)

    @field_validator("output_dir")
    @classmethod
    def validate_output_dir(cls, v: str) -> str:
        """Output directory must be a non-empty path."""
        if not v.strip():
            raise ValueError("output_dir must not be empty")
        return v

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        sources = [init_settings, env_settings, dotenv_settings]
        path = _config_file.get()
        if path is not None:
            if path.suffix.lower() == ".toml":
                sources.append(TomlConfigSettingsSource(settings_cls, toml_file=path))
            else:
                sources.append(JsonConfigSettingsSource(settings_cls, json_file=path))
        sources.append(file_secret_settings)
        return tuple(sources)

    def resolve_views(self) -> list[RadarView]:
        """Configured views, or the standard 32-view grid when none are listed."""
        if self.views:
            return [v.to_view(self.scene) for v in self.views]
        return standard_view_grid(**_scene_fields(self.scene))

    def base_view(self, pose: PoseParameters) -> RadarView:
        """A view of this scene at ``pose``."""
        return RadarView(
            incident=pose.incident,
            azimuth=pose.azimuth,
            euler=pose.euler,
            scale=pose.scale,
            **_scene_fields(self.scene),
        )


def load_config(
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    env_file: str | Path | None = ".env",
) -> RunConfig:
    """Build a RunConfig from a config file, the environment and overrides.

    Args:
        path: TOML or JSON config file, optional
        overrides: Values taking precedence over every other layer; nested
            sections are given as dicts and merged key by key
        env_file: ``.env`` file to read, None to skip

    Raises:
        FileNotFoundError: If ``path`` does not exist
        FileFormatError: If ``path`` has an unsupported suffix
        pydantic.ValidationError: If a value is invalid
    """
    config_path = None
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        if config_path.suffix.lower() not in CONFIG_SUFFIXES:
            raise FileFormatError(
                f"Unsupported config file '{config_path}', expected one of {CONFIG_SUFFIXES}"
            )
    token = _config_file.set(config_path)
    try:
        config = RunConfig(_env_file=env_file, **(overrides or {}))
    finally:
        _config_file.reset(token)
    logger.debug(f"[CONFIG] resolved from {config_path or 'defaults'}: seed={config.seed}")
    return config


@lru_cache
def get_settings() -> RunConfig:
    """Get the cached default configuration (defaults + environment).

    Call get_settings.cache_clear() to reload.
    """
    return RunConfig()
