"""Pydantic models for viewing geometry and image discretization.

Angles are stored in degrees, the way they appear in config files and
reports; the geometry functions convert to radians internally.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_REFERENCE_RANGE = 10000.0
DEFAULT_DEPTH_MARGIN = 10.0


class PoseParameters(BaseModel):
    """The six quantities optimized by pose estimation.

    Attributes are degrees except ``scale``.
    """

    incident: float = Field(default=45.0, description="Incident angle alpha in degrees")
    azimuth: float = Field(default=0.0, description="Azimuth angle beta in degrees")
    euler: tuple[float, float, float] = Field(
        default=(0.0, 0.0, 0.0), description="Target attitude (theta_x, theta_y, theta_z) in degrees"
    )
    scale: float = Field(default=1.0, gt=0, description="Uniform model scale before rendering")

    def as_vector(self) -> np.ndarray:
        """Parameter vector (alpha, beta, theta_x, theta_y, theta_z) in radians, then scale."""
        return np.array(
            [
                math.radians(self.incident),
                math.radians(self.azimuth),
                *(math.radians(t) for t in self.euler),
                self.scale,
            ]
        )

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "PoseParameters":
        """Inverse of :meth:`as_vector`."""
        v = [float(x) for x in vector]
        return cls(
            incident=math.degrees(v[0]),
            azimuth=math.degrees(v[1]),
            euler=(math.degrees(v[2]), math.degrees(v[3]), math.degrees(v[4])),
            scale=v[5],
        )


class RadarView(BaseModel):
    """Viewing geometry for one rendered image.

    The radar position defaults to ``reference_range`` meters along -Z' of the
    radar frame, which puts the world origin at slant coordinate 0. Near and
    far cut-off planes default to ``reference_range -/+ 10 m``.
    """

    model_config = ConfigDict(frozen=True)

    incident: float = Field(default=45.0, description="Incident angle alpha in degrees (may be negative)")
    azimuth: float = Field(default=0.0, description="Azimuth angle beta in degrees")
    reference_range: float = Field(
        default=DEFAULT_REFERENCE_RANGE, gt=0, description="Range f from radar to scene center (m)"
    )
    radar_position: tuple[float, float, float] | None = Field(
        default=None, description="Antenna phase center p_r in world meters; None for the default"
    )
    near: float | None = Field(default=None, description="Near cut-off distance Z_n (m)")
    far: float | None = Field(default=None, description="Far cut-off distance Z_f (m)")
    euler: tuple[float, float, float] = Field(
        default=(0.0, 0.0, 0.0), description="Target attitude (theta_x, theta_y, theta_z) in degrees"
    )
    scale: float = Field(default=1.0, gt=0, description="Uniform model scale")
    name: str | None = Field(default=None, description="Label used for output file names")

    @field_validator("incident", "azimuth")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        """Angles must be finite numbers."""
        if not math.isfinite(v):
            raise ValueError(f"Angle must be finite, got {v}")
        return v

    @model_validator(mode="after")
    def validate_depth_range(self) -> "RadarView":
        """Near plane must lie in front of the far plane."""
        if self.z_near >= self.z_far:
            raise ValueError(f"near ({self.z_near}) must be < far ({self.z_far})")
        return self

    @property
    def z_near(self) -> float:
        return self.near if self.near is not None else self.reference_range - DEFAULT_DEPTH_MARGIN

    @property
    def z_far(self) -> float:
        return self.far if self.far is not None else self.reference_range + DEFAULT_DEPTH_MARGIN

    @property
    def label(self) -> str:
        """File-name label such as ``a45_b000``."""
        if self.name:
            return self.name
        return f"a{self.incident:g}_b{self.azimuth:03g}".replace("-", "m").replace(".", "p")

    @property
    def pose(self) -> PoseParameters:
        return PoseParameters(
            incident=self.incident, azimuth=self.azimuth, euler=self.euler, scale=self.scale
        )

    def with_pose(self, pose: PoseParameters) -> "RadarView":
        """Copy of this view with the pose-dependent fields replaced."""
        return self.model_copy(
            update={
                "incident": pose.incident,
                "azimuth": pose.azimuth,
                "euler": tuple(pose.euler),
                "scale": pose.scale,
            }
        )


class GridSpec(BaseModel):
    """Discretization of the mapping plane (N_z x N_x) and projection plane (N_y x N_x).

    Cell centers sit at integer plane coordinates; the scene center falls on
    the middle of the grid.
    """

    model_config = ConfigDict(frozen=True)

    n_x: int = Field(default=128, ge=1, description="Azimuth cells")
    n_z: int = Field(default=128, ge=1, description="Slant-range cells")
    n_y: int = Field(default=128, ge=1, description="Projection cells")
    r_z: float = Field(default=0.05, gt=0, description="Slant-range cell size (m)")
    r_y: float = Field(default=0.05, gt=0, description="Projection cell size (m)")
    r_x: float = Field(default=0.05, gt=0, description="Azimuth cell size (m)")

    @property
    def image_shape(self) -> tuple[int, int]:
        """(rows, cols) of mapping-plane images."""
        return (self.n_z, self.n_x)

    @property
    def projection_shape(self) -> tuple[int, int]:
        return (self.n_y, self.n_x)

    def x_to_col(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) / self.r_x + (self.n_x - 1) / 2.0

    def y_to_row(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) / self.r_y + (self.n_y - 1) / 2.0

    def slant_to_row(self, z_hat: np.ndarray) -> np.ndarray:
        return np.asarray(z_hat) / self.r_z + (self.n_z - 1) / 2.0

    def row_to_y(self, row: np.ndarray) -> np.ndarray:
        return (np.asarray(row) - (self.n_y - 1) / 2.0) * self.r_y
