"""Viewing geometry: radar frame, slant range, target pose and image grids."""

from src.radar.geometry import (
    ISAR_INCIDENTS,
    POSE_PARAMETERS,
    STANDARD_AZIMUTHS,
    STANDARD_INCIDENTS,
    euler_matrix,
    grid_from_view,
    isar_resolution,
    isar_view_grid,
    posed_radar_vertices,
    radar_position,
    radar_to_world,
    radar_transform,
    radar_transform_derivatives,
    rotation_matrix,
    slant_range_transform,
    standard_view_grid,
    world_to_radar,
)
from src.radar.models import GridSpec, PoseParameters, RadarView

__all__ = [
    # Models
    "GridSpec",
    "PoseParameters",
    "RadarView",
    # Transforms
    "euler_matrix",
    "posed_radar_vertices",
    "radar_position",
    "radar_to_world",
    "radar_transform",
    "radar_transform_derivatives",
    "rotation_matrix",
    "slant_range_transform",
    "world_to_radar",
    # Grids and view sets
    "ISAR_INCIDENTS",
    "POSE_PARAMETERS",
    "STANDARD_AZIMUTHS",
    "STANDARD_INCIDENTS",
    "grid_from_view",
    "isar_resolution",
    "isar_view_grid",
    "standard_view_grid",
]
