"""Soft rasterization, forward SAR/silhouette rendering and the backward pass."""

from src.render.gradients import (
    GradientSet,
    backward_pose,
    backward_scattering,
    backward_silhouette,
    finite_difference_oracle,
)
from src.render.raster import (
    FacetScreen2D,
    RenderParams,
    barycentric,
    coverage,
    facet_probability,
    normalized_depth,
    point_triangle_distance,
)
from src.render.sar import (
    ForwardCache,
    RenderedImage,
    energy_transfer,
    render_sar,
    render_sar_direct,
    render_silhouette,
    shadowing_weights,
)

__all__ = [
    # Soft rasterization
    "FacetScreen2D",
    "RenderParams",
    "barycentric",
    "coverage",
    "facet_probability",
    "normalized_depth",
    "point_triangle_distance",
    # Forward rendering
    "ForwardCache",
    "RenderedImage",
    "energy_transfer",
    "render_sar",
    "render_sar_direct",
    "render_silhouette",
    "shadowing_weights",
    # Backward pass
    "GradientSet",
    "backward_pose",
    "backward_scattering",
    "backward_silhouette",
    "finite_difference_oracle",
]
