"""Scene preparation and image post-processing."""

from src.imaging.postprocess import db_to_u8, extract_silhouette, find_peaks, sidelobe_filter, to_db
from src.imaging.textures import (
    GammaRegion,
    GammaTextureSpec,
    regions_by_height,
    synthesize_textures,
)

__all__ = [
    # Textures
    "GammaRegion",
    "GammaTextureSpec",
    "regions_by_height",
    "synthesize_textures",
    # Post-processing
    "db_to_u8",
    "extract_silhouette",
    "find_peaks",
    "sidelobe_filter",
    "to_db",
]
