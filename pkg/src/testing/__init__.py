"""Testing utilities for the differentiable SAR renderer.

This package provides:
- Brute-force oracles (hard rasterizer, z-buffer, dense distances, dense Laplacian)
- Canned scenes (single facet, occluding pair, random facet soups, layover buildings)
"""

from src.testing.oracles import (
    dense_edge_distance,
    dense_laplacian,
    edge_distance_map,
    hard_silhouette,
    hard_zbuffer,
)
from src.testing.scenes import (
    Scene,
    layover_building,
    occluding_pair,
    random_facet_soup,
    single_facet,
)

__all__ = [
    # Oracles
    "dense_edge_distance",
    "dense_laplacian",
    "edge_distance_map",
    "hard_silhouette",
    "hard_zbuffer",
    # Scenes
    "Scene",
    "layover_building",
    "occluding_pair",
    "random_facet_soup",
    "single_facet",
]
