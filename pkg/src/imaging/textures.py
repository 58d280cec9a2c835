"""Gamma-distributed scattering textures.

Facets are split into regions (target and background), and every facet draws
its scattering value independently from its region's Gamma(k, theta).
"""

import logging

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.errors import TextureSpecError
from src.mesh.models import TriangleMesh

logger = logging.getLogger(__name__)

# (shape, scale) fitted to a real vehicle image and its ground clutter
TARGET_GAMMA = (1.1948, 0.1508)
BACKGROUND_GAMMA = (2.7179, 0.0177)


class GammaRegion(BaseModel):
    """A set of facets sharing one Gamma distribution."""

    name: str = Field(description="Region label used in logs")
    shape: float = Field(gt=0, description="Shape parameter k")
    scale: float = Field(gt=0, description="Scale parameter theta")
    facets: list[int] = Field(default_factory=list, description="Facet indices in this region")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2


class GammaTextureSpec(BaseModel):
    """Disjoint texture regions."""

    regions: list[GammaRegion] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_disjoint(self) -> "GammaTextureSpec":
        """No facet may belong to two regions."""
        seen: dict[int, str] = {}
        for region in self.regions:
            for index in region.facets:
                if index in seen:
                    raise ValueError(
                        f"Facet {index} is in both '{seen[index]}' and '{region.name}'"
                    )
                seen[index] = region.name
        return self


def synthesize_textures(mesh: TriangleMesh, spec: GammaTextureSpec, seed: int = 0) -> np.ndarray:
    """Draw one scattering value per facet from its region's distribution.

    Regions are sampled in the order listed and facets in ascending index
    order, so the result depends only on ``seed``.

    Args:
        mesh: Mesh whose facets are textured
        spec: Regions covering every facet exactly once
        seed: Generator seed

    Returns:
        (F,) scattering values

    Raises:
        TextureSpecError: A facet index is out of range or not covered
    """
    F = mesh.n_facets
    scattering = np.full(F, np.nan)
    rng = np.random.default_rng(seed)
    for region in spec.regions:
        indices = np.array(sorted(region.facets), dtype=np.int64)
        if len(indices) and (indices.min() < 0 or indices.max() >= F):
            raise TextureSpecError(
                f"Region '{region.name}' references facets outside 0..{F - 1}"
            )
        scattering[indices] = rng.gamma(region.shape, region.scale, size=len(indices))
        logger.debug(
            f"[TEXTURE] {region.name}: {len(indices)} facets, "
            f"Gamma(k={region.shape}, theta={region.scale})"
        )
    missing = np.flatnonzero(np.isnan(scattering))
    if len(missing):
        raise TextureSpecError(
            f"{len(missing)} facets are not covered by any region (first: {int(missing[0])})"
        )
    return scattering


def regions_by_height(
    mesh: TriangleMesh,
    ground_height: float = 0.0,
    target: tuple[float, float] = TARGET_GAMMA,
    background: tuple[float, float] = BACKGROUND_GAMMA,
    tolerance: float = 1e-9,
) -> GammaTextureSpec:
    """Split facets into background (all vertices at or below ``ground_height`` in Y) and target.

    Example:
        >>> spec = regions_by_height(building_scene(2.0, 1.0))
        >>> [r.name for r in spec.regions]
        ['target', 'background']
    """
    heights = mesh.vertices[mesh.facets][:, :, 1] if mesh.n_facets else np.zeros((0, 3))
    is_ground = np.all(heights <= ground_height + tolerance, axis=1)
    return GammaTextureSpec(
        regions=[
            GammaRegion(
                name="target",
                shape=target[0],
                scale=target[1],
                facets=np.flatnonzero(~is_ground).tolist(),
            ),
            GammaRegion(
                name="background",
                shape=background[0],
                scale=background[1],
                facets=np.flatnonzero(is_ground).tolist(),
            ),
        ]
    )
