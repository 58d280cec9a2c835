"""Mesh data structures.

TriangleMesh and VoxelGrid hold numpy arrays, so they are plain dataclasses
rather than pydantic models. Both validate their invariants on demand through
``validate()``; loaders and generators call it before handing a mesh out.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import MeshValidationError

logger = logging.getLogger(__name__)

# Facets below this world-space area (m^2) are rejected as degenerate.
DEGENERATE_AREA = 1e-12


@dataclass
class TriangleMesh:
    """Triangle mesh with one scattering value per facet.

    Attributes:
        vertices: (V, 3) float64 world positions in meters
        facets: (F, 3) int64 vertex indices, 0-based
        scattering: (F,) float64 non-negative scattering values
    """

    vertices: np.ndarray
    facets: np.ndarray
    scattering: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.facets = np.asarray(self.facets, dtype=np.int64).reshape(-1, 3)
        if self.scattering is None:
            self.scattering = np.ones(len(self.facets), dtype=np.float64)
        else:
            self.scattering = np.asarray(self.scattering, dtype=np.float64).reshape(-1)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def facet_areas(self) -> np.ndarray:
        """World-space area of every facet."""
        if self.n_facets == 0:
            return np.zeros(0)
        tri = self.vertices[self.facets]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def facet_normals(self) -> np.ndarray:
        """Unit normals following the right-hand rule on facet winding."""
        tri = self.vertices[self.facets]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(cross, axis=1, keepdims=True)
        return cross / np.maximum(norms, 1e-300)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with sorted rows."""
        if self.n_facets == 0:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.concatenate(
            [self.facets[:, [0, 1]], self.facets[:, [1, 2]], self.facets[:, [2, 0]]]
        )
        return np.unique(np.sort(pairs, axis=1), axis=0)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Tight axis-aligned bounding box (lo, hi)."""
        if self.n_vertices == 0:
            return np.zeros(3), np.zeros(3)
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.copy(), self.facets.copy(), self.scattering.copy())

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same topology and scattering, new vertex positions."""
        return TriangleMesh(np.array(vertices, dtype=np.float64), self.facets, self.scattering)

    def with_scattering(self, scattering: np.ndarray) -> "TriangleMesh":
        """Same geometry, new per-facet scattering."""
        return TriangleMesh(self.vertices, self.facets, np.array(scattering, dtype=np.float64))

    def validate(self) -> "TriangleMesh":
        """Check every mesh invariant.

        Returns:
            self, so calls can be chained

        Raises:
            MeshValidationError: On out-of-range or repeated indices, a
                scattering vector of the wrong length or with negative
                entries, or a facet with area below 1e-12 m^2
        """
        if not np.all(np.isfinite(self.vertices)):
            raise MeshValidationError("Vertex positions must be finite")
        if self.n_facets:
            if self.facets.min() < 0 or self.facets.max() >= self.n_vertices:
                bad = int(np.nonzero((self.facets < 0) | (self.facets >= self.n_vertices))[0][0])
                raise MeshValidationError(
                    f"Facet {bad} references vertex outside 0..{self.n_vertices - 1}: "
                    f"{self.facets[bad].tolist()}"
                )
            f = self.facets
            repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if repeated.any():
                bad = int(np.nonzero(repeated)[0][0])
                raise MeshValidationError(
                    f"Facet {bad} has a repeated index: {f[bad].tolist()}"
                )
        if len(self.scattering) != self.n_facets:
            raise MeshValidationError(
                f"Scattering has {len(self.scattering)} values for {self.n_facets} facets"
            )
        if not np.all(np.isfinite(self.scattering)) or np.any(self.scattering < 0):
            raise MeshValidationError("Scattering values must be finite and >= 0")
        if self.n_facets:
            areas = self.facet_areas()
            degenerate = areas < DEGENERATE_AREA
            if degenerate.any():
                bad = int(np.nonzero(degenerate)[0][0])
                raise MeshValidationError(
                    f"Facet {bad} is degenerate (area {areas[bad]:.3e} m^2 < {DEGENERATE_AREA})"
                )
        return self


@dataclass
class MeshTopology:
    """Adjacency derived from a mesh's facet list.

    Attributes:
        vertex_degree: (V,) number of distinct neighbors of each vertex
        vertex_neighbors: per-vertex sorted neighbor index arrays
        edges: (E, 2) unique undirected edges
        shared_edge_pairs: (P, 6) rows ``facet_a, facet_b, v1, v2, v3, v4`` where
            (v1, v2) is the shared edge and v3 / v4 are the opposite vertices of
            facet_a / facet_b
        boundary_edges: (B, 2) edges used by exactly one facet
    """

    vertex_degree: np.ndarray
    vertex_neighbors: list[np.ndarray]
    edges: np.ndarray
    shared_edge_pairs: np.ndarray
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    non_manifold_edges: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_degree)

    @property
    def is_watertight(self) -> bool:
        """True when every edge is shared by exactly two facets."""
        return len(self.boundary_edges) == 0 and self.non_manifold_edges == 0


@dataclass
class VoxelGrid:
    """Cubic occupancy grid over an axis-aligned box.

    Attributes:
        resolution: cells per side
        occupancy: (resolution,)*3 boolean array indexed [ix, iy, iz]
        bounds: (2, 3) array, row 0 the min corner, row 1 the max corner (m)
    """

    resolution: int
    occupancy: np.ndarray
    bounds: np.ndarray

    def __post_init__(self) -> None:
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        expected = (self.resolution,) * 3
        if self.occupancy.size != self.resolution**3:
            raise MeshValidationError(
                f"Occupancy has {self.occupancy.size} cells, expected {self.resolution**3}"
            )
        self.occupancy = self.occupancy.reshape(expected)

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_fraction(self) -> float:
        return self.occupied_count / self.occupancy.size

    def cell_centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        lo, hi = self.bounds[0, axis], self.bounds[1, axis]
        step = (hi - lo) / self.resolution
        return lo + (np.arange(self.resolution) + 0.5) * step
