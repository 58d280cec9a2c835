"""Procedural meshes: the reconstruction template and the bundled test scenes.

World axes follow the radar convention used throughout the package: Y is up,
the ground is the plane Y = 0.
"""

import logging

import numpy as np

from src.errors import MeshValidationError
from src.mesh.models import TriangleMesh

logger = logging.getLogger(__name__)

MAX_SUBDIVISIONS = 6

# Unit box corners and outward-wound facets (indices into _BOX_CORNERS)
_BOX_CORNERS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=np.float64,
)
_BOX_FACETS = np.array(
    [
        [0, 3, 2], [0, 2, 1],  # z = 0
        [4, 5, 6], [4, 6, 7],  # z = 1
        [0, 1, 5], [0, 5, 4],  # y = 0
        [3, 7, 6], [3, 6, 2],  # y = 1
        [0, 4, 7], [0, 7, 3],  # x = 0
        [1, 2, 6], [1, 6, 5],  # x = 1
    ],
    dtype=np.int64,
)

# Hull 3.0 x 0.8 x 1.6 m with a 1.2 x 0.5 x 1.0 m turret on top.
_TANK_VERTICES = np.array(
    [
        [-1.5, 0.0, -0.8], [1.5, 0.0, -0.8], [1.5, 0.0, 0.8], [-1.5, 0.0, 0.8],
        [-1.5, 0.8, -0.8], [1.5, 0.8, -0.8], [1.5, 0.8, 0.8], [-1.5, 0.8, 0.8],
        [-0.6, 0.8, -0.5], [0.6, 0.8, -0.5], [0.6, 0.8, 0.5], [-0.6, 0.8, 0.5],
        [-0.6, 1.3, -0.5], [0.6, 1.3, -0.5], [0.6, 1.3, 0.5], [-0.6, 1.3, 0.5],
    ],
    dtype=np.float64,
)
_TANK_FACETS = (
    np.array(
        [
            [1, 2, 3], [1, 3, 4],
            [5, 8, 12], [5, 12, 9],
            [8, 7, 11], [8, 11, 12],
            [7, 6, 10], [7, 10, 11],
            [6, 5, 9], [6, 9, 10],
            [13, 16, 15], [13, 15, 14],
            [1, 5, 6], [1, 6, 2],
            [4, 3, 7], [4, 7, 8],
            [1, 4, 8], [1, 8, 5],
            [2, 6, 7], [2, 7, 3],
            [9, 13, 14], [9, 14, 10],
            [12, 11, 15], [12, 15, 16],
            [9, 12, 16], [9, 16, 13],
            [10, 14, 15], [10, 15, 11],
        ],
        dtype=np.int64,
    )
    - 1
)


def _orient_outward(vertices: np.ndarray, facets: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Flip facets whose normal points toward ``center`` (convex pieces only)."""
    tri = vertices[facets]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    outward = np.einsum("ij,ij->i", normals, tri.mean(axis=1) - center) >= 0
    fixed = facets.copy()
    fixed[~outward] = fixed[~outward][:, [0, 2, 1]]
    return fixed


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    """Build a sphere by repeated midpoint subdivision of an icosahedron.

    Args:
        subdivisions: Subdivision level, 0..6 (20 * 4**subdivisions facets)
        radius: Sphere radius in meters

    Returns:
        Watertight sphere mesh centered at the origin

    Raises:
        MeshValidationError: If subdivisions is outside 0..6 or radius <= 0

    Example:
        >>> icosphere(0).n_facets
        20
        >>> icosphere(2).n_facets
        320
    """
    if not 0 <= subdivisions <= MAX_SUBDIVISIONS:
        raise MeshValidationError(
            f"subdivisions must be in 0..{MAX_SUBDIVISIONS}, got {subdivisions}"
        )
    if radius <= 0:
        raise MeshValidationError(f"radius must be positive, got {radius}")

    t = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    vertices = [list(np.asarray(v, dtype=np.float64) / np.linalg.norm(v)) for v in vertices]
    facets = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]

    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoints:
                m = np.add(vertices[a], vertices[b])
                vertices.append(list(m / np.linalg.norm(m)))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in facets:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
        facets = refined

    unit = np.asarray(vertices, dtype=np.float64)
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    mesh = TriangleMesh(unit * radius, np.asarray(facets, dtype=np.int64))
    mesh.facets = _orient_outward(mesh.vertices, mesh.facets, np.zeros(3))
    return mesh.validate()


def box(
    size: tuple[float, float, float] = (1.0, 1.0, 1.0),
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
    scattering: float = 1.0,
) -> TriangleMesh:
    """Axis-aligned closed box, 8 vertices and 12 outward-wound facets."""
    size_arr = np.asarray(size, dtype=np.float64)
    if np.any(size_arr <= 0):
        raise MeshValidationError(f"Box size must be positive, got {tuple(size)}")
    vertices = (_BOX_CORNERS - 0.5) * size_arr + np.asarray(center, dtype=np.float64)
    return TriangleMesh(
        vertices, _BOX_FACETS.copy(), np.full(len(_BOX_FACETS), float(scattering))
    ).validate()


def unit_cube() -> TriangleMesh:
    """The cube [0, 1]^3."""
    return box((1.0, 1.0, 1.0), (0.5, 0.5, 0.5))


def cuboid_with_turret(scale: float = 1.0) -> TriangleMesh:
    """Watertight tank-like fixture: a hull box with a turret box on top.

    The turret's footprint is cut out of the hull roof so the union is a
    single closed 2-manifold (16 vertices, 28 facets).
    """
    return TriangleMesh(_TANK_VERTICES * scale, _TANK_FACETS.copy()).validate()


def merge_meshes(*meshes: TriangleMesh) -> TriangleMesh:
    """Concatenate meshes without welding vertices."""
    vertices, facets, scattering = [], [], []
    offset = 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        facets.append(mesh.facets + offset)
        scattering.append(mesh.scattering)
        offset += mesh.n_vertices
    return TriangleMesh(
        np.concatenate(vertices), np.concatenate(facets), np.concatenate(scattering)
    )


def ground_plane(
    half_extent: tuple[float, float] = (5.0, 5.0),
    height: float = 0.0,
    divisions: int = 4,
    scattering: float = 0.1,
) -> TriangleMesh:
    """Upward-facing square grid in the plane Y = height."""
    hx, hz = half_extent
    xs = np.linspace(-hx, hx, divisions + 1)
    zs = np.linspace(-hz, hz, divisions + 1)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    vertices = np.stack([gx.ravel(), np.full(gx.size, height), gz.ravel()], axis=1)
    n = divisions + 1
    facets = []
    for i in range(divisions):
        for k in range(divisions):
            a, b = i * n + k, (i + 1) * n + k
            c, d = (i + 1) * n + k + 1, i * n + k + 1
            # wound so the normal is +Y
            facets.extend([[a, d, c], [a, c, b]])
    return TriangleMesh(vertices, facets, np.full(len(facets), float(scattering)))


def building_scene(
    width: float,
    height: float,
    length: float = 3.0,
    ground_half_extent: tuple[float, float] = (5.0, 6.0),
    ground_scattering: float = 0.1,
    wall_scattering: float = 0.5,
    roof_scattering: float = 1.0,
) -> TriangleMesh:
    """Box building standing on a textured ground plane.

    The building spans ``width`` along world Z (the ground-range direction for
    azimuth 0), ``length`` along X and ``height`` along Y. It has no floor.
    Roof, walls and ground carry separate scattering values so layover and
    shadow regions can be told apart in rendered images.
    """
    if width <= 0 or height <= 0 or length <= 0:
        raise MeshValidationError("Building dimensions must be positive")
    building = box((length, height, width), (0.0, height / 2.0, 0.0))
    top = np.isclose(building.vertices[building.facets][:, :, 1], height).all(axis=1)
    bottom = np.isclose(building.vertices[building.facets][:, :, 1], 0.0).all(axis=1)
    keep = ~bottom
    scattering = np.where(top, roof_scattering, wall_scattering)
    shell = TriangleMesh(building.vertices, building.facets[keep], scattering[keep])
    ground = ground_plane(ground_half_extent, 0.0, divisions=4, scattering=ground_scattering)
    return merge_meshes(ground, shell).validate()


def space_station(scale: float = 1.0) -> TriangleMesh:
    """Cabin with two solar wings, an asymmetric target for pose estimation."""
    cabin = box((2.0, 0.8, 0.8), (0.0, 0.0, 0.0))
    module = box((0.6, 0.6, 0.6), (1.3, 0.0, 0.0))
    left = box((0.15, 0.05, 2.2), (-0.4, 0.0, 1.5))
    right = box((0.15, 0.05, 1.4), (-0.4, 0.0, -1.1))
    mesh = merge_meshes(cabin, module, left, right)
    return mesh.with_vertices(mesh.vertices * scale).validate()
