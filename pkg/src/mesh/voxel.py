"""Voxelization and voxel IoU, the 3D reconstruction metric.

Interior occupancy uses a +X ray parity test from every cell center. When a
ray passes exactly through a projected edge or vertex, its origin is nudged by
a fixed sub-cell offset and the column is retried, so coplanar facets never
double count.
"""

import logging
from pathlib import Path

import numpy as np

from src.errors import FileFormatError, MeshValidationError, NonWatertightError
from src.mesh.models import TriangleMesh, VoxelGrid
from src.mesh.topology import is_watertight

logger = logging.getLogger(__name__)

BOUNDS_MARGIN = 0.02
_TIE_TOLERANCE = 1e-12
# Deterministic jitter direction in the YZ plane, in units of one cell
_JITTER = np.array([0.7548776662466927, 0.5698402909980532]) * 1e-4
_MAX_JITTER_ROUNDS = 4


def default_bounds(*meshes: TriangleMesh, margin: float = BOUNDS_MARGIN) -> np.ndarray:
    """Tight AABB of all meshes, expanded by ``margin`` of the extent on each side.

    Axes with zero extent are padded using the largest extent so the box never
    collapses.
    """
    lo = np.min([m.bounds()[0] for m in meshes], axis=0)
    hi = np.max([m.bounds()[1] for m in meshes], axis=0)
    extent = hi - lo
    pad = margin * np.where(extent > 0, extent, max(float(extent.max()), 1.0))
    return np.stack([lo - pad, hi + pad])


def _column_hits(
    tri_yz: np.ndarray, tri_x: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intersect +X rays through YZ ``points`` with triangles.

    Returns:
        (column index, hit x, tie flag) for every (point, triangle) hit
    """
    a, b, c = tri_yz[:, 0], tri_yz[:, 1], tri_yz[:, 2]
    e1, e2 = b - a, c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    usable = np.abs(det) > 1e-300

    cols, tris = [], []
    for j in np.nonzero(usable)[0]:
        lo = np.minimum(np.minimum(a[j], b[j]), c[j]) - 1e-9
        hi = np.maximum(np.maximum(a[j], b[j]), c[j]) + 1e-9
        inside = np.nonzero(np.all((points >= lo) & (points <= hi), axis=1))[0]
        cols.append(inside)
        tris.append(np.full(len(inside), j))
    if not cols:
        empty = np.zeros(0)
        return empty.astype(np.int64), empty, empty.astype(bool)
    cols_arr = np.concatenate(cols)
    tris_arr = np.concatenate(tris)

    p = points[cols_arr] - a[tris_arr]
    d = det[tris_arr]
    b1 = (p[:, 0] * e2[tris_arr, 1] - p[:, 1] * e2[tris_arr, 0]) / d
    b2 = (e1[tris_arr, 0] * p[:, 1] - e1[tris_arr, 1] * p[:, 0]) / d
    b0 = 1.0 - b1 - b2
    bary = np.stack([b0, b1, b2], axis=1)
    inside = np.all(bary >= -_TIE_TOLERANCE, axis=1)
    tie = inside & np.any(np.abs(bary) <= _TIE_TOLERANCE, axis=1)
    x = np.einsum("ij,ij->i", bary, tri_x[tris_arr])
    return cols_arr[inside], x[inside], tie[inside]


def _fill_interior(mesh: TriangleMesh, resolution: int, bounds: np.ndarray) -> np.ndarray:
    step = (bounds[1] - bounds[0]) / resolution
    centers = [bounds[0, k] + (np.arange(resolution) + 0.5) * step[k] for k in range(3)]
    gy, gz = np.meshgrid(centers[1], centers[2], indexing="ij")
    base = np.stack([gy.ravel(), gz.ravel()], axis=1)
    tri = mesh.vertices[mesh.facets]
    tri_yz, tri_x = tri[:, :, 1:], tri[:, :, 0]

    points = base.copy()
    cols, xs, ties = _column_hits(tri_yz, tri_x, points)
    for attempt in range(1, _MAX_JITTER_ROUNDS + 1):
        tied = np.unique(cols[ties])
        if len(tied) == 0:
            break
        logger.debug(f"[VOXEL] Jittering {len(tied)} tied ray origins (round {attempt})")
        points[tied] = base[tied] + attempt * _JITTER * step[1:]
        keep = ~np.isin(cols, tied)
        new_cols, new_xs, new_ties = _column_hits(tri_yz, tri_x, points[tied])
        cols = np.concatenate([cols[keep], tied[new_cols]])
        xs = np.concatenate([xs[keep], new_xs])
        ties = np.concatenate([ties[keep], new_ties])

    # crossings strictly to the +X side of each cell center
    counts = np.zeros((len(base), resolution), dtype=np.int64)
    ahead = xs[:, None] > centers[0][None, :]
    np.add.at(counts, cols, ahead.astype(np.int64))
    occupied = (counts % 2 == 1).reshape(resolution, resolution, resolution)
    # counts is indexed [column (iy, iz), ix]
    return np.transpose(occupied, (2, 0, 1))


def _fill_surface(mesh: TriangleMesh, resolution: int, bounds: np.ndarray) -> np.ndarray:
    step = (bounds[1] - bounds[0]) / resolution
    occupancy = np.zeros((resolution,) * 3, dtype=bool)
    tri = mesh.vertices[mesh.facets]
    for a, b, c in tri:
        longest = max(np.linalg.norm(b - a), np.linalg.norm(c - a), np.linalg.norm(c - b))
        n = max(2, int(np.ceil(2.0 * longest / step.min())) + 1)
        u, v = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")
        mask = u + v <= 1.0
        u, v = u[mask], v[mask]
        pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
        idx = np.floor((pts - bounds[0]) / step).astype(np.int64)
        idx = idx[np.all((idx >= 0) & (idx < resolution), axis=1)]
        occupancy[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return occupancy


def voxelize(
    mesh: TriangleMesh,
    resolution: int = 32,
    bounds: np.ndarray | None = None,
    surface_only: bool = False,
) -> VoxelGrid:
    """Voxelize a mesh into a cubic occupancy grid.

    Args:
        mesh: Mesh to voxelize; must be watertight unless ``surface_only``
        resolution: Cells per side (>= 2)
        bounds: (2, 3) box to voxelize; defaults to the tight AABB expanded
            2% per side
        surface_only: Mark cells touched by the surface instead of the interior

    Returns:
        VoxelGrid with a cell occupied iff its center is inside the mesh

    Raises:
        MeshValidationError: If resolution < 2 or bounds are empty
        NonWatertightError: Interior fill of a mesh with open edges
    """
    if resolution < 2:
        raise MeshValidationError(f"Voxel resolution must be >= 2, got {resolution}")
    if bounds is None:
        bounds = default_bounds(mesh)
    bounds = np.asarray(bounds, dtype=np.float64).reshape(2, 3)
    if np.any(bounds[1] <= bounds[0]):
        raise MeshValidationError(f"Voxel bounds are empty: {bounds.tolist()}")

    if surface_only:
        occupancy = _fill_surface(mesh, resolution, bounds)
    else:
        if not is_watertight(mesh):
            raise NonWatertightError(
                "Mesh is not watertight, interior voxelization is undefined; "
                "use surface_only=True (--surface-only) to voxelize the surface instead"
            )
        occupancy = _fill_interior(mesh, resolution, bounds)

    grid = VoxelGrid(resolution, occupancy, bounds)
    logger.debug(
        f"[VOXEL] {resolution}^3 grid, {grid.occupied_count} cells occupied "
        f"({grid.occupied_fraction():.3f})"
    )
    return grid


def voxel_iou(a: VoxelGrid, b: VoxelGrid) -> float:
    """Intersection over union of two occupancy grids.

    Returns:
        |a & b| / |a | b|, or 1.0 when both grids are empty

    Raises:
        MeshValidationError: If resolutions or bounds differ
    """
    if a.resolution != b.resolution:
        raise MeshValidationError(
            f"Voxel resolutions differ: {a.resolution} vs {b.resolution}"
        )
    if not np.allclose(a.bounds, b.bounds, rtol=0.0, atol=1e-9):
        raise MeshValidationError(
            f"Voxel bounds differ: {a.bounds.tolist()} vs {b.bounds.tolist()}"
        )
    union = np.logical_or(a.occupancy, b.occupancy).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a.occupancy, b.occupancy).sum() / union)


def mesh_iou(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, resolution: int = 32
) -> float:
    """Voxel IoU of two watertight meshes over their shared expanded bounds."""
    bounds = default_bounds(mesh_a, mesh_b)
    return voxel_iou(voxelize(mesh_a, resolution, bounds), voxelize(mesh_b, resolution, bounds))


def write_vox(grid: VoxelGrid, path: str | Path) -> Path:
    """Write a voxel dump.

    Line 1: ``VOX <resolution> <xmin> <ymin> <zmin> <xmax> <ymax> <zmax>``.
    Line 2: run lengths of alternating bits in C order, starting with zeros.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bits = grid.occupancy.ravel().astype(np.int8)
    change = np.nonzero(np.diff(bits))[0] + 1
    edges = np.concatenate([[0], change, [bits.size]])
    runs = np.diff(edges).tolist()
    if bits.size and bits[0] == 1:
        runs = [0, *runs]
    bounds = " ".join(repr(float(v)) for v in grid.bounds.ravel())
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"VOX {grid.resolution} {bounds}\n")
        f.write(" ".join(str(r) for r in runs) + "\n")
    return path


def read_vox(path: str | Path) -> VoxelGrid:
    """Read a dump written by :func:`write_vox`."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise FileFormatError(f"{path}: voxel dump needs a header and a run line")
    header = lines[0].split()
    if len(header) != 8 or header[0] != "VOX":
        raise FileFormatError(f"{path}: bad voxel header '{lines[0]}'")
    try:
        resolution = int(header[1])
        bounds = np.array([float(v) for v in header[2:]]).reshape(2, 3)
        runs = [int(r) for r in lines[1].split()]
    except ValueError as e:
        raise FileFormatError(f"{path}: {e}") from None
    values = np.arange(len(runs)) % 2
    bits = np.repeat(values, runs).astype(bool)
    if bits.size != resolution**3:
        raise FileFormatError(
            f"{path}: runs cover {bits.size} cells, expected {resolution**3}"
        )
    return VoxelGrid(resolution, bits, bounds)
