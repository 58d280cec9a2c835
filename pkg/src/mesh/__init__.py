"""Triangle meshes: data model, OBJ I/O, topology, fixtures and voxels."""

from src.mesh.models import MeshTopology, TriangleMesh, VoxelGrid
from src.mesh.obj_io import (
    load_mesh,
    load_scattering,
    save_mesh,
    save_scattering,
    scattering_path_for,
)
from src.mesh.templates import (
    box,
    building_scene,
    cuboid_with_turret,
    ground_plane,
    icosphere,
    merge_meshes,
    space_station,
    unit_cube,
)
from src.mesh.topology import build_topology, is_watertight, laplacian_apply, laplacian_matrix
from src.mesh.voxel import default_bounds, mesh_iou, read_vox, voxel_iou, voxelize, write_vox

__all__ = [
    # Data model
    "MeshTopology",
    "TriangleMesh",
    "VoxelGrid",
    # OBJ and scattering files
    "load_mesh",
    "load_scattering",
    "save_mesh",
    "save_scattering",
    "scattering_path_for",
    # Fixture meshes
    "box",
    "building_scene",
    "cuboid_with_turret",
    "ground_plane",
    "icosphere",
    "merge_meshes",
    "space_station",
    "unit_cube",
    # Topology
    "build_topology",
    "is_watertight",
    "laplacian_apply",
    "laplacian_matrix",
    # Voxels
    "default_bounds",
    "mesh_iou",
    "read_vox",
    "voxel_iou",
    "voxelize",
    "write_vox",
]
