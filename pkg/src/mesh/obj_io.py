"""Wavefront OBJ subset and scattering sidecar I/O.

Only ``v`` and triangular ``f`` records are read. Indices are 1-based on disk
and 0-based in memory; negative (relative) indices are rejected. Per-facet
scattering lives in a ``.scat`` sidecar next to the OBJ: one decimal float
per line, line i for facet i.
"""

import logging
from pathlib import Path

import numpy as np

from src.errors import MeshFormatError, MeshValidationError
from src.mesh.models import TriangleMesh

logger = logging.getLogger(__name__)

SCATTERING_SUFFIX = ".scat"


def scattering_path_for(mesh_path: str | Path) -> Path:
    """Sidecar path belonging to an OBJ file."""
    return Path(mesh_path).with_suffix(SCATTERING_SUFFIX)


def _parse_index(token: str, line_number: int, path: Path) -> int:
    head = token.split("/")[0]
    try:
        value = int(head)
    except ValueError:
        raise MeshFormatError(f"Invalid face index '{token}'", line_number, path) from None
    if value <= 0:
        raise MeshFormatError(
            f"Face index must be a positive 1-based integer, got {value}", line_number, path
        )
    return value - 1


def load_mesh(path: str | Path, scattering_path: str | Path | None = None) -> TriangleMesh:
    """Load a triangle mesh from an OBJ subset file.

    Args:
        path: OBJ file containing ``v x y z`` and ``f i j k`` records
        scattering_path: Explicit sidecar; defaults to the OBJ path with a
            ``.scat`` suffix, used only if it exists

    Returns:
        A validated TriangleMesh. Scattering is 1.0 for every facet when no
        sidecar is present.

    Raises:
        MeshFormatError: Unparseable record or non-triangular face (with line number)
        MeshValidationError: Index out of range, repeated index, or degenerate facet
    """
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    facets: list[tuple[int, int, int]] = []
    ignored: set[str] = set()

    with open(path, encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            record, *fields = line.split()
            if record == "v":
                if len(fields) < 3:
                    raise MeshFormatError("Vertex needs three coordinates", line_number, path)
                try:
                    x, y, z = (float(value) for value in fields[:3])
                except ValueError:
                    raise MeshFormatError(
                        f"Invalid vertex coordinates: {' '.join(fields)}", line_number, path
                    ) from None
                vertices.append((x, y, z))
            elif record == "f":
                if len(fields) != 3:
                    raise MeshFormatError(
                        f"Only triangular faces are supported, got {len(fields)} indices",
                        line_number,
                        path,
                    )
                i, j, k = (_parse_index(token, line_number, path) for token in fields)
                if len({i, j, k}) < 3:
                    raise MeshFormatError(
                        f"Face has a repeated index: f {' '.join(fields)}", line_number, path
                    )
                facets.append((i, j, k))
            elif record not in ignored:
                ignored.add(record)
                logger.warning(f"[MESH] Ignoring unsupported OBJ record '{record}' in {path}")

    if facets:
        top = max(max(face) for face in facets)
        if top >= len(vertices):
            raise MeshValidationError(
                f"{path}: face index {top + 1} out of range (file has {len(vertices)} vertices)"
            )

    scattering = None
    sidecar = Path(scattering_path) if scattering_path is not None else scattering_path_for(path)
    if sidecar.exists():
        scattering = load_scattering(sidecar)
    elif scattering_path is not None:
        raise FileNotFoundError(f"Scattering file not found: {sidecar}")

    mesh = TriangleMesh(
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(facets, dtype=np.int64).reshape(-1, 3),
        scattering,
    )
    mesh.validate()
    logger.info(
        f"[MESH] Loaded {path.name}: {mesh.n_vertices} vertices, {mesh.n_facets} facets"
    )
    return mesh


def load_scattering(path: str | Path) -> np.ndarray:
    """Read a ``.scat`` sidecar.

    Raises:
        MeshFormatError: A line is not a finite, non-negative float
    """
    path = Path(path)
    values = []
    with open(path, encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                value = float(line)
            except ValueError:
                raise MeshFormatError(f"Invalid scattering value '{line}'", line_number, path) from None
            if not np.isfinite(value) or value < 0:
                raise MeshFormatError(
                    f"Scattering must be finite and >= 0, got {value}", line_number, path
                )
            values.append(value)
    return np.asarray(values, dtype=np.float64)


def save_scattering(scattering: np.ndarray, path: str | Path) -> Path:
    """Write one scattering value per line, round-trippable as float64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for value in np.asarray(scattering, dtype=np.float64):
            f.write(f"{float(value)!r}\n")
    return path


def save_mesh(mesh: TriangleMesh, path: str | Path, write_scattering: bool = True) -> Path:
    """Write a mesh as an OBJ subset, plus its ``.scat`` sidecar if requested.

    Args:
        mesh: Mesh to write
        path: Destination OBJ path
        write_scattering: Also write ``<path>.scat``; when False any stale
            sidecar at that location is removed so reloading yields 1.0

    Returns:
        The OBJ path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {mesh.n_vertices} vertices, {mesh.n_facets} facets\n")
        for x, y, z in mesh.vertices.tolist():
            f.write(f"v {x!r} {y!r} {z!r}\n")
        for i, j, k in (mesh.facets + 1).tolist():
            f.write(f"f {i} {j} {k}\n")

    sidecar = scattering_path_for(path)
    if write_scattering:
        save_scattering(mesh.scattering, sidecar)
    elif sidecar.exists():
        sidecar.unlink()
    logger.debug(f"[MESH] Saved {path}")
    return path
