"""Topology queries and the random-walk graph Laplacian."""

import logging
from collections import defaultdict

import numpy as np
from scipy import sparse

from src.mesh.models import MeshTopology, TriangleMesh

logger = logging.getLogger(__name__)


def build_topology(mesh: TriangleMesh) -> MeshTopology:
    """Compute vertex adjacency and the facet pairs sharing each interior edge.

    Edges used by one facet are boundary edges. Edges used by more than two
    facets are non-manifold; they contribute no shared pair and are counted
    so callers can tell the mesh is not watertight.

    Args:
        mesh: The mesh to analyse

    Returns:
        MeshTopology for the mesh

    Example:
        >>> topo = build_topology(box((1.0, 1.0, 1.0)))
        >>> len(topo.shared_edge_pairs)
        18
    """
    n = mesh.n_vertices
    edges = mesh.edges()

    if len(edges):
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        degree = np.bincount(rows, minlength=n).astype(np.int64)
        splits = np.cumsum(degree)[:-1]
        neighbors = np.split(cols, splits)
    else:
        degree = np.zeros(n, dtype=np.int64)
        neighbors = [np.zeros(0, dtype=np.int64) for _ in range(n)]

    # edge -> list of (facet, opposite vertex), in facet order
    owners: dict[tuple[int, int], list[tuple[int, int]]] = defaultdict(list)
    for j, (a, b, c) in enumerate(mesh.facets.tolist()):
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            key = (u, v) if u < v else (v, u)
            owners[key].append((j, w))

    pairs = []
    boundary = []
    non_manifold = 0
    for (u, v), users in sorted(owners.items()):
        if len(users) == 2:
            (fa, v3), (fb, v4) = users
            pairs.append((fa, fb, u, v, v3, v4))
        elif len(users) == 1:
            boundary.append((u, v))
        else:
            non_manifold += 1

    if non_manifold:
        logger.warning(f"[MESH] {non_manifold} non-manifold edges ignored by shared-edge pairs")

    return MeshTopology(
        vertex_degree=degree,
        vertex_neighbors=neighbors,
        edges=edges,
        shared_edge_pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 6),
        boundary_edges=np.asarray(boundary, dtype=np.int64).reshape(-1, 2),
        non_manifold_edges=non_manifold,
    )


def laplacian_matrix(topology: MeshTopology) -> sparse.csr_matrix:
    """Random-walk normalized Laplacian L = I - D^-1 A.

    Rows of isolated vertices (degree 0) are all zero, so they add nothing to
    the Laplacian loss.
    """
    n = topology.n_vertices
    degree = topology.vertex_degree
    edges = topology.edges
    if len(edges) == 0:
        return sparse.csr_matrix((n, n))

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    off = -1.0 / degree[rows]
    connected = np.nonzero(degree > 0)[0]
    data = np.concatenate([off, np.ones(len(connected))])
    rows = np.concatenate([rows, connected])
    cols = np.concatenate([cols, connected])
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def laplacian_apply(mesh: TriangleMesh, topology: MeshTopology) -> np.ndarray:
    """Laplacian coordinates v_i - mean(neighbors of v_i), zero for isolated vertices.

    Args:
        mesh: Mesh whose vertices are transformed
        topology: Topology of the same mesh

    Returns:
        (V, 3) array of Laplacian coordinates
    """
    return np.asarray(laplacian_matrix(topology) @ mesh.vertices)


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every edge of the mesh is shared by exactly two facets."""
    if mesh.n_facets == 0:
        return False
    return build_topology(mesh).is_watertight
