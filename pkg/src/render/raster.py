"""Soft rasterization primitives.

Plane coordinates are measured in cells, with cell (row, col) centered at the
integer point (col, row). Every distance, and therefore the sharpness sigma,
is in cell units, so one sigma works at any resolution.

The scalar functions (``barycentric``, ``point_triangle_distance``, ...) are
the reference definitions; :func:`coverage` evaluates the same quantities for
all pixel/facet pairs that survive bounding-box culling.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from src.errors import DegenerateFacetError, GeometryError

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


class RenderParams(BaseModel):
    """Softness parameters of the renderer.

    ``cull_threshold`` is the smallest facet probability kept: values of delta
    below it are treated as exactly 0 by every renderer, which is what makes
    bounding-box culling exact.
    """

    sigma: float = Field(default=1e-5, gt=0, description="Probability sharpness (cell^2)")
    gamma: float = Field(default=1e-5, gt=0, description="Occlusion softness")
    sigma_g: float = Field(default=0.5, gt=0, description="Energy spread along slant range (cells)")
    cull_threshold: float = Field(default=1e-12, gt=0, lt=0.5, description="Smallest kept delta")
    window_sigmas: float = Field(default=8.0, gt=0, description="Gaussian support in sigma_g units")
    rows_per_block: int = Field(default=16, ge=1, description="Projection rows streamed together")

    @property
    def band(self) -> float:
        """Distance (cells) outside a facet beyond which delta < cull_threshold."""
        return math.sqrt(self.sigma * math.log(1.0 / self.cull_threshold))

    @property
    def min_logit(self) -> float:
        """Logit of ``cull_threshold``."""
        t = self.cull_threshold
        return math.log(t / (1.0 - t))


@dataclass
class FacetScreen2D:
    """A facet projected onto a plane, with per-vertex depths for interpolation.

    Attributes:
        points: (3, 2) plane coordinates (col, row) in cells
        depths: (3,) radar-frame depths z of the vertices (m)
    """

    points: np.ndarray
    depths: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(3, 2)
        if self.depths is not None:
            self.depths = np.asarray(self.depths, dtype=np.float64).reshape(3)

    @property
    def signed_area(self) -> float:
        a, b, c = self.points
        return 0.5 * float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def barycentric(facet: FacetScreen2D, p: np.ndarray) -> tuple[float, float, float]:
    """Barycentric coordinates of ``p`` with respect to a projected facet.

    Raises:
        DegenerateFacetError: If the projected area is below 1e-12 cell^2; the
            facet should be treated as covering nothing
    """
    area = facet.signed_area
    if abs(area) < DEGENERATE_AREA:
        raise DegenerateFacetError(f"Projected facet area {area:.3e} is degenerate")
    a, b, c = facet.points
    p = np.asarray(p, dtype=np.float64)
    b2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / (2.0 * area)
    b3 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / (2.0 * area)
    # b2 weights vertex c, b3 weights vertex b
    return 1.0 - b2 - b3, b3, b2


def point_triangle_distance(facet: FacetScreen2D, p: np.ndarray) -> tuple[float, int]:
    """Distance from ``p`` to the closest point on the facet's edges, and the inside sign.

    Returns:
        (d, sign) with sign = +1 when p lies inside or on the triangle, -1 otherwise
    """
    p = np.asarray(p, dtype=np.float64)
    best = math.inf
    for k in range(3):
        a = facet.points[k]
        e = facet.points[(k + 1) % 3] - a
        t = min(max(float(np.dot(p - a, e) / np.dot(e, e)), 0.0), 1.0)
        best = min(best, float(np.linalg.norm(a + t * e - p)))
    bary = barycentric(facet, p)
    sign = 1 if min(bary) >= 0.0 else -1
    return best, sign


def facet_probability(d: float | np.ndarray, sign: int | np.ndarray, sigma: float) -> np.ndarray:
    """delta = sigmoid(sign * d^2 / sigma), saturating cleanly for large arguments."""
    if sigma <= 0:
        raise GeometryError(f"sigma must be positive, got {sigma}")
    return expit(np.asarray(sign) * np.square(d) / sigma)


def normalized_depth(
    facet: FacetScreen2D, bary: tuple[float, float, float], z_near: float, z_far: float
) -> tuple[float, float]:
    """Perspective-correct depth at a barycentric point and its [0, 1] normalization.

    Returns:
        (z_norm, Z) with 1/Z = sum(b_n / z_n) and z_norm = (Z_f - Z) / (Z_f - Z_n),
        so nearer points get larger z_norm

    Raises:
        GeometryError: Non-positive vertex depth or z_near >= z_far
    """
    if facet.depths is None or np.any(facet.depths <= 0):
        raise GeometryError("Vertex depths must be positive for depth interpolation")
    if z_near >= z_far:
        raise GeometryError(f"z_near ({z_near}) must be < z_far ({z_far})")
    inv = float(np.dot(np.asarray(bary, dtype=np.float64), 1.0 / facet.depths))
    z_actual = 1.0 / inv
    return (z_far - z_actual) / (z_far - z_near), z_actual


@dataclass
class Coverage:
    """Pixel/facet pairs whose probability is at least the cull threshold.

    All arrays have one entry per pair, ordered by facet then pixel.

    Attributes:
        pixel: flat pixel index ``row * n_cols + col``
        facet: facet index
        logit: sign * d^2 / sigma
        sign: +1 inside, -1 outside
        edge: index k of the closest edge (from vertex k to k+1)
        t: clamped position of the closest point along that edge
        residual: (P, 2) closest point minus pixel center
        bary: (P, 3) barycentrics clipped to [0, 1] and renormalized
    """

    pixel: np.ndarray
    facet: np.ndarray
    logit: np.ndarray
    sign: np.ndarray
    edge: np.ndarray
    t: np.ndarray
    residual: np.ndarray
    bary: np.ndarray

    def __len__(self) -> int:
        return len(self.pixel)

    def log_delta(self) -> np.ndarray:
        return -np.logaddexp(0.0, -self.logit)

    def log_one_minus_delta(self) -> np.ndarray:
        return -np.logaddexp(0.0, self.logit)

    def select(self, mask: np.ndarray) -> "Coverage":
        return Coverage(
            self.pixel[mask],
            self.facet[mask],
            self.logit[mask],
            self.sign[mask],
            self.edge[mask],
            self.t[mask],
            self.residual[mask],
            self.bary[mask],
        )


def _empty_coverage() -> Coverage:
    i = np.zeros(0, dtype=np.int64)
    f = np.zeros(0)
    return Coverage(i, i, f, f, i, f, np.zeros((0, 2)), np.zeros((0, 3)))


def screen_facets(points2d: np.ndarray, facets: np.ndarray) -> np.ndarray:
    """Gather per-facet 2D vertex positions, shape (F, 3, 2)."""
    return np.asarray(points2d, dtype=np.float64)[facets]


def edge_geometry(
    tri: np.ndarray, px: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closest-edge data for points ``px`` (P, 2) against triangles ``tri`` (P, 3, 2).

    Returns:
        (d2, edge, t, residual, bary) where bary are the raw barycentrics
    """
    a = tri
    e = np.roll(tri, -1, axis=1) - tri
    rel = px[:, None, :] - a
    ee = np.einsum("pkd,pkd->pk", e, e)
    t = np.clip(np.einsum("pkd,pkd->pk", rel, e) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    res = a + t[..., None] * e - px[:, None, :]
    d2_all = np.einsum("pkd,pkd->pk", res, res)
    edge = np.argmin(d2_all, axis=1)
    rows = np.arange(len(px))
    d2 = d2_all[rows, edge]

    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    det = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (
        v2[:, 0] - v0[:, 0]
    )
    safe = np.where(np.abs(det) > 0, det, 1.0)
    r = px - v0
    b1 = (r[:, 0] * (v2[:, 1] - v0[:, 1]) - r[:, 1] * (v2[:, 0] - v0[:, 0])) / safe
    b2 = ((v1[:, 0] - v0[:, 0]) * r[:, 1] - (v1[:, 1] - v0[:, 1]) * r[:, 0]) / safe
    bary = np.stack([1.0 - b1 - b2, b1, b2], axis=1)
    return d2, edge, t[rows, edge], res[rows, edge], bary


def clip_barycentric(bary: np.ndarray) -> np.ndarray:
    """Clip barycentrics to [0, 1] and renormalize so they sum to one."""
    clipped = np.clip(bary, 0.0, 1.0)
    return clipped / np.maximum(clipped.sum(axis=1, keepdims=True), 1e-300)


def coverage(
    tri: np.ndarray,
    n_rows: int,
    n_cols: int,
    params: RenderParams,
    row_range: tuple[int, int] | None = None,
) -> Coverage:
    """Evaluate the probability map for every pixel near every facet.

    Each facet's bounding box, inflated by ``params.band``, selects the
    candidate pixels. Pairs with delta below ``params.cull_threshold`` are
    dropped, as are facets whose projected area is degenerate.

    Args:
        tri: (F, 3, 2) projected facets in cell coordinates
        n_rows: Plane rows
        n_cols: Plane columns
        params: Softness and culling parameters
        row_range: Restrict to rows [start, stop), used for streaming

    Returns:
        Coverage of the surviving pairs, ordered by facet then pixel
    """
    r0, r1 = row_range if row_range is not None else (0, n_rows)
    if len(tri) == 0 or r1 <= r0:
        return _empty_coverage()

    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    area2 = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (
        v2[:, 0] - v0[:, 0]
    )
    band = params.band
    lo = tri.min(axis=1) - band
    hi = tri.max(axis=1) + band
    col_lo = np.maximum(np.ceil(lo[:, 0]), 0).astype(np.int64)
    col_hi = np.minimum(np.floor(hi[:, 0]), n_cols - 1).astype(np.int64)
    row_lo = np.maximum(np.ceil(lo[:, 1]), r0).astype(np.int64)
    row_hi = np.minimum(np.floor(hi[:, 1]), r1 - 1).astype(np.int64)
    n_c = np.maximum(col_hi - col_lo + 1, 0)
    n_r = np.maximum(row_hi - row_lo + 1, 0)
    counts = np.where(np.abs(area2) >= 2.0 * DEGENERATE_AREA, n_c * n_r, 0)
    total = int(counts.sum())
    if total == 0:
        return _empty_coverage()

    facet = np.repeat(np.arange(len(tri)), counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(total) - start
    width = n_c[facet]
    row = row_lo[facet] + local // width
    col = col_lo[facet] + local % width
    px = np.stack([col, row], axis=1).astype(np.float64)

    d2, edge, t, res, bary = edge_geometry(tri[facet], px)
    inside = np.all(bary >= 0.0, axis=1)
    sign = np.where(inside, 1.0, -1.0)
    logit = sign * d2 / params.sigma
    keep = logit >= params.min_logit

    cov = Coverage(
        pixel=(row * n_cols + col)[keep],
        facet=facet[keep],
        logit=logit[keep],
        sign=sign[keep],
        edge=edge[keep],
        t=t[keep],
        residual=res[keep],
        bary=clip_barycentric(bary[keep]),
    )
    return cov


def dense_coverage(
    tri: np.ndarray, n_rows: int, n_cols: int, params: RenderParams
) -> tuple[np.ndarray, np.ndarray]:
    """Logits and clipped barycentrics for every pixel and facet, without bounding boxes.

    Logits below the cull threshold, and all logits of degenerate facets,
    are -inf (delta = 0).

    Returns:
        (logits (n_rows, n_cols, F), bary (n_rows, n_cols, F, 3))
    """
    F = len(tri)
    rows, cols = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    px = np.stack([cols.ravel(), rows.ravel()], axis=1).astype(np.float64)
    logits = np.full((n_rows * n_cols, F), -np.inf)
    bary_out = np.zeros((n_rows * n_cols, F, 3))
    for j in range(F):
        v0, v1, v2 = tri[j]
        area2 = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
        if abs(area2) < 2.0 * DEGENERATE_AREA:
            continue
        d2, _, _, _, bary = edge_geometry(np.broadcast_to(tri[j], (len(px), 3, 2)), px)
        sign = np.where(np.all(bary >= 0.0, axis=1), 1.0, -1.0)
        logit = sign * d2 / params.sigma
        logits[:, j] = np.where(logit >= params.min_logit, logit, -np.inf)
        bary_out[:, j] = clip_barycentric(bary)
    return logits.reshape(n_rows, n_cols, F), bary_out.reshape(n_rows, n_cols, F, 3)
