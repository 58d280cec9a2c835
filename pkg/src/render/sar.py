"""Forward SAR and silhouette rendering.

Rays are cast along Z' through every projection cell (i, l). On each ray the
facets share one unit of energy according to their coverage and depth
(shadowing weights rho). Each facet hit sends its share to the slant-range
cells around its range sqrt(y^2 + Z^2) through a Gaussian, where it is gated
by the facet's coverage delta_s of the mapping cell and scaled by its
scattering value:

    I_sar(k, l) = sum_i sum_j delta_s_j(k, l) * S_j * rho_j(i, l) * g(d_z)

Projection rows are streamed in blocks so working memory does not grow with
N_y. Per-ray normalizers are kept in log form in the ForwardCache for the
backward pass.
"""

import hashlib
import logging
import math
from collections import deque
from collections.abc import Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from src.errors import GeometryError
from src.mesh.models import TriangleMesh
from src.radar.geometry import posed_radar_vertices
from src.radar.models import GridSpec, RadarView
from src.render.raster import Coverage, RenderParams, coverage, dense_coverage

logger = logging.getLogger(__name__)

# Rays whose total weight falls below this carry no energy
RAY_EPSILON = 1e-12
LOG_RAY_EPSILON = math.log(RAY_EPSILON)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class RenderedImage:
    """A mapping-plane image.

    Attributes:
        kind: "sar" or "silhouette"
        data: (n_z, n_x) array; row k is slant-range cell k, column l azimuth cell l
        grid: Grid the image was rendered on
    """

    kind: str
    data: np.ndarray
    grid: GridSpec

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class ForwardCache:
    """Per-ray normalizers from a forward SAR render.

    Attributes:
        log_t: (n_y, n_x) log of sum_k delta_k exp(z_k / gamma), -inf on skipped rays
        signature: Digest of the scene the cache belongs to
    """

    log_t: np.ndarray
    signature: str

    @property
    def t(self) -> np.ndarray:
        """Normalizers T; may overflow to inf for tiny gamma, use ``log_t`` for math."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_t)


@dataclass
class SceneProjection:
    """A posed mesh projected onto both planes.

    Attributes:
        radar: (V, 3) radar-frame vertices
        proj_points: (V, 2) projection-plane (col, row) coordinates
        map_points: (V, 2) mapping-plane (col, row) coordinates
    """

    radar: np.ndarray
    proj_points: np.ndarray
    map_points: np.ndarray


def project_scene(mesh: TriangleMesh, view: RadarView, grid: GridSpec) -> SceneProjection:
    """Pose the mesh, move it to the radar frame and project it onto both planes.

    Raises:
        GeometryError: If any vertex lies at or behind the radar (z <= 0)
    """
    radar = posed_radar_vertices(mesh.vertices, view)
    if len(radar) and np.any(radar[:, 2] <= 0):
        raise GeometryError("Scene vertices must lie in front of the radar (positive depth)")
    col = grid.x_to_col(radar[:, 0])
    proj_row = grid.y_to_row(radar[:, 1])
    slant = np.hypot(radar[:, 1], radar[:, 2]) - view.reference_range
    map_row = grid.slant_to_row(slant)
    return SceneProjection(
        radar=radar,
        proj_points=np.stack([col, proj_row], axis=1),
        map_points=np.stack([col, map_row], axis=1),
    )


def scene_signature(
    mesh: TriangleMesh, view: RadarView, grid: GridSpec, params: RenderParams
) -> str:
    """Digest of everything the per-ray normalizers depend on (scattering excluded)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.facets).tobytes())
    h.update(view.model_dump_json().encode())
    h.update(grid.model_dump_json().encode())
    h.update(params.model_dump_json(exclude={"rows_per_block"}).encode())
    return h.hexdigest()


def shadowing_weights(
    deltas: np.ndarray, depths: np.ndarray, gamma: float
) -> np.ndarray:
    """Share of one ray's energy taken by each facet it meets.

    rho_j = delta_j exp(z_j / gamma) / sum_k delta_k exp(z_k / gamma), evaluated
    with the largest exponent factored out. Returns zeros when the ray's total
    weight is below 1e-12.

    Args:
        deltas: Per-facet coverage of the projection cell
        depths: Per-facet normalized depths z_norm (larger is nearer)
        gamma: Occlusion softness

    Returns:
        rho, same shape as ``deltas``
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_w = np.log(deltas) + depths / gamma
    if log_w.size == 0:
        return np.zeros_like(deltas)
    log_t = logsumexp(log_w)
    if not np.isfinite(log_t) or log_t < LOG_RAY_EPSILON:
        return np.zeros_like(deltas)
    return np.exp(log_w - log_t)


def gaussian(d: np.ndarray, sigma_g: float) -> np.ndarray:
    """Normal density with standard deviation ``sigma_g`` (cells)."""
    return np.exp(-0.5 * np.square(d / sigma_g)) / (_SQRT_2PI * sigma_g)


def energy_transfer(
    rho: float | np.ndarray,
    z_actual: float | np.ndarray,
    z_cell: float | np.ndarray,
    f: float,
    sigma_g: float,
    r_z: float = 1.0,
) -> np.ndarray:
    """Energy a facet hit at range Z sends to the slant cell at ``z_cell``.

    d_z = (Z - f - z_cell) / r_z is the offset in slant cells between the
    hit and the cell, and the energy is rho * N(d_z; 0, sigma_g). The
    renderers pass the hit's slant range sqrt(y^2 + Z^2), the same measure
    that places vertices on the mapping plane.

    Args:
        rho: Shadowing weight of the hit
        z_actual: Range of the hit from the radar (m)
        z_cell: Slant coordinate of the mapping cell (m, relative to f)
        f: Reference range (m)
        sigma_g: Spread in slant cells
        r_z: Slant cell size (m); 1.0 means inputs are already in cells
    """
    d_z = (np.asarray(z_actual) - f - np.asarray(z_cell)) / r_z
    return np.asarray(rho) * gaussian(d_z, sigma_g)


@dataclass
class _RayHits:
    """Projection-plane pairs of one block, grouped by ray."""

    ray: np.ndarray
    facet: np.ndarray
    log_w: np.ndarray
    depth: np.ndarray


@dataclass
class MappingLookup:
    """Sorted mapping-plane coverage, queried by (pixel, facet)."""

    keys: np.ndarray
    delta: np.ndarray
    n_facets: int

    @classmethod
    def build(cls, cov: Coverage, n_facets: int) -> "MappingLookup":
        keys = cov.pixel * n_facets + cov.facet
        order = np.argsort(keys, kind="stable")
        return cls(keys[order], expit(cov.logit[order]), n_facets)

    def lookup(self, pixel: np.ndarray, facet: np.ndarray) -> np.ndarray:
        if len(self.keys) == 0:
            return np.zeros(len(pixel))
        query = pixel * self.n_facets + facet
        pos = np.minimum(np.searchsorted(self.keys, query), len(self.keys) - 1)
        return np.where(self.keys[pos] == query, self.delta[pos], 0.0)


class RayStreamer:
    """Shared streaming machinery of the forward and scattering-backward passes."""

    def __init__(
        self, mesh: TriangleMesh, view: RadarView, grid: GridSpec, params: RenderParams
    ):
        self.mesh = mesh
        self.view = view
        self.grid = grid
        self.params = params
        self.scene = project_scene(mesh, view, grid)
        self.proj_tri = self.scene.proj_points[mesh.facets]
        self.depth_tri = self.scene.radar[:, 2][mesh.facets]
        map_cov = coverage(self.scene.map_points[mesh.facets], grid.n_z, grid.n_x, params)
        self.mapping = MappingLookup.build(map_cov, mesh.n_facets)
        self.half_window = int(math.ceil(params.window_sigmas * params.sigma_g))

    def blocks(self) -> Iterator[tuple[int, int]]:
        step = self.params.rows_per_block
        for start in range(0, self.grid.n_y, step):
            yield start, min(start + step, self.grid.n_y)

    def ray_hits(self, rows: tuple[int, int]) -> _RayHits:
        grid, params, view = self.grid, self.params, self.view
        cov = coverage(self.proj_tri, grid.n_y, grid.n_x, params, rows)
        inv_depth = np.einsum("pk,pk->p", cov.bary, 1.0 / self.depth_tri[cov.facet])
        depth = 1.0 / inv_depth
        z_norm = (view.z_far - depth) / (view.z_far - view.z_near)
        log_w = cov.log_delta() + z_norm / params.gamma
        order = np.argsort(cov.pixel, kind="stable")
        return _RayHits(cov.pixel[order], cov.facet[order], log_w[order], depth[order])

    @staticmethod
    def log_normalizers(hits: _RayHits) -> tuple[np.ndarray, np.ndarray]:
        """Unique rays of a block and their log T, summed in facet order."""
        if len(hits.ray) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        starts = np.concatenate([[0], np.nonzero(np.diff(hits.ray))[0] + 1])
        rays = hits.ray[starts]
        peak = np.maximum.reduceat(hits.log_w, starts)
        counts = np.diff(np.concatenate([starts, [len(hits.ray)]]))
        total = np.add.reduceat(np.exp(hits.log_w - np.repeat(peak, counts)), starts)
        return rays, peak + np.log(total)

    def transfer(
        self, hits: _RayHits, log_t: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Spread each hit over nearby slant cells.

        Args:
            hits: Pairs of one block
            log_t: log T for each pair's ray

        Returns:
            (pixel, facet, weight) with weight = delta_s * rho * g, unscaled by S
        """
        grid, params = self.grid, self.params
        live = np.isfinite(log_t) & (log_t >= LOG_RAY_EPSILON)
        safe_log_t = np.where(live, log_t, 0.0)
        rho = np.where(live, np.exp(hits.log_w - safe_log_t), 0.0)
        keep = rho > 0.0
        rho, facet, depth, ray = rho[keep], hits.facet[keep], hits.depth[keep], hits.ray[keep]
        if len(rho) == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)

        # slant range of the hit, measured like the mapping-plane vertices
        y = grid.row_to_y(ray // grid.n_x)
        center = grid.slant_to_row(np.hypot(y, depth) - self.view.reference_range)
        offsets = np.arange(-self.half_window, self.half_window + 1)
        k = np.rint(center)[:, None].astype(np.int64) + offsets[None, :]
        weight = rho[:, None] * gaussian(center[:, None] - k, params.sigma_g)
        col = (ray % grid.n_x)[:, None]
        valid = (k >= 0) & (k < grid.n_z)
        pixel = (k * grid.n_x + col)[valid]
        facet_rep = np.broadcast_to(facet[:, None], k.shape)[valid]
        weight = weight[valid] * self.mapping.lookup(pixel, facet_rep)
        return pixel, facet_rep, weight


def _map_blocks(func, blocks: Iterable[tuple[int, int]], threads: int) -> Iterator:
    """Yield ``func(block)`` in block order with at most ``2 * threads`` results pending."""
    if threads <= 1:
        yield from map(func, blocks)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending: deque = deque()
        for block in blocks:
            pending.append(pool.submit(func, block))
            if len(pending) >= 2 * threads:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def render_sar(
    mesh: TriangleMesh,
    view: RadarView,
    grid: GridSpec,
    params: RenderParams,
    threads: int = 1,
) -> tuple[RenderedImage, ForwardCache]:
    """Render a SAR intensity image by streaming projection rows.

    Blocks of ``params.rows_per_block`` rows are processed independently and
    their partial images are added in block order, so the result does not
    depend on ``threads``.

    Args:
        mesh: Scene with per-facet scattering
        view: Viewing geometry and pose
        grid: Discretization; should come from :func:`grid_from_view`
        params: Softness parameters
        threads: Worker threads for row blocks

    Returns:
        (SAR image, ForwardCache for :func:`backward_scattering`)
    """
    size = grid.n_z * grid.n_x
    log_t_full = np.full(grid.n_y * grid.n_x, -np.inf)
    if mesh.n_facets == 0:
        image = RenderedImage("sar", np.zeros(grid.image_shape), grid)
        signature = scene_signature(mesh, view, grid, params)
        return image, ForwardCache(log_t_full.reshape(grid.projection_shape), signature)

    renderer = RayStreamer(mesh, view, grid, params)
    scattering = mesh.scattering

    def run(rows: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        hits = renderer.ray_hits(rows)
        rays, log_t = renderer.log_normalizers(hits)
        pair_log_t = log_t[np.searchsorted(rays, hits.ray)] if len(rays) else np.zeros(0)
        pixel, facet, weight = renderer.transfer(hits, pair_log_t)
        partial = np.bincount(pixel, weights=weight * scattering[facet], minlength=size)
        return partial, rays, log_t

    image = np.zeros(size)
    for partial, rays, log_t in _map_blocks(run, renderer.blocks(), threads):
        image += partial
        log_t_full[rays] = log_t

    signature = scene_signature(mesh, view, grid, params)
    logger.debug(
        f"[RENDER] SAR {view.label}: {mesh.n_facets} facets, "
        f"{int(np.isfinite(log_t_full).sum())} live rays, energy {image.sum():.4g}"
    )
    return (
        RenderedImage("sar", np.maximum(image, 0.0).reshape(grid.image_shape), grid),
        ForwardCache(log_t_full.reshape(grid.projection_shape), signature),
    )


def render_sar_direct(
    mesh: TriangleMesh, view: RadarView, grid: GridSpec, params: RenderParams
) -> tuple[RenderedImage, np.ndarray]:
    """Reference SAR renderer that materializes omega for every cell and facet.

    omega_j(k, l) = sum_i rho_j(i, l) g(d_z), then I = sum_j delta_s_j S_j omega_j.
    Memory grows as N_y * N_x * F * N_z; only meant for small test scenes.

    Returns:
        (SAR image, omega of shape (n_z, n_x, F))
    """
    F = mesh.n_facets
    if F == 0:
        return RenderedImage("sar", np.zeros(grid.image_shape), grid), np.zeros(
            (grid.n_z, grid.n_x, 0)
        )
    scene = project_scene(mesh, view, grid)
    depth_tri = scene.radar[:, 2][mesh.facets]

    logits, bary = dense_coverage(scene.proj_points[mesh.facets], grid.n_y, grid.n_x, params)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        depth = 1.0 / np.einsum("ilfk,fk->ilf", bary, 1.0 / depth_tri)
        z_norm = (view.z_far - depth) / (view.z_far - view.z_near)
        covered = np.isfinite(logits)
        log_w = np.where(covered, -np.logaddexp(0.0, -logits) + z_norm / params.gamma, -np.inf)
        log_t = logsumexp(log_w, axis=2, keepdims=True)
        live = np.isfinite(log_t) & (log_t >= LOG_RAY_EPSILON)
        rho = np.where(live & covered, np.exp(log_w - np.where(live, log_t, 0.0)), 0.0)
        y = grid.row_to_y(np.arange(grid.n_y))[:, None, None]
        slant = np.hypot(y, depth) - view.reference_range
        center = np.where(covered, grid.slant_to_row(slant), 0.0)

    omega = np.zeros((grid.n_z, grid.n_x, F))
    for k in range(grid.n_z):
        omega[k] = np.sum(rho * gaussian(center - k, params.sigma_g), axis=0)

    map_logits, _ = dense_coverage(scene.map_points[mesh.facets], grid.n_z, grid.n_x, params)
    delta_s = expit(map_logits)
    image = np.einsum("klf,f->kl", delta_s * omega, mesh.scattering)
    return RenderedImage("sar", image, grid), omega


def render_silhouette(
    mesh: TriangleMesh, view: RadarView, grid: GridSpec, params: RenderParams
) -> RenderedImage:
    """Probability that some facet covers each mapping cell: 1 - prod_j (1 - delta_j).

    Coverage is evaluated after the slant-range transform and ignores depth
    and scattering.
    """
    size = grid.n_z * grid.n_x
    if mesh.n_facets == 0:
        return RenderedImage("silhouette", np.zeros(grid.image_shape), grid)
    scene = project_scene(mesh, view, grid)
    cov = coverage(scene.map_points[mesh.facets], grid.n_z, grid.n_x, params)
    log_empty = np.bincount(cov.pixel, weights=cov.log_one_minus_delta(), minlength=size)
    data = np.clip(-np.expm1(log_empty), 0.0, 1.0)
    return RenderedImage("silhouette", data.reshape(grid.image_shape), grid)
