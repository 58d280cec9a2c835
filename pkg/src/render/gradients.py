"""Analytic backward pass.

Geometry gradients flow only through the silhouette; the SAR image
contributes gradients for the scattering values alone. Per-vertex
accumulation uses ``np.bincount`` over pairs in a fixed order, so results
are reproducible run to run.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from src.errors import CacheMismatchError, DivergenceError
from src.mesh.models import TriangleMesh
from src.radar.geometry import POSE_PARAMETERS, radar_transform, radar_transform_derivatives
from src.radar.models import GridSpec, RadarView
from src.render.raster import RenderParams, coverage
from src.render.sar import ForwardCache, RayStreamer, project_scene, scene_signature

logger = logging.getLogger(__name__)


@dataclass
class GradientSet:
    """Gradients of a scalar loss.

    Attributes:
        d_vertices: (V, 3) world-frame dL/dv
        d_scattering: (F,) dL/dS_j
        d_pose: dL/d(pose parameter), angles per radian, keyed as ``POSE_PARAMETERS``
    """

    d_vertices: np.ndarray | None = None
    d_scattering: np.ndarray | None = None
    d_pose: dict[str, float] = field(default_factory=dict)

    def pose_vector(self) -> np.ndarray:
        """d_pose in ``POSE_PARAMETERS`` order."""
        return np.array([self.d_pose.get(name, 0.0) for name in POSE_PARAMETERS])

    def check_finite(self) -> "GradientSet":
        """Raise DivergenceError if any gradient is NaN or infinite."""
        for name in ("d_vertices", "d_scattering"):
            value = getattr(self, name)
            if value is not None and not np.all(np.isfinite(value)):
                raise DivergenceError(f"Non-finite values in {name}")
        if not all(np.isfinite(v) for v in self.d_pose.values()):
            raise DivergenceError(f"Non-finite pose gradient: {self.d_pose}")
        return self


def _silhouette_radar_gradient(
    upstream: np.ndarray,
    mesh: TriangleMesh,
    view: RadarView,
    grid: GridSpec,
    params: RenderParams,
) -> np.ndarray:
    """dL/dv in the radar frame for L with dL/dI_sil = ``upstream``."""
    V = mesh.n_vertices
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if mesh.n_facets == 0 or not np.any(upstream):
        return np.zeros((V, 3))

    scene = project_scene(mesh, view, grid)
    cov = coverage(scene.map_points[mesh.facets], grid.n_z, grid.n_x, params)
    if len(cov) == 0:
        return np.zeros((V, 3))

    log_delta = cov.log_delta()
    log_empty_j = cov.log_one_minus_delta()
    log_empty = np.bincount(cov.pixel, weights=log_empty_j, minlength=grid.n_z * grid.n_x)
    # prod_{k != j} (1 - delta_k) * delta_j (1 - delta_j) == prod_k (1 - delta_k) * delta_j
    d_logit = np.exp(log_empty[cov.pixel] + log_delta)
    coef = upstream[cov.pixel] * d_logit * cov.sign / params.sigma

    start = mesh.facets[cov.facet, cov.edge]
    end = mesh.facets[cov.facet, (cov.edge + 1) % 3]
    g_start = (2.0 * coef * (1.0 - cov.t))[:, None] * cov.residual
    g_end = (2.0 * coef * cov.t)[:, None] * cov.residual

    screen = np.zeros((V, 2))
    for axis in range(2):
        screen[:, axis] = np.bincount(start, weights=g_start[:, axis], minlength=V)
        screen[:, axis] += np.bincount(end, weights=g_end[:, axis], minlength=V)

    # (col, row) = (x / r_x + c, (sqrt(y^2 + z^2) - f) / r_z + c)
    y, z = scene.radar[:, 1], scene.radar[:, 2]
    rng = np.hypot(y, z)
    radar = np.zeros((V, 3))
    radar[:, 0] = screen[:, 0] / grid.r_x
    radar[:, 1] = screen[:, 1] * y / (rng * grid.r_z)
    radar[:, 2] = screen[:, 1] * z / (rng * grid.r_z)
    return radar


def backward_silhouette(
    upstream: np.ndarray,
    mesh: TriangleMesh,
    view: RadarView,
    grid: GridSpec,
    params: RenderParams,
) -> GradientSet:
    """Vertex gradients of a loss through the silhouette image.

    Args:
        upstream: (n_z, n_x) dL/dI_sil
        mesh, view, grid, params: The forward-pass inputs

    Returns:
        GradientSet with ``d_vertices`` in world coordinates (pre-pose)
    """
    radar = _silhouette_radar_gradient(upstream, mesh, view, grid, params)
    A, _ = radar_transform(view)
    return GradientSet(d_vertices=radar @ A)


def backward_scattering(
    upstream: np.ndarray,
    mesh: TriangleMesh,
    view: RadarView,
    grid: GridSpec,
    params: RenderParams,
    cache: ForwardCache,
) -> GradientSet:
    """Scattering gradients dL/dS_j = sum_kl upstream(k, l) delta_s_j(k, l) omega_j(k, l).

    Rays are streamed again exactly as in the forward pass; the shadowing
    weights reuse the cached normalizers instead of recomputing them.

    Raises:
        CacheMismatchError: If ``cache`` was produced for another scene
    """
    if cache.signature != scene_signature(mesh, view, grid, params):
        raise CacheMismatchError(
            "ForwardCache does not match this mesh/view/grid/params; rerun render_sar"
        )
    F = mesh.n_facets
    if F == 0:
        return GradientSet(d_scattering=np.zeros(0))
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    renderer = RayStreamer(mesh, view, grid, params)
    log_t_flat = cache.log_t.reshape(-1)

    d_scattering = np.zeros(F)
    for rows in renderer.blocks():
        hits = renderer.ray_hits(rows)
        pixel, facet, weight = renderer.transfer(hits, log_t_flat[hits.ray])
        d_scattering += np.bincount(facet, weights=weight * upstream[pixel], minlength=F)
    return GradientSet(d_scattering=d_scattering)


def backward_pose(
    upstream: np.ndarray,
    mesh: TriangleMesh,
    view: RadarView,
    grid: GridSpec,
    params: RenderParams,
) -> GradientSet:
    """Gradients w.r.t. (alpha, beta, theta_x, theta_y, theta_z, scale) through the silhouette.

    Chains the radar-frame vertex gradient through the derivatives of the
    posed transform v_r = A v + b. Angle gradients are per radian.

    Returns:
        GradientSet with ``d_pose`` and ``d_vertices`` filled
    """
    radar = _silhouette_radar_gradient(upstream, mesh, view, grid, params)
    A, _ = radar_transform(view)
    d_pose = {}
    for name, (dA, db) in radar_transform_derivatives(view).items():
        moved = mesh.vertices @ dA.T + db
        d_pose[name] = float(np.sum(radar * moved))
    return GradientSet(d_vertices=radar @ A, d_pose=d_pose)


def finite_difference_oracle(
    scalar_loss: Callable[[np.ndarray], float],
    params: np.ndarray,
    h: float | np.ndarray = 1e-4,
) -> np.ndarray:
    """Central-difference gradient estimate (L(p + h) - L(p - h)) / 2h per coordinate.

    Args:
        scalar_loss: Function of a parameter array returning a float
        params: Point to differentiate at (not modified)
        h: Step, scalar or per-coordinate array broadcastable to ``params``

    Returns:
        Array shaped like ``params``

    Example:
        >>> finite_difference_oracle(lambda p: float(p[0] ** 2), np.array([3.0]))
        array([6.])
    """
    base = np.array(params, dtype=np.float64)
    steps = np.broadcast_to(np.asarray(h, dtype=np.float64), base.shape)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    flat_steps = steps.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        step = flat_steps[i]
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += step
        minus[i] -= step
        out[i] = (
            float(scalar_loss(plus.reshape(base.shape)))
            - float(scalar_loss(minus.reshape(base.shape)))
        ) / (2.0 * step)
    return grad
