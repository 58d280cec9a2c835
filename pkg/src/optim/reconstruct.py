"""Multi-view mesh reconstruction and pose estimation loops.

Both loops render with the soft renderer, push the loss gradient back
through the analytic backward pass and update parameters with Adam.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src.errors import DivergenceError
from src.mesh.models import MeshTopology, TriangleMesh
from src.mesh.topology import build_topology
from src.optim.adam import OptimState, adam_step
from src.optim.losses import (
    MODE_FULL,
    MODES,
    LossWeights,
    hybrid_loss,
    loss_silhouette,
    silhouette_iou,
)
from src.radar.geometry import grid_from_view
from src.radar.models import GridSpec, PoseParameters, RadarView
from src.render.gradients import backward_pose, backward_scattering, backward_silhouette
from src.render.raster import RenderParams
from src.render.sar import render_sar, render_silhouette

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "batch", "L_sil", "L_tex", "L_lap", "L_flat", "total")
MIN_SCALE = 1e-3
POSE_CONVERGED_IOU = 0.5


class ReconstructOptions(BaseModel):
    """Optimizer settings for :func:`reconstruct`."""

    lr: float = Field(default=0.01, gt=0, description="Adam learning rate")
    batch_size: int = Field(default=8, ge=1, description="Views averaged per Adam step")
    epochs: int = Field(default=500, ge=0, description="Passes over the view set")
    mode: str = Field(default=MODE_FULL, description="'full' or 'silhouette-only'")
    train_sigma: float | None = Field(
        default=0.4, gt=0, description="Silhouette sharpness while optimizing; None keeps sigma"
    )
    template_subdivisions: int = Field(default=3, ge=0, le=6, description="Icosphere level")
    template_radius: float = Field(default=1.5, gt=0, description="Icosphere template radius (m)")
    snapshot_every: int = Field(default=0, ge=0, description="Snapshot period in epochs, 0 = off")
    fix_geometry: bool = Field(default=False, description="Only optimize scattering")
    clamp_scattering: bool = Field(default=True, description="Clamp scattering at 0 after steps")
    log_every: int = Field(default=25, ge=1, description="Epochs between INFO progress lines")

    @field_validator("mode")
    @classmethod
    def validate_mode(cls, v: str) -> str:
        """Mode must name a known loss variant."""
        if v not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got '{v}'")
        return v


class PoseOptions(BaseModel):
    """Optimizer settings for :func:`estimate_pose`."""

    lr: float = Field(default=0.01, gt=0, description="Adam learning rate (radians / scale units)")
    epochs: int = Field(default=500, ge=0, description="Adam steps")
    train_sigma: float | None = Field(
        default=0.4, gt=0, description="Silhouette sharpness while optimizing; None keeps sigma"
    )
    log_every: int = Field(default=50, ge=1, description="Epochs between INFO progress lines")


@dataclass
class ViewSample:
    """One observed view: geometry, silhouette and optional SAR image."""

    view: RadarView
    silhouette: np.ndarray
    sar: np.ndarray | None = None


@dataclass
class ViewSet:
    """Observed views sharing one mapping-plane discretization.

    The projection grid depends on the incident angle, so only (n_x, n_z, r_z)
    are shared; :meth:`grid_for` builds the full grid of each view.
    """

    samples: list[ViewSample]
    n_x: int
    n_z: int
    r_z: float

    def __post_init__(self) -> None:
        shape = (self.n_z, self.n_x)
        for sample in self.samples:
            sil = np.asarray(sample.silhouette, dtype=np.float64)
            if sil.shape != shape:
                raise ValueError(
                    f"Silhouette for {sample.view.label} has shape {sil.shape}, expected {shape}"
                )
            if sil.size and (sil.min() < 0.0 or sil.max() > 1.0):
                raise ValueError(f"Silhouette for {sample.view.label} leaves [0, 1]")
            sample.silhouette = sil
            if sample.sar is not None:
                sample.sar = np.asarray(sample.sar, dtype=np.float64)
                if sample.sar.shape != shape:
                    raise ValueError(
                        f"SAR image for {sample.view.label} has shape {sample.sar.shape}, "
                        f"expected {shape}"
                    )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def has_sar(self) -> bool:
        return bool(self.samples) and all(s.sar is not None for s in self.samples)

    def grid_for(self, view: RadarView) -> GridSpec:
        return grid_from_view(self.n_x, self.n_z, self.r_z, view)

    @classmethod
    def render(
        cls,
        mesh: TriangleMesh,
        views: list[RadarView],
        n_x: int,
        n_z: int,
        r_z: float,
        params: RenderParams,
        with_sar: bool = True,
        threads: int = 1,
    ) -> "ViewSet":
        """Render ground-truth observations of ``mesh`` for every view."""
        samples = []
        for view in views:
            grid = grid_from_view(n_x, n_z, r_z, view)
            sil = render_silhouette(mesh, view, grid, params).data
            sar = None
            if with_sar:
                sar = render_sar(mesh, view, grid, params, threads=threads)[0].data
            samples.append(ViewSample(view=view, silhouette=sil, sar=sar))
        return cls(samples=samples, n_x=n_x, n_z=n_z, r_z=r_z)


@dataclass
class HistoryRecord:
    """Mean loss terms of one batch."""

    epoch: int
    batch: int
    L_sil: float
    L_tex: float
    L_lap: float
    L_flat: float
    total: float

    def to_dict(self) -> dict[str, float | int]:
        return {name: getattr(self, name) for name in HISTORY_COLUMNS}


@dataclass
class BatchGradients:
    """Batch-averaged loss terms and parameter gradients."""

    terms: dict[str, float]
    total: float
    d_vertices: np.ndarray
    d_scattering: np.ndarray | None = None


@dataclass
class ReconstructionResult:
    """Output of :func:`reconstruct`."""

    mesh: TriangleMesh
    history: list[HistoryRecord] = field(default_factory=list)
    epochs_run: int = 0

    @property
    def final_loss(self) -> float | None:
        return self.history[-1].total if self.history else None

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "steps": len(self.history),
            "final_loss": self.final_loss,
            "n_vertices": self.mesh.n_vertices,
            "n_facets": self.mesh.n_facets,
        }


def _training_params(params: RenderParams, train_sigma: float | None) -> RenderParams:
    if train_sigma is None:
        return params
    return params.model_copy(update={"sigma": train_sigma})


def view_gradients(
    mesh: TriangleMesh,
    topology: MeshTopology,
    sample: ViewSample,
    grid: GridSpec,
    weights: LossWeights,
    mode: str,
    sil_params: RenderParams,
    sar_params: RenderParams,
    fix_geometry: bool = False,
) -> BatchGradients:
    """Hybrid loss of one view and its gradients w.r.t. vertices and scattering."""
    view = sample.view
    sil = render_silhouette(mesh, view, grid, sil_params).data
    pred_sar, cache = None, None
    if mode == MODE_FULL:
        rendered, cache = render_sar(mesh, view, grid, sar_params)
        pred_sar = rendered.data
    loss = hybrid_loss(
        sil,
        sample.silhouette,
        mesh,
        topology,
        weights,
        mode,
        pred_sar=pred_sar,
        truth_sar=sample.sar,
    )

    if fix_geometry:
        d_vertices = np.zeros_like(mesh.vertices)
    else:
        d_vertices = (
            backward_silhouette(loss.d_silhouette, mesh, view, grid, sil_params).d_vertices
            + loss.d_vertices
        )
    d_scattering = None
    if mode == MODE_FULL:
        d_scattering = backward_scattering(
            loss.d_sar, mesh, view, grid, sar_params, cache
        ).d_scattering
    return BatchGradients(
        terms=loss.terms, total=loss.total, d_vertices=d_vertices, d_scattering=d_scattering
    )


def batch_gradients(
    mesh: TriangleMesh,
    topology: MeshTopology,
    samples: list[ViewSample],
    views: ViewSet,
    weights: LossWeights,
    mode: str,
    sil_params: RenderParams,
    sar_params: RenderParams,
    fix_geometry: bool = False,
    threads: int = 1,
) -> BatchGradients:
    """Average the per-view losses and gradients of a batch.

    Views may be evaluated on worker threads; results are summed in batch
    order, so the average does not depend on ``threads``.
    """

    def run(sample: ViewSample) -> BatchGradients:
        return view_gradients(
            mesh,
            topology,
            sample,
            views.grid_for(sample.view),
            weights,
            mode,
            sil_params,
            sar_params,
            fix_geometry,
        )

    if threads > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, samples))
    else:
        parts = [run(sample) for sample in samples]

    n = len(parts)
    terms = {key: sum(p.terms[key] for p in parts) / n for key in parts[0].terms}
    d_scattering = None
    if parts[0].d_scattering is not None:
        d_scattering = sum(p.d_scattering for p in parts) / n
    return BatchGradients(
        terms=terms,
        total=sum(p.total for p in parts) / n,
        d_vertices=sum(p.d_vertices for p in parts) / n,
        d_scattering=d_scattering,
    )


def reconstruct(
    views: ViewSet,
    template: TriangleMesh,
    options: ReconstructOptions | None = None,
    weights: LossWeights | None = None,
    params: RenderParams | None = None,
    seed: int = 0,
    threads: int = 1,
    on_snapshot: Callable[[int, TriangleMesh], None] | None = None,
) -> ReconstructionResult:
    """Deform ``template`` (and its scattering) to match the observed views.

    Each epoch shuffles the views with a generator seeded from ``seed`` and
    splits them into batches of ``min(batch_size, len(views))``. Every batch
    takes one Adam step on the batch-averaged gradient. Vertex updates happen
    in the world frame before pose.

    Args:
        views: Observed silhouettes (and SAR images in full mode)
        template: Starting mesh; its vertex count is kept
        options: Optimizer settings
        weights: Loss weights
        params: Render parameters of the observations
        seed: Shuffle seed
        threads: Worker threads for the views of a batch
        on_snapshot: Called as ``on_snapshot(epoch, mesh)`` every
            ``snapshot_every`` epochs

    Returns:
        ReconstructionResult with the final mesh and per-batch history

    Raises:
        ValueError: No views, or full mode without SAR observations
        DivergenceError: Loss or gradient became non-finite; ``last_good``
            holds the mesh before the failing step
    """
    options = options or ReconstructOptions()
    weights = weights or LossWeights()
    params = params or RenderParams()
    if len(views) == 0:
        raise ValueError("reconstruct needs at least one view")
    if options.mode == MODE_FULL and not views.has_sar:
        raise ValueError("Full mode needs an observed SAR image for every view")

    template.validate()
    topology = build_topology(template)
    sil_params = _training_params(params, options.train_sigma)
    rng = np.random.default_rng(seed)
    batch_size = min(options.batch_size, len(views))
    state = OptimState(lr=options.lr, batch_size=batch_size)

    opt_params = {
        "vertices": template.vertices.copy(),
        "scattering": template.scattering.copy(),
    }
    mesh = template.copy()
    history: list[HistoryRecord] = []
    logger.info(
        f"[RECON] {len(views)} views, {template.n_facets} facets, mode={options.mode}, "
        f"epochs={options.epochs}, batch={batch_size}, lr={options.lr}"
    )

    for epoch in range(1, options.epochs + 1):
        order = rng.permutation(len(views))
        for batch_index, start in enumerate(range(0, len(order), batch_size)):
            samples = [views.samples[i] for i in order[start : start + batch_size]]
            grads = batch_gradients(
                mesh,
                topology,
                samples,
                views,
                weights,
                options.mode,
                sil_params,
                params,
                options.fix_geometry,
                threads,
            )
            if not np.isfinite(grads.total):
                raise DivergenceError(
                    f"Loss became {grads.total} at epoch {epoch}, batch {batch_index}",
                    last_good=mesh,
                    epoch=epoch,
                )
            history.append(
                HistoryRecord(
                    epoch=epoch,
                    batch=batch_index,
                    L_sil=grads.terms["sil"],
                    L_tex=grads.terms["tex"],
                    L_lap=grads.terms["lap"],
                    L_flat=grads.terms["flat"],
                    total=grads.total,
                )
            )

            step_grads = {}
            if not options.fix_geometry:
                step_grads["vertices"] = grads.d_vertices
            if grads.d_scattering is not None:
                step_grads["scattering"] = grads.d_scattering
            if not step_grads:
                continue
            try:
                adam_step(state, opt_params, step_grads)
            except DivergenceError as e:
                raise DivergenceError(str(e), last_good=mesh, epoch=epoch) from e
            if options.clamp_scattering:
                np.maximum(opt_params["scattering"], 0.0, out=opt_params["scattering"])
            mesh = TriangleMesh(
                opt_params["vertices"].copy(), mesh.facets, opt_params["scattering"].copy()
            )

        last = history[-1]
        message = (
            f"[RECON] epoch {epoch}/{options.epochs} loss {last.total:.5f} (sil {last.L_sil:.4f})"
        )
        if epoch % options.log_every == 0 or epoch == options.epochs:
            logger.info(message)
        else:
            logger.debug(message)
        snapshot_due = options.snapshot_every and epoch % options.snapshot_every == 0
        if on_snapshot is not None and snapshot_due:
            on_snapshot(epoch, mesh)

    return ReconstructionResult(mesh=mesh, history=history, epochs_run=options.epochs)


@dataclass
class PoseResult:
    """Output of :func:`estimate_pose`.

    ``final_pose`` is the pose with the best hard silhouette IoU seen, so
    ``final_iou >= initial_iou`` always holds.
    """

    initial_pose: PoseParameters
    final_pose: PoseParameters
    initial_iou: float
    final_iou: float
    silhouette: np.ndarray
    losses: list[float] = field(default_factory=list)
    truth_pose: PoseParameters | None = None

    @property
    def converged(self) -> bool:
        return self.final_iou >= POSE_CONVERGED_IOU

    def to_dict(self) -> dict:
        return {
            "truth": self.truth_pose.model_dump() if self.truth_pose else None,
            "initial": self.initial_pose.model_dump(),
            "final": self.final_pose.model_dump(),
            "initial_iou": self.initial_iou,
            "final_iou": self.final_iou,
            "converged": self.converged,
            "epochs": len(self.losses),
        }


def estimate_pose(
    observed: np.ndarray,
    mesh: TriangleMesh,
    init: RadarView,
    options: PoseOptions | None = None,
    params: RenderParams | None = None,
    grid: GridSpec | None = None,
    truth: PoseParameters | None = None,
) -> PoseResult:
    """Recover (alpha, beta, theta_x, theta_y, theta_z, scale) from one silhouette.

    Adam runs on the silhouette loss alone. Success is judged by silhouette
    IoU; different poses can produce the same silhouette, so the angles need
    not match the truth.

    Args:
        observed: (n_z, n_x) observed silhouette
        mesh: Known target mesh
        init: Initial view; its pose fields are the starting point
        options: Optimizer settings
        params: Render parameters of the observation
        grid: Mapping grid; built from ``init`` and ``observed`` when omitted
        truth: Ground-truth pose, only carried into the report

    Returns:
        PoseResult with the best pose found
    """
    options = options or PoseOptions()
    params = params or RenderParams()
    observed = np.asarray(observed, dtype=np.float64)
    if grid is None:
        n_z, n_x = observed.shape
        grid = grid_from_view(n_x, n_z, 0.05, init)
    if observed.shape != grid.image_shape:
        raise ValueError(
            f"Observed silhouette {observed.shape} does not match grid {grid.image_shape}"
        )
    sil_params = _training_params(params, options.train_sigma)

    def hard_iou(view: RadarView) -> tuple[float, np.ndarray]:
        image = render_silhouette(mesh, view, grid, params).data
        return silhouette_iou(image, observed), image

    initial_iou, best_image = hard_iou(init)
    best_iou, best_view = initial_iou, init
    state = OptimState(lr=options.lr, batch_size=1)
    values = {"pose": init.pose.as_vector()}
    view = init
    losses: list[float] = []
    logger.info(f"[POSE] start {init.pose.model_dump()} IoU {initial_iou:.4f}")

    for epoch in range(1, options.epochs + 1):
        sil = render_silhouette(mesh, view, grid, sil_params).data
        loss, d_sil = loss_silhouette(sil, observed)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"Pose loss became {loss} at epoch {epoch}", last_good=best_view.pose, epoch=epoch
            )
        losses.append(loss)
        grad = backward_pose(d_sil, mesh, view, grid, sil_params).pose_vector()
        try:
            adam_step(state, values, {"pose": grad})
        except DivergenceError as e:
            raise DivergenceError(str(e), last_good=best_view.pose, epoch=epoch) from e
        values["pose"][5] = max(values["pose"][5], MIN_SCALE)
        view = init.with_pose(PoseParameters.from_vector(values["pose"]))

        iou, image = hard_iou(view)
        if iou > best_iou:
            best_iou, best_view, best_image = iou, view, image
        message = f"[POSE] epoch {epoch}/{options.epochs} loss {loss:.5f} IoU {iou:.4f}"
        if epoch % options.log_every == 0 or epoch == options.epochs:
            logger.info(message)
        else:
            logger.debug(message)

    return PoseResult(
        initial_pose=init.pose,
        final_pose=best_view.pose,
        initial_iou=initial_iou,
        final_iou=best_iou,
        silhouette=best_image,
        losses=losses,
        truth_pose=truth,
    )
