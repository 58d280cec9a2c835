"""Command implementations behind the CLI.

Each command takes a resolved :class:`RunConfig` plus its own inputs, writes
its files under ``config.output_dir`` and returns a summary dict. Errors are
raised, never printed; ``src.main`` turns them into exit codes.
"""

import logging
from pathlib import Path

import numpy as np

from src.config import RunConfig
from src.errors import DivergenceError
from src.imaging.postprocess import sidelobe_filter
from src.imaging.textures import regions_by_height, synthesize_textures
from src.mesh.obj_io import load_mesh, save_mesh
from src.mesh.templates import icosphere
from src.mesh.voxel import mesh_iou
from src.optim.losses import MODE_FULL
from src.optim.reconstruct import estimate_pose, reconstruct
from src.radar.geometry import POSE_PARAMETERS, grid_from_view
from src.render.sar import render_sar, render_silhouette
from src.tools.image_files import FloatImageFile, load_image, save_image
from src.tools.run_store import RunStore

logger = logging.getLogger(__name__)

DEFAULT_IOU_RESOLUTION = 32


def _require_file(path: str | Path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Input not found: {path}")
    return path


def _mesh_path(config: RunConfig, mesh_path: str | Path | None) -> Path:
    if mesh_path is None:
        if not config.meshes:
            raise FileNotFoundError("No mesh given (use --mesh or 'meshes' in the config file)")
        mesh_path = config.meshes[0]
    return _require_file(mesh_path)


def _open_store(config: RunConfig) -> RunStore:
    store = RunStore(config.output_dir)
    store.write_config(config.model_dump_json(indent=2))
    return store


def cmd_render(config: RunConfig, mesh_path: str | Path | None = None) -> dict:
    """Render SAR and silhouette images of a mesh for every configured view.

    Writes ``<view>_sar.fimg/.png`` and ``<view>_sil.fimg/.png`` per view,
    plus ``views.json`` so the output directory can feed ``reconstruct``.
    """
    path = _mesh_path(config, mesh_path)
    mesh = load_mesh(path)
    views = config.resolve_views()
    store = _open_store(config)
    g = config.grid

    entries = []
    for view in views:
        grid = grid_from_view(g.n_x, g.n_z, g.r_z, view)
        sar, _ = render_sar(mesh, view, grid, config.render, threads=config.threads)
        sil = render_silhouette(mesh, view, grid, config.render)
        save_image(sar.data, store.path(f"{view.label}_sar"), tag="linear")
        save_image(sil.data, store.path(f"{view.label}_sil"), tag="binary")
        entries.append(
            {
                "view": view.model_dump(mode="json"),
                "sar": f"{view.label}_sar.fimg",
                "silhouette": f"{view.label}_sil.fimg",
                "silhouette_max": float(sil.data.max()),
            }
        )
        logger.info(
            f"[RENDER] {view.label}: SAR max {sar.data.max():.4g}, "
            f"silhouette max {sil.data.max():.4f}"
        )
    store.write_manifest(g.n_x, g.n_z, g.r_z, entries)
    summary = {
        "command": "render",
        "mesh": str(path),
        "views": len(views),
        "files": 4 * len(views),
    }
    store.write_summary(summary)
    return summary


def cmd_reconstruct(
    config: RunConfig,
    input_dir: str | Path,
    truth_mesh: str | Path | None = None,
    template_mesh: str | Path | None = None,
) -> dict:
    """Reconstruct a mesh from the views of a ``render`` output directory.

    Writes ``recon.obj`` (``recon.scat`` in full mode), ``history.csv``,
    optional snapshots and ``summary.json``. On divergence the last good
    mesh is saved as a snapshot before the error propagates.
    """
    source = RunStore(_require_file(input_dir), create=False)
    _require_file(source.manifest_file)
    options = config.optim
    full = options.mode == MODE_FULL
    views = source.load_view_set(require_sar=full)
    if options.fix_geometry and template_mesh is None:
        raise ValueError("fix_geometry needs a template mesh with the known geometry")
    if template_mesh is not None:
        template = load_mesh(_require_file(template_mesh))
    else:
        template = icosphere(options.template_subdivisions, options.template_radius)
    truth = load_mesh(_require_file(truth_mesh)) if truth_mesh is not None else None

    store = _open_store(config)
    try:
        result = reconstruct(
            views,
            template,
            options=options,
            weights=config.loss.weights(),
            params=config.render,
            seed=config.seed,
            threads=config.threads,
            on_snapshot=store.save_snapshot,
        )
    except DivergenceError as e:
        if e.last_good is not None:
            store.save_snapshot(e.epoch or 0, e.last_good)
        store.write_summary({"command": "reconstruct", "status": "diverged", "error": str(e)})
        raise

    save_mesh(result.mesh, store.path("recon.obj"), write_scattering=full)
    store.write_history(result.history)
    summary = {"command": "reconstruct", "status": "ok", "mode": options.mode, **result.to_dict()}
    if truth is not None:
        summary["voxel_iou"] = mesh_iou(result.mesh, truth, DEFAULT_IOU_RESOLUTION)
        logger.info(f"[RECON] voxel IoU vs truth: {summary['voxel_iou']:.4f}")
    store.write_summary(summary)
    return summary


def format_pose_table(report: dict) -> str:
    """Pose report laid out as Ground Truth / Initialization / Prediction columns."""
    columns = [
        ("Ground Truth", report["truth"]),
        ("Initialization", report["initial"]),
        ("Prediction", report["final"]),
    ]

    def cell(pose: dict | None, name: str) -> str:
        if pose is None:
            return "-"
        if name.startswith("euler_"):
            return f"{pose['euler']['xyz'.index(name[-1])]:.2f}"
        return f"{pose[name]:.3f}" if name == "scale" else f"{pose[name]:.2f}"

    lines = [f"{'':<10}" + "".join(f"{title:>16}" for title, _ in columns)]
    for name in POSE_PARAMETERS:
        lines.append(f"{name:<10}" + "".join(f"{cell(p, name):>16}" for _, p in columns))
    truth_iou = "1.0000" if report["truth"] is not None else "-"
    lines.append(
        f"{'IoU':<10}{truth_iou:>16}{report['initial_iou']:>16.4f}{report['final_iou']:>16.4f}"
    )
    return "\n".join(lines) + "\n"


def cmd_estimate_pose(
    config: RunConfig,
    mesh_path: str | Path | None = None,
    observed_path: str | Path | None = None,
) -> dict:
    """Estimate the pose of a known mesh from one silhouette.

    The observed silhouette is read from ``observed_path`` or, when absent,
    rendered from ``config.pose.truth``. Writes ``pose_report.json``,
    ``pose_report.txt`` and the predicted silhouette.
    """
    mesh = load_mesh(_mesh_path(config, mesh_path))
    pose = config.pose
    init_view = config.base_view(pose.init)
    g = config.grid
    grid = grid_from_view(g.n_x, g.n_z, g.r_z, init_view)

    if observed_path is not None:
        observed = load_image(_require_file(observed_path))
    elif pose.truth is not None:
        observed = render_silhouette(mesh, config.base_view(pose.truth), grid, config.render).data
    else:
        raise ValueError("estimate-pose needs an observed silhouette or a truth pose")

    store = _open_store(config)
    result = estimate_pose(
        observed, mesh, init_view, options=pose, params=config.render, grid=grid, truth=pose.truth
    )
    report = result.to_dict()
    store.write_json(store.path("pose_report.json"), report)
    store.path("pose_report.txt").write_text(format_pose_table(report))
    save_image(result.silhouette, store.path("predicted_sil"), tag="binary")
    save_image(observed, store.path("observed_sil"), tag="binary")
    if not result.converged:
        logger.warning(f"[POSE] did not converge: final IoU {result.final_iou:.4f} < 0.5")
    store.write_summary({"command": "estimate-pose", **report})
    return report


def cmd_eval_iou(
    mesh_a: str | Path, mesh_b: str | Path, resolution: int = DEFAULT_IOU_RESOLUTION
) -> float:
    """Voxel IoU of two watertight meshes."""
    a = load_mesh(_require_file(mesh_a))
    b = load_mesh(_require_file(mesh_b))
    iou = mesh_iou(a, b, resolution)
    logger.info(f"[VOXEL] IoU({mesh_a}, {mesh_b}) at {resolution}^3 = {iou:.6f}")
    return iou


def cmd_filter_sidelobes(
    config: RunConfig,
    image_path: str | Path,
    psf_path: str | Path,
    peak_threshold_db: float = -30.0,
    linear: bool = False,
) -> dict:
    """Filter sidelobes of a ``.fimg`` image with a ``.fimg`` PSF.

    The PSF's domain tag says whether its values are linear or dB.
    """
    image = FloatImageFile.read(_require_file(image_path))
    psf = FloatImageFile.read(_require_file(psf_path))
    psf_domain = "db" if psf.tag == "db" else "linear"
    filtered = sidelobe_filter(
        image.data, psf.data, peak_threshold_db, linear=linear, psf_domain=psf_domain
    )
    store = _open_store(config)
    stem = Path(image_path).stem
    fimg, png = save_image(filtered, store.path(f"{stem}_filtered"), tag=image.tag)
    summary = {
        "command": "filter-sidelobes",
        "image": str(image_path),
        "kept_pixels": int(np.count_nonzero(filtered)),
        "output": fimg.name,
    }
    store.write_summary(summary)
    return summary


def cmd_synth_texture(config: RunConfig, mesh_path: str | Path | None = None) -> dict:
    """Assign Gamma-distributed scattering to a mesh (target vs ground by height).

    Writes ``<mesh>_textured.obj`` with its ``.scat`` sidecar.
    """
    path = _mesh_path(config, mesh_path)
    mesh = load_mesh(path)
    t = config.texture
    spec = regions_by_height(
        mesh,
        ground_height=t.ground_height,
        target=(t.target_shape, t.target_scale),
        background=(t.background_shape, t.background_scale),
    )
    scattering = synthesize_textures(mesh, spec, seed=config.seed)
    store = _open_store(config)
    out = save_mesh(mesh.with_scattering(scattering), store.path(f"{path.stem}_textured.obj"))
    counts = {region.name: len(region.facets) for region in spec.regions}
    logger.info(f"[TEXTURE] {counts} -> {out}")
    summary = {"command": "synth-texture", "output": out.name, "regions": counts}
    store.write_summary(summary)
    return summary


def pose_from_args(
    incident: float | None,
    azimuth: float | None,
    euler: list[float] | None,
    scale: float | None,
) -> dict | None:
    """Pose override dict from CLI values; None when no value was given."""
    values = {
        "incident": incident,
        "azimuth": azimuth,
        "euler": tuple(euler) if euler is not None else None,
        "scale": scale,
    }
    values = {k: v for k, v in values.items() if v is not None}
    return values or None
