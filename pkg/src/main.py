"""Command-line entry point for the differentiable SAR renderer.

Each subcommand resolves a RunConfig (config file, environment, flags) and
hands it to the matching function in ``src.commands``.
"""

import argparse
import logging
import sys
from typing import Any

from pydantic import ValidationError

from src import commands
from src.config import RunConfig, load_config
from src.errors import DSRError
from src.radar.geometry import standard_view_grid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_INPUT = 2

APP_LOGGERS = (
    "src.mesh",
    "src.radar",
    "src.render",
    "src.optim",
    "src.imaging",
    "src.tools",
    "src.commands",
    "src.config",
)


def configure_logging(debug: bool = False) -> None:
    """Configure logging for the application.

    Args:
        debug: If True, set level to DEBUG; otherwise INFO
    """
    level = logging.DEBUG if debug else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
    )

    for logger_name in APP_LOGGERS:
        logging.getLogger(logger_name).setLevel(level)

    # Third-party loggers should be quieter
    logging.getLogger("PIL").setLevel(logging.WARNING)

    if debug:
        logging.info("[LOGGING] Debug logging enabled - per-epoch progress will be visible")


def print_banner() -> None:
    """Print the application banner."""
    banner = """
    ========================================
     Differentiable SAR Renderer
     render / reconstruct / estimate pose
    ========================================
    """
    print(banner)


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="dsr",
        description="Differentiable SAR rendering and inverse reconstruction",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m src.main render --mesh data/fixtures/tank.obj --views 32 --out runs/tank
  python -m src.main reconstruct --input runs/tank --truth-mesh data/fixtures/tank.obj
  python -m src.main --config data/fixtures/pose.toml estimate-pose --mesh station.obj
  python -m src.main eval-iou a.obj b.obj --resolution 32
  python -m src.main filter-sidelobes image.fimg psf.fimg --peak-threshold-db -30
  python -m src.main synth-texture --mesh scene.obj --ground-height 0.0

Debug Logging:
  Use --debug to see per-epoch progress. Look for these log prefixes:
    [RENDER]      - forward rendering
    [RECON]       - reconstruction loop
    [POSE]        - pose estimation loop
    [FILTER]      - sidelobe filtering
    [IO]          - files read and written
        """,
    )
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("--seed", type=int, help="Seed for all randomness")
    parser.add_argument("--threads", type=int, help="Worker thread cap")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    sub = parser.add_subparsers(dest="command", metavar="<command>")

    render = sub.add_parser("render", help="Render SAR and silhouette images of a mesh")
    render.add_argument("--mesh", help="Input OBJ mesh")
    render.add_argument("--views", type=int, help="Use the first N views of the 32-view grid")
    render.add_argument("--incident", type=float, help="Single view incident angle (deg)")
    render.add_argument("--azimuth", type=float, default=0.0, help="Single view azimuth (deg)")

    recon = sub.add_parser("reconstruct", help="Reconstruct a mesh from rendered views")
    recon.add_argument("--input", required=True, help="Directory written by 'render'")
    recon.add_argument("--truth-mesh", help="Ground-truth mesh for the voxel IoU report")
    recon.add_argument("--template", help="Starting mesh (default: icosphere)")
    recon.add_argument("--mode", choices=["full", "silhouette-only"], help="Loss variant")
    recon.add_argument("--epochs", type=int, help="Number of epochs")
    recon.add_argument("--batch-size", type=int, help="Views per Adam step")
    recon.add_argument("--lr", type=float, help="Learning rate")
    recon.add_argument("--snapshot-every", type=int, help="Snapshot period in epochs")
    recon.add_argument("--fix-geometry", action="store_true", help="Only optimize scattering")

    pose = sub.add_parser("estimate-pose", help="Estimate viewing angles from one silhouette")
    pose.add_argument("--mesh", help="Known target mesh")
    pose.add_argument("--observed", help="Observed silhouette (.fimg or .png)")
    pose.add_argument("--epochs", type=int, help="Number of Adam steps")
    pose.add_argument("--lr", type=float, help="Learning rate")
    for prefix in ("truth", "init"):
        pose.add_argument(f"--{prefix}-incident", type=float, help=f"{prefix} incident (deg)")
        pose.add_argument(f"--{prefix}-azimuth", type=float, help=f"{prefix} azimuth (deg)")
        pose.add_argument(
            f"--{prefix}-euler",
            type=float,
            nargs=3,
            metavar=("X", "Y", "Z"),
            help=f"{prefix} Euler angles (deg)",
        )
        pose.add_argument(f"--{prefix}-scale", type=float, help=f"{prefix} scale")

    iou = sub.add_parser("eval-iou", help="Voxel IoU of two watertight meshes")
    iou.add_argument("mesh_a")
    iou.add_argument("mesh_b")
    iou.add_argument("--resolution", type=int, default=commands.DEFAULT_IOU_RESOLUTION)

    filt = sub.add_parser("filter-sidelobes", help="Suppress sidelobes with a PSF")
    filt.add_argument("image", help="Input .fimg image")
    filt.add_argument("psf", help="PSF .fimg (tag linear or db)")
    filt.add_argument("--peak-threshold-db", type=float, default=-30.0)
    filt.add_argument("--linear", action="store_true", help="Compare in the linear domain")

    tex = sub.add_parser("synth-texture", help="Assign Gamma-distributed scattering")
    tex.add_argument("--mesh", help="Input OBJ mesh")
    tex.add_argument("--ground-height", type=float, help="Background height threshold")
    return parser


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Config overrides from explicit command-line flags."""
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.debug:
        overrides["debug"] = True

    if args.command == "render":
        if args.incident is not None:
            overrides["views"] = [{"incident": args.incident, "azimuth": args.azimuth}]
        elif args.views is not None:
            grid = standard_view_grid()
            if not 1 <= args.views <= len(grid):
                raise ValueError(f"--views must be in 1..{len(grid)}, got {args.views}")
            overrides["views"] = [
                {"incident": v.incident, "azimuth": v.azimuth} for v in grid[: args.views]
            ]
    elif args.command == "reconstruct":
        optim = {
            "mode": args.mode,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "snapshot_every": args.snapshot_every,
            "fix_geometry": True if args.fix_geometry else None,
        }
        optim = {k: v for k, v in optim.items() if v is not None}
        if optim:
            overrides["optim"] = optim
    elif args.command == "estimate-pose":
        pose: dict[str, Any] = {
            k: v for k, v in {"epochs": args.epochs, "lr": args.lr}.items() if v is not None
        }
        for prefix in ("truth", "init"):
            values = commands.pose_from_args(
                getattr(args, f"{prefix}_incident"),
                getattr(args, f"{prefix}_azimuth"),
                getattr(args, f"{prefix}_euler"),
                getattr(args, f"{prefix}_scale"),
            )
            if values:
                pose[prefix] = values
        if pose:
            overrides["pose"] = pose
    elif args.command == "synth-texture" and args.ground_height is not None:
        overrides["texture"] = {"ground_height": args.ground_height}
    return overrides


def run_command(args: argparse.Namespace, config: RunConfig) -> None:
    """Dispatch to the command implementation and print its outcome."""
    if args.command == "render":
        summary = commands.cmd_render(config, args.mesh)
        print(f"[OK] Rendered {summary['views']} views into {config.output_dir}")
    elif args.command == "reconstruct":
        summary = commands.cmd_reconstruct(config, args.input, args.truth_mesh, args.template)
        print(f"[OK] Reconstruction written to {config.output_dir}")
        if "voxel_iou" in summary:
            print(f"  voxel IoU: {summary['voxel_iou']:.4f}")
    elif args.command == "estimate-pose":
        report = commands.cmd_estimate_pose(config, args.mesh, args.observed)
        print(commands.format_pose_table(report))
        if report["converged"]:
            print(f"[OK] Final silhouette IoU {report['final_iou']:.4f}")
        else:
            print(f"[WARNING] Pose did not converge (IoU {report['final_iou']:.4f} < 0.5)")
    elif args.command == "eval-iou":
        value = commands.cmd_eval_iou(args.mesh_a, args.mesh_b, args.resolution)
        print(f"{value:.6f}")
    elif args.command == "filter-sidelobes":
        summary = commands.cmd_filter_sidelobes(
            config, args.image, args.psf, args.peak_threshold_db, args.linear
        )
        print(f"[OK] Filtered image written to {config.output_dir}/{summary['output']}")
    elif args.command == "synth-texture":
        summary = commands.cmd_synth_texture(config, args.mesh)
        print(f"[OK] Textured mesh written to {config.output_dir}/{summary['output']}")


def main() -> None:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args()

    configure_logging(debug=args.debug)

    if args.command is None:
        print_banner()
        parser.print_help()
        sys.exit(EXIT_OK)

    try:
        config = load_config(args.config, collect_overrides(args))
        if config.debug and not args.debug:
            configure_logging(debug=True)
        run_command(args, config)
    except FileNotFoundError as e:
        print(f"[ERROR] {e}")
        sys.exit(EXIT_MISSING_INPUT)
    except (DSRError, ValidationError, ValueError) as e:
        print(f"[ERROR] {e}")
        sys.exit(EXIT_ERROR)
    except KeyboardInterrupt:
        print("\n[INFO] Stopped by user")
        sys.exit(EXIT_ERROR)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
