#!/usr/bin/env python3
"""Regenerate the bundled fixture meshes under data/fixtures.

Writes the tank and unit cube OBJ files read by the tests and the example
configs, plus a textured building scene and the space station used for
pose estimation demos.

Usage:
    python scripts/make_fixtures.py

Options:
    --out DIR     Output directory (default: data/fixtures)
    --seed N      Seed for the building texture
    --verbose     Show detailed logging
"""

import argparse
import logging
import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.imaging.textures import regions_by_height, synthesize_textures
from src.mesh.obj_io import save_mesh
from src.mesh.templates import building_scene, cuboid_with_turret, space_station, unit_cube

logger = logging.getLogger("make_fixtures")


def setup_logging(verbose: bool = False) -> None:
    """Set up logging configuration."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
    )


def make_fixtures(out: Path, seed: int = 0) -> list[Path]:
    """Write every fixture mesh into ``out``.

    The tank and cube carry no sidecar, so they load with unit scattering.
    """
    written = [
        save_mesh(cuboid_with_turret(), out / "tank.obj", write_scattering=False),
        save_mesh(unit_cube(), out / "unit_cube.obj", write_scattering=False),
        save_mesh(space_station(), out / "space_station.obj", write_scattering=False),
    ]
    scene = building_scene(2.0, 1.0)
    textured = scene.with_scattering(synthesize_textures(scene, regions_by_height(scene), seed))
    written.append(save_mesh(textured, out / "building.obj"))
    return written


def main() -> None:
    parser = argparse.ArgumentParser(description="Regenerate fixture meshes")
    parser.add_argument("--out", default="data/fixtures", help="Output directory")
    parser.add_argument("--seed", type=int, default=0, help="Texture seed")
    parser.add_argument("--verbose", action="store_true", help="Show detailed logging")
    args = parser.parse_args()

    setup_logging(args.verbose)
    for path in make_fixtures(Path(args.out), args.seed):
        logger.info(f"[OK] {path}")


if __name__ == "__main__":
    main()
