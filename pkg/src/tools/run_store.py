"""Run directory persistence.

A run directory holds everything a command produced:

    config.json             resolved configuration
    views.json              manifest of rendered views and their image files
    history.csv             per-batch loss terms of a reconstruction
    snapshots/epoch_XXXX.obj
    summary.json            final metrics of the command
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any

from src.mesh.models import TriangleMesh
from src.mesh.obj_io import load_mesh, save_mesh
from src.optim.reconstruct import HISTORY_COLUMNS, HistoryRecord, ViewSample, ViewSet
from src.radar.models import RadarView
from src.tools.image_files import load_image

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class RunStore:
    """Reads and writes the files of one run directory.

    Example:
        >>> store = RunStore("out/run1")
        >>> store.write_summary({"iou": 0.61})
        >>> store.read_summary()["iou"]
        0.61
    """

    def __init__(self, root: str | Path, create: bool = True):
        """Initialize the store.

        Args:
            root: Run directory
            create: Create the directory if it does not exist
        """
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)

    @property
    def config_file(self) -> Path:
        return self.root / "config.json"

    @property
    def manifest_file(self) -> Path:
        return self.root / "views.json"

    @property
    def history_file(self) -> Path:
        return self.root / "history.csv"

    @property
    def summary_file(self) -> Path:
        return self.root / "summary.json"

    @property
    def snapshot_dir(self) -> Path:
        return self.root / "snapshots"

    def path(self, name: str) -> Path:
        """Path of a file inside the run directory."""
        return self.root / name

    def write_json(self, path: Path, data: Any) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(data, f, indent=2)
        logger.debug(f"[IO] wrote {path}")
        return path

    def write_config(self, config_json: str) -> Path:
        """Store an already-serialized configuration verbatim."""
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        self.config_file.write_text(config_json)
        return self.config_file

    def write_manifest(self, n_x: int, n_z: int, r_z: float, entries: list[dict]) -> Path:
        """Write ``views.json``.

        Args:
            n_x, n_z, r_z: Shared mapping-plane discretization
            entries: One dict per view with ``view`` (RadarView dump) and the
                relative file names under ``silhouette`` and ``sar``
        """
        return self.write_json(
            self.manifest_file,
            {
                "version": MANIFEST_VERSION,
                "grid": {"n_x": n_x, "n_z": n_z, "r_z": r_z},
                "views": entries,
            },
        )

    def read_manifest(self) -> dict:
        """Load ``views.json``.

        Raises:
            FileNotFoundError: If the run has no manifest
        """
        with open(self.manifest_file) as f:
            return json.load(f)

    def load_view_set(self, require_sar: bool = False) -> ViewSet:
        """Build a ViewSet from the manifest and the image files it names."""
        manifest = self.read_manifest()
        grid = manifest["grid"]
        samples = []
        for entry in manifest["views"]:
            view = RadarView.model_validate(entry["view"])
            silhouette = load_image(self.root / entry["silhouette"])
            sar = None
            if entry.get("sar"):
                sar_path = self.root / entry["sar"]
                if sar_path.exists():
                    sar = load_image(sar_path)
            if require_sar and sar is None:
                raise FileNotFoundError(f"No SAR image for view {view.label} in {self.root}")
            samples.append(ViewSample(view=view, silhouette=silhouette, sar=sar))
        logger.info(f"[IO] loaded {len(samples)} views from {self.manifest_file}")
        return ViewSet(samples=samples, n_x=grid["n_x"], n_z=grid["n_z"], r_z=grid["r_z"])

    def write_history(self, history: list[HistoryRecord]) -> Path:
        """Write ``history.csv`` with one row per optimizer batch."""
        with open(self.history_file, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=HISTORY_COLUMNS)
            writer.writeheader()
            for record in history:
                row = record.to_dict()
                for key in HISTORY_COLUMNS[2:]:
                    row[key] = repr(float(row[key]))
                writer.writerow(row)
        return self.history_file

    def read_history(self) -> list[dict[str, float]]:
        with open(self.history_file, newline="") as f:
            return [
                {k: (int(v) if k in ("epoch", "batch") else float(v)) for k, v in row.items()}
                for row in csv.DictReader(f)
            ]

    def save_snapshot(self, epoch: int, mesh: TriangleMesh) -> Path:
        """Write ``snapshots/epoch_XXXX.obj`` (with scattering sidecar)."""
        path = self.snapshot_dir / f"epoch_{epoch:04d}.obj"
        save_mesh(mesh, path)
        logger.debug(f"[IO] snapshot {path}")
        return path

    def latest_snapshot(self) -> TriangleMesh | None:
        """Most recent snapshot, or None when none was written."""
        if not self.snapshot_dir.exists():
            return None
        snapshots = sorted(self.snapshot_dir.glob("epoch_*.obj"))
        return load_mesh(snapshots[-1]) if snapshots else None

    def write_summary(self, summary: dict) -> Path:
        return self.write_json(self.summary_file, summary)

    def read_summary(self) -> dict:
        with open(self.summary_file) as f:
            return json.load(f)
