"""Float image files (.fimg) and 8-bit PNG export.

A ``.fimg`` file is one ASCII header line ``FIMG <width> <height> <tag>``
followed by width * height little-endian float32 values, row-major. It is
the bit-exact source of truth; PNGs are derived views.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from src.errors import FileFormatError
from src.imaging.postprocess import DEFAULT_FLOOR_DB, db_to_u8, to_db

logger = logging.getLogger(__name__)

FIMG_MAGIC = "FIMG"
FIMG_DTYPE = np.dtype("<f4")
DOMAIN_TAGS = ("linear", "db", "binary")


@dataclass
class FloatImageFile:
    """A scalar image with its value-domain tag.

    Attributes:
        data: (height, width) float array
        tag: "linear", "db" or "binary"
    """

    data: np.ndarray
    tag: str = "linear"

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or 0 in self.data.shape:
            raise FileFormatError(f"Image must be a non-empty 2D array, got {self.data.shape}")
        if self.tag not in DOMAIN_TAGS:
            raise FileFormatError(f"Unknown domain tag '{self.tag}', expected one of {DOMAIN_TAGS}")
        if not np.all(np.isfinite(self.data)):
            raise FileFormatError("Image values must be finite")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def write(self, path: str | Path) -> Path:
        """Write the image; parent directories are created."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = f"{FIMG_MAGIC} {self.width} {self.height} {self.tag}\n".encode("ascii")
        with open(path, "wb") as f:
            f.write(header)
            f.write(self.data.astype(FIMG_DTYPE).tobytes(order="C"))
        logger.debug(f"[IO] wrote {path} ({self.width}x{self.height}, {self.tag})")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "FloatImageFile":
        """Read a ``.fimg`` file.

        Raises:
            FileNotFoundError: If the file does not exist
            FileFormatError: On a bad header or truncated data
        """
        path = Path(path)
        raw = path.read_bytes()
        newline = raw.find(b"\n")
        if newline < 0:
            raise FileFormatError(f"{path}: missing FIMG header line")
        try:
            magic, width, height, tag = raw[:newline].decode("ascii").split()
            width, height = int(width), int(height)
        except ValueError as e:
            raise FileFormatError(f"{path}: malformed header {raw[:newline]!r}") from e
        if magic != FIMG_MAGIC or width < 1 or height < 1:
            raise FileFormatError(f"{path}: not a FIMG file or bad dimensions")
        payload = raw[newline + 1 :]
        expected = width * height * FIMG_DTYPE.itemsize
        if len(payload) != expected:
            raise FileFormatError(
                f"{path}: expected {expected} data bytes for {width}x{height}, got {len(payload)}"
            )
        data = np.frombuffer(payload, dtype=FIMG_DTYPE).reshape(height, width)
        return cls(data=data.astype(np.float64), tag=tag)


def write_png(image_u8: np.ndarray, path: str | Path) -> Path:
    """Save an 8-bit grayscale image."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image_u8, dtype=np.uint8)).save(path)
    return path


def image_to_u8(image: FloatImageFile, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    """Display mapping per domain: linear goes through dB, binary and dB are rescaled."""
    if image.tag == "linear":
        return db_to_u8(to_db(image.data, floor_db), floor_db)
    if image.tag == "db":
        return db_to_u8(image.data, floor_db)
    return np.round(np.clip(image.data, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(
    data: np.ndarray, stem: str | Path, tag: str = "linear", floor_db: float = DEFAULT_FLOOR_DB
) -> tuple[Path, Path]:
    """Write ``<stem>.fimg`` and the PNG derived from it.

    The PNG is computed from the float32 values as stored, so it can be
    regenerated from the ``.fimg`` alone.

    Returns:
        (fimg path, png path)
    """
    stem = Path(stem)
    fimg = FloatImageFile(data=data, tag=tag)
    fimg_path = fimg.write(stem.with_suffix(".fimg"))
    stored = FloatImageFile.read(fimg_path)
    png_path = write_png(image_to_u8(stored, floor_db), stem.with_suffix(".png"))
    return fimg_path, png_path


def load_image(path: str | Path) -> np.ndarray:
    """Image data from a ``.fimg`` file, or a PNG scaled to [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".fimg":
        return FloatImageFile.read(path).data
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
