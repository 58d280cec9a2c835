"""File formats and run-directory persistence."""

from src.tools.image_files import FloatImageFile, load_image, save_image, write_png
from src.tools.run_store import RunStore

__all__ = [
    # Image files
    "FloatImageFile",
    "load_image",
    "save_image",
    "write_png",
    # Run persistence
    "RunStore",
]
