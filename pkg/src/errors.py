"""Exception hierarchy for the differentiable SAR renderer.

Input problems subclass ValueError as well, so callers can keep catching
ValueError the usual way. Everything raised on purpose by this package
derives from DSRError, which the CLI maps to exit code 1.
"""

from typing import Any


class DSRError(Exception):
    """Base class for all errors raised by this package."""


class MeshFormatError(DSRError, ValueError):
    """An OBJ or scattering sidecar file could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None, path: Any = None):
        self.line_number = line_number
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}"
        if line_number is not None:
            location = f"{location}:{line_number}" if location else f"line {line_number}"
        super().__init__(f"{location}: {message}" if location else message)


class MeshValidationError(DSRError, ValueError):
    """A mesh violates an index, area or scattering invariant."""


class NonWatertightError(DSRError, ValueError):
    """Interior voxel fill was requested for a mesh with open edges."""


class GeometryError(DSRError, ValueError):
    """Invalid viewing angle, grid, depth range or other geometric input."""


class DegenerateFacetError(DSRError, ValueError):
    """A projected facet has (numerically) zero area."""


class CacheMismatchError(DSRError, ValueError):
    """A ForwardCache was produced for a different scene than the one given."""


class FileFormatError(DSRError, ValueError):
    """A float image or voxel dump could not be decoded."""


class DivergenceError(DSRError, RuntimeError):
    """The optimization produced a non-finite loss or gradient.

    Attributes:
        last_good: The most recent parameter state whose loss was finite
            (a TriangleMesh for reconstruction, a pose for pose estimation).
        epoch: Epoch at which the divergence was detected.
    """

    def __init__(self, message: str, last_good: Any = None, epoch: int | None = None):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch


class TextureSpecError(DSRError, ValueError):
    """Texture regions overlap or leave facets without a distribution."""
