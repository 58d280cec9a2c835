"""Coordinate-system machinery: radar rotation, slant range, Euler pose, grids.

A posed mesh is mapped to the radar frame by the affine map ``v_r = A v + b``
with ``A = scale * R_e * R^T`` and ``b = -R^T p_r``: the radar rotation comes
first, then the target attitude R_e and the scale are applied in the radar
frame about the scene center. :func:`radar_transform_derivatives` gives
dA and db for every pose parameter (radians for angles).
"""

import logging
import math

import numpy as np

from src.errors import GeometryError
from src.radar.models import GridSpec, RadarView

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0

STANDARD_INCIDENTS = (15.0, 30.0, 45.0, 60.0)
STANDARD_AZIMUTHS = tuple(float(b) for b in range(0, 360, 45))
ISAR_INCIDENTS = (-30.0, -40.0, -50.0, -60.0)

POSE_PARAMETERS = ("incident", "azimuth", "euler_x", "euler_y", "euler_z", "scale")


def _rotation(alpha: float, beta: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [-cb, -ca * sb, -sa * sb],
            [0.0, sa, -ca],
            [sb, -ca * cb, -sa * cb],
        ]
    )


def _rotation_d_alpha(alpha: float, beta: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [0.0, sa * sb, -ca * sb],
            [0.0, ca, sa],
            [0.0, sa * cb, -ca * cb],
        ]
    )


def _rotation_d_beta(alpha: float, beta: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [sb, -ca * cb, -sa * cb],
            [0.0, 0.0, 0.0],
            [cb, ca * sb, sa * sb],
        ]
    )


def rotation_matrix(view: RadarView) -> np.ndarray:
    """World-to-radar rotation R; its columns are the radar axes X', Y', Z' in world axes.

    At alpha = 90, beta = 0 this is diag(-1, 1, -1).
    """
    return _rotation(math.radians(view.incident), math.radians(view.azimuth))


def radar_position(view: RadarView) -> np.ndarray:
    """Antenna phase center p_r in world coordinates."""
    if view.radar_position is not None:
        return np.asarray(view.radar_position, dtype=np.float64)
    return -view.reference_range * rotation_matrix(view)[:, 2]


def world_to_radar(v: np.ndarray, view: RadarView) -> np.ndarray:
    """v_r = R^T (v - p_r) for one point or an (N, 3) array. Pose is not applied."""
    R = rotation_matrix(view)
    return (np.asarray(v, dtype=np.float64) - radar_position(view)) @ R


def radar_to_world(v_r: np.ndarray, view: RadarView) -> np.ndarray:
    """Inverse of :func:`world_to_radar`."""
    R = rotation_matrix(view)
    return np.asarray(v_r, dtype=np.float64) @ R.T + radar_position(view)


def slant_range_transform(v_r: np.ndarray, f: float) -> np.ndarray:
    """Map radar-frame points to the slant plane: (x, y, z) -> (x, 0, sqrt(y^2 + z^2) - f)."""
    v_r = np.asarray(v_r, dtype=np.float64)
    out = np.zeros_like(v_r)
    out[..., 0] = v_r[..., 0]
    out[..., 2] = np.hypot(v_r[..., 1], v_r[..., 2]) - f
    return out


def _axis_x(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def _axis_y(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _axis_z(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _axis_x_d(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, c], [0.0, -c, -s]])


def _axis_y_d(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[-s, 0.0, -c], [0.0, 0.0, 0.0], [c, 0.0, -s]])


def _axis_z_d(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]])


def euler_matrix(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """R_e = R_y(theta_y) R_x(theta_x) R_z(theta_z), angles in degrees."""
    return (
        _axis_y(math.radians(theta_y))
        @ _axis_x(math.radians(theta_x))
        @ _axis_z(math.radians(theta_z))
    )


def euler_matrix_derivatives(
    theta_x: float, theta_y: float, theta_z: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """dR_e / d(theta_x, theta_y, theta_z), per radian."""
    tx, ty, tz = math.radians(theta_x), math.radians(theta_y), math.radians(theta_z)
    rx, ry, rz = _axis_x(tx), _axis_y(ty), _axis_z(tz)
    return (
        ry @ _axis_x_d(tx) @ rz,
        _axis_y_d(ty) @ rx @ rz,
        ry @ rx @ _axis_z_d(tz),
    )


def radar_transform(view: RadarView) -> tuple[np.ndarray, np.ndarray]:
    """Affine map (A, b) taking world vertices to the radar frame, pose included."""
    R = rotation_matrix(view)
    A = view.scale * euler_matrix(*view.euler) @ R.T
    b = -R.T @ radar_position(view)
    return A, b


def radar_transform_derivatives(view: RadarView) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(dA, db) for each pose parameter, keyed as in ``POSE_PARAMETERS``."""
    alpha, beta = math.radians(view.incident), math.radians(view.azimuth)
    R = _rotation(alpha, beta)
    Re = euler_matrix(*view.euler)
    dRe = euler_matrix_derivatives(*view.euler)
    dR_a = _rotation_d_alpha(alpha, beta)
    dR_b = _rotation_d_beta(alpha, beta)
    p_r = radar_position(view)

    if view.radar_position is None:
        # b = f * e_z whatever the angles
        db_a = np.zeros(3)
        db_b = np.zeros(3)
    else:
        db_a = -dR_a.T @ p_r
        db_b = -dR_b.T @ p_r

    zero = np.zeros(3)
    s = view.scale
    return {
        "incident": (s * Re @ dR_a.T, db_a),
        "azimuth": (s * Re @ dR_b.T, db_b),
        "euler_x": (s * dRe[0] @ R.T, zero),
        "euler_y": (s * dRe[1] @ R.T, zero),
        "euler_z": (s * dRe[2] @ R.T, zero),
        "scale": (Re @ R.T, zero),
    }


def posed_radar_vertices(vertices: np.ndarray, view: RadarView) -> np.ndarray:
    """World vertices after pose, in the radar frame."""
    A, b = radar_transform(view)
    return np.asarray(vertices, dtype=np.float64) @ A.T + b


def grid_from_view(n_x: int, n_z: int, r_z: float, view: RadarView) -> GridSpec:
    """Build the image and projection grids for a view.

    R_y = R_z cot|alpha| and N_y = ceil(N_z tan|alpha|); the azimuth cell size
    equals R_z.

    Raises:
        GeometryError: If alpha is 0 or |alpha| >= 90 degrees, or a size is invalid

    Example:
        >>> grid_from_view(128, 128, 0.05, RadarView(incident=60)).n_y
        222
    """
    alpha = abs(view.incident)
    if not 0.0 < alpha < 90.0:
        raise GeometryError(f"Incident angle must satisfy 0 < |alpha| < 90, got {view.incident}")
    if n_x < 1 or n_z < 1:
        raise GeometryError(f"Grid counts must be >= 1, got n_x={n_x}, n_z={n_z}")
    if r_z <= 0:
        raise GeometryError(f"Slant-range cell size must be positive, got {r_z}")
    tan_a = math.tan(math.radians(alpha))
    # guard the ceil against representation error at exact integers (tan 45 = 0.99999...)
    n_y = max(1, math.ceil(n_z * tan_a - 1e-9))
    return GridSpec(n_x=n_x, n_z=n_z, n_y=n_y, r_z=r_z, r_y=r_z / tan_a, r_x=r_z)


def isar_resolution(f_c: float, bandwidth: float, delta_phi: float) -> tuple[float, float]:
    """Azimuth and slant-range resolution of an ISAR acquisition.

    Args:
        f_c: Carrier frequency (Hz)
        bandwidth: Signal bandwidth B (Hz)
        delta_phi: Rotation angle over the aperture (radians)

    Returns:
        (r_a, r_r) in meters: c / (2 f_c delta_phi), c / (2 B)

    Raises:
        GeometryError: If any input is not positive
    """
    if f_c <= 0 or bandwidth <= 0 or delta_phi <= 0:
        raise GeometryError(
            f"ISAR parameters must be positive (f_c={f_c}, B={bandwidth}, delta_phi={delta_phi})"
        )
    return SPEED_OF_LIGHT / (2.0 * f_c * delta_phi), SPEED_OF_LIGHT / (2.0 * bandwidth)


def standard_view_grid(
    incidents: tuple[float, ...] = STANDARD_INCIDENTS,
    azimuths: tuple[float, ...] = STANDARD_AZIMUTHS,
    **view_fields,
) -> list[RadarView]:
    """The 32-view acquisition grid: every incident angle at every 45 degree azimuth."""
    return [
        RadarView(incident=a, azimuth=b, **view_fields) for a in incidents for b in azimuths
    ]


def isar_view_grid(**view_fields) -> list[RadarView]:
    """Negative-incidence grid used for spaceborne ISAR scenes."""
    return standard_view_grid(ISAR_INCIDENTS, STANDARD_AZIMUTHS, **view_fields)
