"""Image post-processing: dB display, PSF sidelobe filtering, silhouette masks."""

import logging

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

DEFAULT_FLOOR_DB = -60.0
DEFAULT_PEAK_THRESHOLD_DB = -30.0
# floor used when comparing images in dB; far below any PSF sidelobe level
COMPARE_FLOOR_DB = -200.0

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def to_db(image: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    """10 log10(x), with x clamped below at 10^(floor_db / 10).

    Raises:
        ValueError: If ``floor_db`` is not negative

    Example:
        >>> to_db(np.array([1.0, 0.1, 0.0]), -60.0)
        array([  0., -10., -60.])
    """
    if floor_db >= 0:
        raise ValueError(f"floor_db must be negative, got {floor_db}")
    x = np.asarray(image, dtype=np.float64)
    return 10.0 * np.log10(np.maximum(x, 10.0 ** (floor_db / 10.0)))


def db_to_u8(
    image_db: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB, max_db: float | None = None
) -> np.ndarray:
    """Linear remap of [floor_db, max_db] onto 0..255.

    ``max_db`` defaults to the image maximum. A flat image maps to zeros.
    """
    x = np.asarray(image_db, dtype=np.float64)
    if max_db is not None:
        top = float(max_db)
    else:
        top = float(x.max()) if x.size else floor_db
    if top <= floor_db:
        return np.zeros(x.shape, dtype=np.uint8)
    scaled = (np.clip(x, floor_db, top) - floor_db) / (top - floor_db)
    return np.round(scaled * 255.0).astype(np.uint8)


def find_peaks(
    image: np.ndarray, peak_threshold_db: float = DEFAULT_PEAK_THRESHOLD_DB
) -> np.ndarray:
    """Local maxima (3x3 neighbourhood) no more than ``-peak_threshold_db`` below the image max.

    Returns:
        (P, 2) integer (row, col) positions; empty when the image has no
        positive pixel
    """
    x = np.asarray(image, dtype=np.float64)
    if x.size == 0 or x.max() <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    level = x.max() * 10.0 ** (peak_threshold_db / 10.0)
    local_max = ndimage.maximum_filter(
        x, footprint=_EIGHT_CONNECTED, mode="constant", cval=-np.inf
    )
    return np.argwhere((x == local_max) & (x >= level) & (x > 0))


def _psf_relative(psf: np.ndarray, psf_domain: str, linear: bool) -> np.ndarray:
    """PSF in the comparison domain with its center moved to 0."""
    psf = np.asarray(psf, dtype=np.float64)
    if psf.ndim != 2 or psf.size == 0:
        raise ValueError(f"PSF must be a non-empty 2D array, got shape {psf.shape}")
    if psf_domain not in ("linear", "db"):
        raise ValueError(f"PSF domain must be 'linear' or 'db', got '{psf_domain}'")
    ci, cj = psf.shape[0] // 2, psf.shape[1] // 2
    if linear:
        values = psf if psf_domain == "linear" else 10.0 ** (psf / 10.0)
        return values - values[ci, cj]
    if psf_domain == "db":
        return psf - psf[ci, cj]
    if psf[ci, cj] <= 0:
        raise ValueError("Linear PSF must be positive at its center")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.where(psf > 0, psf / psf[ci, cj], 0.0))


def _suppression_pass(
    x: np.ndarray, peaks: np.ndarray, reference: np.ndarray, scale: float, linear: bool
) -> np.ndarray:
    """Mask of pixels that survive every peak in ``peaks``."""
    values = x if linear else to_db(x / scale, COMPARE_FLOOR_DB)
    ci, cj = reference.shape[0] // 2, reference.shape[1] // 2
    reach_i = reference.shape[0] - 1 - ci
    reach_j = reference.shape[1] - 1 - cj
    n_rows, n_cols = x.shape

    keep = np.ones(x.shape, dtype=bool)
    for pi, pj in peaks:
        r0, r1 = max(0, pi - reach_i), min(n_rows, pi + reach_i + 1)
        c0, c1 = max(0, pj - reach_j), min(n_cols, pj + reach_j + 1)
        di = np.abs(np.arange(r0, r1) - pi)
        dj = np.abs(np.arange(c0, c1) - pj)
        limit = reference[np.ix_(ci + di, cj + dj)]
        keep[r0:r1, c0:c1] &= (values[r0:r1, c0:c1] - values[pi, pj]) > limit
    keep[peaks[:, 0], peaks[:, 1]] = True
    return keep


def sidelobe_filter(
    image: np.ndarray,
    psf: np.ndarray,
    peak_threshold_db: float = DEFAULT_PEAK_THRESHOLD_DB,
    linear: bool = False,
    psf_domain: str = "linear",
) -> np.ndarray:
    """Suppress sidelobes around bright scatterers using the system PSF.

    A pixel x' is kept iff x' - x_p > PSF(|di|, |dj|) holds for every
    reference peak p within PSF reach; otherwise it is set to 0. Peaks are
    the local maxima found by :func:`find_peaks` and are always kept. By
    default both sides are compared in dB relative to their maxima; with
    ``linear=True`` raw intensities are compared against PSF - PSF(0, 0).
    Entries of the PSF that are -inf never suppress anything.

    Zeroing a pixel can turn a neighbour into a new local maximum, so peak
    search and suppression repeat until no pixel changes. The result is a
    fixed point: filtering it again returns it unchanged.

    Args:
        image: Linear-intensity image
        psf: Centered kernel (center at ``shape // 2``)
        peak_threshold_db: Peak level relative to the image max
        linear: Compare in the linear domain
        psf_domain: Value domain of ``psf``, "linear" or "db"

    Returns:
        Filtered copy of ``image``; unchanged when there is no peak
    """
    x = np.asarray(image, dtype=np.float64)
    peaks = find_peaks(x, peak_threshold_db)
    if len(peaks) == 0:
        logger.info("[FILTER] no peaks above threshold, image unchanged")
        return x.copy()

    reference = _psf_relative(psf, psf_domain, linear)
    # the global maximum is always a peak, so the dB scale never changes
    scale = float(x.max())
    out = x.copy()
    passes = 0
    while True:
        passes += 1
        keep = _suppression_pass(out, peaks, reference, scale, linear)
        filtered = np.where(keep, out, 0.0)
        if np.array_equal(filtered, out):
            break
        out = filtered
        peaks = find_peaks(out, peak_threshold_db)

    logger.info(
        f"[FILTER] {len(peaks)} peaks after {passes} passes, kept "
        f"{int(np.count_nonzero(out))}/{out.size} pixels "
        f"({'linear' if linear else 'dB'} comparison)"
    )
    return out


def extract_silhouette(image: np.ndarray, threshold: float) -> np.ndarray:
    """Binary target mask: threshold, keep the largest 8-connected blob, fill its holes.

    Returns:
        float64 array of 0.0 / 1.0
    """
    mask = np.asarray(image, dtype=np.float64) > threshold
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if count == 0:
        return np.zeros(mask.shape)
    sizes = np.bincount(labels.ravel())[1:]
    largest = int(np.argmax(sizes)) + 1
    blob = ndimage.binary_fill_holes(labels == largest)
    return blob.astype(np.float64)
