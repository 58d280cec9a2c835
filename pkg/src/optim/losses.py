"""Loss terms of the hybrid reconstruction objective and their gradients.

Image losses return their gradient with respect to the predicted image;
mesh regularizers return per-vertex gradients.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from src.mesh.models import MeshTopology, TriangleMesh
from src.mesh.topology import laplacian_matrix

logger = logging.getLogger(__name__)

FLATNESS_EPSILON = 1e-12

MODE_FULL = "full"
MODE_SILHOUETTE_ONLY = "silhouette-only"
MODES = (MODE_FULL, MODE_SILHOUETTE_ONLY)


class LossWeights(BaseModel):
    """Weights of the texture, Laplacian and flatness terms (silhouette weight is 1)."""

    tex: float = Field(default=1.0, ge=0, description="lambda_1, texture (L1) weight")
    lap: float = Field(default=0.03, ge=0, description="lambda_2, Laplacian weight")
    flat: float = Field(default=0.003, ge=0, description="lambda_3, flatness weight")


def loss_silhouette(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    """Negative IoU: 1 - sum(p t) / sum(p + t - p t).

    Returns:
        (loss, dL/dpred); (0, zeros) when both images are all zero
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"Image shapes differ: {pred.shape} vs {truth.shape}")
    inter = float(np.sum(pred * truth))
    union = float(np.sum(pred + truth - pred * truth))
    if union <= 0.0:
        return 0.0, np.zeros_like(pred)
    grad = -(truth * union - inter * (1.0 - truth)) / union**2
    return 1.0 - inter / union, grad


def loss_texture(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    """L1 distance sum |pred - truth| and its subgradient sign(pred - truth)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"Image shapes differ: {pred.shape} vs {truth.shape}")
    diff = pred - truth
    return float(np.abs(diff).sum()), np.sign(diff)


def loss_laplacian(mesh: TriangleMesh, topology: MeshTopology) -> tuple[float, np.ndarray]:
    """Sum of squared Laplacian coordinates and its gradient 2 L^T (L V)."""
    L = laplacian_matrix(topology)
    lv = np.asarray(L @ mesh.vertices)
    return float(np.sum(lv * lv)), 2.0 * np.asarray(L.T @ lv)


def dihedral_cosines(mesh: TriangleMesh, topology: MeshTopology) -> np.ndarray:
    """cos(theta) between the two in-plane perpendiculars at every shared edge.

    For edge (v1, v2) with opposite vertices v3 and v4, v5 and v6 are the feet
    of the perpendiculars from v3 and v4 onto the edge line; theta is the angle
    between v3 - v5 and v4 - v6. Flat neighbours give cos = -1. Edges with a
    perpendicular shorter than 1e-12 yield NaN.
    """
    cos, *_ = _flatness_terms(mesh, topology)
    return cos


def _flatness_terms(mesh: TriangleMesh, topology: MeshTopology):
    pairs = topology.shared_edge_pairs
    V = mesh.vertices
    v1, v2, v3, v4 = (V[pairs[:, c]] for c in range(2, 6))
    e = v2 - v1
    n = np.einsum("ij,ij->i", e, e)
    u = v3 - v1
    w = v4 - v1
    ue = np.einsum("ij,ij->i", u, e)
    we = np.einsum("ij,ij->i", w, e)
    safe_n = np.where(n > 0, n, 1.0)
    a = u - e * (ue / safe_n)[:, None]
    b = w - e * (we / safe_n)[:, None]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    valid = (na >= FLATNESS_EPSILON) & (nb >= FLATNESS_EPSILON) & (n > 0)
    denom = np.where(valid, na * nb, 1.0)
    cos = np.where(valid, np.einsum("ij,ij->i", a, b) / denom, np.nan)
    return cos, valid, a, b, na, nb, e, safe_n, ue, we


def loss_flatness(mesh: TriangleMesh, topology: MeshTopology) -> tuple[float, np.ndarray]:
    """Sum over shared edges of (1 + cos(theta))^2, with its analytic gradient.

    Edges whose perpendicular is shorter than 1e-12 are skipped.
    """
    grad = np.zeros_like(mesh.vertices)
    if len(topology.shared_edge_pairs) == 0:
        return 0.0, grad
    cos, valid, a, b, na, nb, e, n, ue, we = _flatness_terms(mesh, topology)
    if not valid.any():
        return 0.0, grad
    pairs = topology.shared_edge_pairs[valid]
    cos, a, b = cos[valid], a[valid], b[valid]
    na, nb, e, n, ue, we = na[valid], nb[valid], e[valid], n[valid], ue[valid], we[valid]

    scale = 2.0 * (1.0 + cos)
    # dcos/da and dcos/db; both are perpendicular to the edge
    ga = b / (na * nb)[:, None] - a * (cos / na**2)[:, None]
    gb = a / (na * nb)[:, None] - b * (cos / nb**2)[:, None]
    g3 = ga * scale[:, None]
    g4 = gb * scale[:, None]
    g2 = -(ga * ue[:, None] + gb * we[:, None]) / n[:, None] * scale[:, None]
    g1 = -(g2 + g3 + g4)

    for column, g in zip((2, 3, 4, 5), (g1, g2, g3, g4), strict=True):
        np.add.at(grad, pairs[:, column], g)
    return float(np.sum((1.0 + cos) ** 2)), grad


@dataclass
class HybridLoss:
    """Value and gradients of the hybrid objective for one view.

    Attributes:
        total: L_sil + lambda_1 L_tex + lambda_2 L_lap + lambda_3 L_flat
        terms: Unweighted term values keyed sil / tex / lap / flat
        d_silhouette: dL/dI_sil image
        d_sar: dL/dI_sar image (None in silhouette-only mode)
        d_vertices: Regularizer gradient w.r.t. vertices (weighted)
    """

    total: float
    terms: dict[str, float] = field(default_factory=dict)
    d_silhouette: np.ndarray | None = None
    d_sar: np.ndarray | None = None
    d_vertices: np.ndarray | None = None


def hybrid_loss(
    pred_silhouette: np.ndarray,
    truth_silhouette: np.ndarray,
    mesh: TriangleMesh,
    topology: MeshTopology,
    weights: LossWeights,
    mode: str = MODE_FULL,
    pred_sar: np.ndarray | None = None,
    truth_sar: np.ndarray | None = None,
) -> HybridLoss:
    """Weighted sum of the silhouette, texture, Laplacian and flatness losses.

    Silhouette-only mode drops the texture term entirely, so the value does not
    depend on any SAR image.

    Raises:
        ValueError: Unknown mode, or full mode without SAR images
    """
    if mode not in MODES:
        raise ValueError(f"Unknown loss mode '{mode}', expected one of {MODES}")
    l_sil, d_sil = loss_silhouette(pred_silhouette, truth_silhouette)

    l_tex, d_sar = 0.0, None
    if mode == MODE_FULL:
        if pred_sar is None or truth_sar is None:
            raise ValueError("Full mode needs predicted and observed SAR images")
        l_tex, d_tex = loss_texture(pred_sar, truth_sar)
        d_sar = weights.tex * d_tex

    l_lap, g_lap = loss_laplacian(mesh, topology)
    l_flat, g_flat = loss_flatness(mesh, topology)
    total = l_sil + weights.tex * l_tex + weights.lap * l_lap + weights.flat * l_flat
    return HybridLoss(
        total=total,
        terms={"sil": l_sil, "tex": l_tex, "lap": l_lap, "flat": l_flat},
        d_silhouette=d_sil,
        d_sar=d_sar,
        d_vertices=weights.lap * g_lap + weights.flat * g_flat,
    )


def silhouette_iou(a: np.ndarray, b: np.ndarray, threshold: float = 0.5) -> float:
    """Hard IoU of two silhouettes binarized at ``threshold``; 1.0 when both are empty."""
    ma = np.asarray(a) > threshold
    mb = np.asarray(b) > threshold
    union = np.logical_or(ma, mb).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(ma, mb).sum() / union)
