"""Losses, the Adam optimizer and the reconstruction / pose loops."""

from src.optim.adam import OptimState, adam_step
from src.optim.losses import (
    HybridLoss,
    LossWeights,
    dihedral_cosines,
    hybrid_loss,
    loss_flatness,
    loss_laplacian,
    loss_silhouette,
    loss_texture,
    silhouette_iou,
)
from src.optim.reconstruct import (
    PoseOptions,
    PoseResult,
    ReconstructionResult,
    ReconstructOptions,
    ViewSample,
    ViewSet,
    batch_gradients,
    estimate_pose,
    reconstruct,
)

__all__ = [
    # Losses
    "HybridLoss",
    "LossWeights",
    "dihedral_cosines",
    "hybrid_loss",
    "loss_flatness",
    "loss_laplacian",
    "loss_silhouette",
    "loss_texture",
    "silhouette_iou",
    # Optimizer
    "OptimState",
    "adam_step",
    # Loops
    "PoseOptions",
    "PoseResult",
    "ReconstructOptions",
    "ReconstructionResult",
    "ViewSample",
    "ViewSet",
    "batch_gradients",
    "estimate_pose",
    "reconstruct",
]
