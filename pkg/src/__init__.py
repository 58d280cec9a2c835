"""Differentiable SAR - soft rasterization of triangle meshes into SAR images."""

__version__ = "0.1.0"
