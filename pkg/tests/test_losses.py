"""Tests for loss terms and their gradients."""

import numpy as np
import pytest

from src.mesh.models import TriangleMesh
from src.mesh.templates import box, icosphere
from src.mesh.topology import build_topology
from src.optim.losses import (
    MODE_FULL,
    MODE_SILHOUETTE_ONLY,
    LossWeights,
    dihedral_cosines,
    hybrid_loss,
    loss_flatness,
    loss_laplacian,
    loss_silhouette,
    loss_texture,
    silhouette_iou,
)
from src.render.gradients import finite_difference_oracle


def _bumpy_sphere(seed=0):
    mesh = icosphere(1)
    noise = np.random.default_rng(seed).normal(0.0, 0.05, mesh.vertices.shape)
    return mesh.with_vertices(mesh.vertices + noise)


class TestSilhouetteLoss:
    """Tests for the negative-IoU loss."""

    def test_identical_images(self):
        """A perfect match costs nothing."""
        image = np.array([[0.0, 1.0], [1.0, 0.0]])
        loss, _ = loss_silhouette(image, image)
        assert loss == 0.0

    def test_disjoint_images(self):
        """No overlap costs one."""
        loss, _ = loss_silhouette(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert loss == 1.0

    def test_partial_overlap(self):
        """Soft IoU uses products and the probabilistic union."""
        loss, _ = loss_silhouette(np.array([0.5, 1.0, 0.0]), np.array([1.0, 1.0, 1.0]))
        assert loss == pytest.approx(1.0 - 1.5 / 3.0)

    def test_both_empty(self):
        """Empty prediction and truth give zero loss and zero gradient."""
        loss, grad = loss_silhouette(np.zeros((3, 3)), np.zeros((3, 3)))
        assert loss == 0.0
        assert not grad.any()

    def test_gradient(self):
        """Analytic gradient matches central differences."""
        rng = np.random.default_rng(0)
        pred, truth = rng.uniform(size=(4, 5)), (rng.uniform(size=(4, 5)) > 0.5).astype(float)
        _, grad = loss_silhouette(pred, truth)
        numeric = finite_difference_oracle(lambda p: loss_silhouette(p, truth)[0], pred, h=1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-9)

    def test_shape_mismatch(self):
        """Images must share a shape."""
        with pytest.raises(ValueError):
            loss_silhouette(np.zeros((2, 2)), np.zeros((2, 3)))


class TestTextureLoss:
    """Tests for the L1 texture loss."""

    def test_value_and_sign(self):
        """L1 value with a sign subgradient that is zero on ties."""
        loss, grad = loss_texture(np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 0.5]))
        assert loss == pytest.approx(3.5)
        assert grad.tolist() == [-1.0, 0.0, 1.0]

    def test_shape_mismatch(self):
        """Images must share a shape."""
        with pytest.raises(ValueError):
            loss_texture(np.zeros(3), np.zeros(4))


class TestLaplacianLoss:
    """Tests for the Laplacian regularizer."""

    def test_gradient(self):
        """2 L^T L V matches central differences."""
        mesh = _bumpy_sphere()
        topo = build_topology(mesh)
        _, grad = loss_laplacian(mesh, topo)

        def value(vertices):
            return loss_laplacian(mesh.with_vertices(vertices), topo)[0]

        numeric = finite_difference_oracle(value, mesh.vertices, h=1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-8)

    def test_invariant_to_translation(self):
        """Moving the whole mesh leaves the loss unchanged."""
        mesh = _bumpy_sphere()
        topo = build_topology(mesh)
        moved = mesh.with_vertices(mesh.vertices + [3.0, -1.0, 2.0])
        assert loss_laplacian(moved, topo)[0] == pytest.approx(loss_laplacian(mesh, topo)[0])


class TestFlatnessLoss:
    """Tests for the flatness regularizer."""

    def test_box_value(self):
        """Twelve right-angle edges contribute one each; face diagonals are flat."""
        mesh = box()
        loss, _ = loss_flatness(mesh, build_topology(mesh))
        assert loss == pytest.approx(12.0)

    def test_flat_pair(self):
        """Two coplanar facets have cos = -1 and zero loss."""
        mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], [[0, 1, 2], [1, 3, 2]])
        topo = build_topology(mesh)
        np.testing.assert_allclose(dihedral_cosines(mesh, topo), [-1.0])
        loss, grad = loss_flatness(mesh, topo)
        assert loss == pytest.approx(0.0, abs=1e-24)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_gradient(self):
        """Analytic gradient matches central differences."""
        mesh = _bumpy_sphere(1)
        topo = build_topology(mesh)
        _, grad = loss_flatness(mesh, topo)

        def value(vertices):
            return loss_flatness(mesh.with_vertices(vertices), topo)[0]

        numeric = finite_difference_oracle(value, mesh.vertices, h=1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-6)

    def test_open_mesh_has_no_pairs(self):
        """A single facet has no shared edge."""
        mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        loss, grad = loss_flatness(mesh, build_topology(mesh))
        assert loss == 0.0
        assert not grad.any()


class TestHybridLoss:
    """Tests for the combined objective."""

    def _inputs(self):
        mesh = _bumpy_sphere()
        rng = np.random.default_rng(4)
        images = [rng.uniform(size=(6, 6)) for _ in range(4)]
        return mesh, build_topology(mesh), images

    def test_weighted_total(self):
        """Total is sil + l1 tex + l2 lap + l3 flat."""
        mesh, topo, (ps, ts, pa, ta) = self._inputs()
        weights = LossWeights(tex=0.5, lap=0.2, flat=0.1)
        result = hybrid_loss(ps, ts, mesh, topo, weights, MODE_FULL, pa, ta)
        t = result.terms
        expected = t["sil"] + 0.5 * t["tex"] + 0.2 * t["lap"] + 0.1 * t["flat"]
        assert result.total == pytest.approx(expected)
        np.testing.assert_allclose(result.d_sar, 0.5 * np.sign(pa - ta))

    def test_silhouette_only_ignores_sar(self):
        """Silhouette-only mode has no texture term and no SAR gradient."""
        mesh, topo, (ps, ts, pa, ta) = self._inputs()
        a = hybrid_loss(ps, ts, mesh, topo, LossWeights(), MODE_SILHOUETTE_ONLY)
        b = hybrid_loss(ps, ts, mesh, topo, LossWeights(), MODE_SILHOUETTE_ONLY, pa, ta)
        assert a.total == b.total
        assert a.terms["tex"] == 0.0
        assert a.d_sar is None

    def test_full_mode_needs_sar(self):
        """Full mode without SAR images is an error."""
        mesh, topo, (ps, ts, _, _) = self._inputs()
        with pytest.raises(ValueError, match="SAR"):
            hybrid_loss(ps, ts, mesh, topo, LossWeights(), MODE_FULL)

    def test_unknown_mode(self):
        """Only the two known modes are accepted."""
        mesh, topo, (ps, ts, _, _) = self._inputs()
        with pytest.raises(ValueError, match="mode"):
            hybrid_loss(ps, ts, mesh, topo, LossWeights(), "texture-only")

    def test_default_weights(self):
        """Defaults are 1, 0.03 and 0.003."""
        weights = LossWeights()
        assert (weights.tex, weights.lap, weights.flat) == (1.0, 0.03, 0.003)


class TestSilhouetteIoU:
    """Tests for the hard evaluation IoU."""

    def test_thresholded(self):
        """Images are binarized at 0.5 before comparison."""
        a = np.array([0.9, 0.6, 0.2, 0.0])
        b = np.array([1.0, 0.4, 0.7, 0.0])
        assert silhouette_iou(a, b) == pytest.approx(1.0 / 3.0)

    def test_both_empty(self):
        """Two empty silhouettes match perfectly."""
        assert silhouette_iou(np.zeros(4), np.zeros(4)) == 1.0
