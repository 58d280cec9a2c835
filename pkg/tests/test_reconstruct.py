"""Tests for multi-view reconstruction and pose estimation."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import DivergenceError
from src.mesh.templates import box, cuboid_with_turret, icosphere, space_station
from src.mesh.topology import build_topology
from src.mesh.voxel import mesh_iou
from src.optim.losses import (
    MODE_FULL,
    MODE_SILHOUETTE_ONLY,
    LossWeights,
    dihedral_cosines,
    loss_flatness,
)
from src.optim.reconstruct import (
    HISTORY_COLUMNS,
    PoseOptions,
    ReconstructOptions,
    ViewSample,
    ViewSet,
    estimate_pose,
    reconstruct,
)
from src.radar.geometry import grid_from_view, standard_view_grid
from src.radar.models import RadarView
from src.render.raster import RenderParams
from src.render.sar import render_silhouette

SHARP = RenderParams()
N = 24
R_Z = 0.1


def _views():
    return [RadarView(incident=a, azimuth=b) for a in (30.0, 60.0) for b in (0.0, 90.0)]


def _tank_template():
    """Icosphere(3) raised to the tank's mid-height."""
    sphere = icosphere(3, 1.5)
    return sphere.with_vertices(sphere.vertices + [0.0, 0.65, 0.0])


@pytest.fixture(scope="module")
def box_views():
    """Silhouettes and SAR images of a flat box from four directions."""
    return ViewSet.render(box((1.2, 0.6, 1.2)), _views(), N, N, R_Z, SHARP)


@pytest.fixture
def template():
    return icosphere(1, 0.4)


class TestViewSet:
    """Tests for ViewSet validation."""

    def test_shape_mismatch(self):
        """Every silhouette must match (n_z, n_x)."""
        sample = ViewSample(view=RadarView(), silhouette=np.zeros((4, 5)))
        with pytest.raises(ValueError, match="shape"):
            ViewSet(samples=[sample], n_x=4, n_z=4, r_z=0.1)

    def test_sar_shape_mismatch(self):
        """SAR images are checked too."""
        sample = ViewSample(view=RadarView(), silhouette=np.zeros((4, 4)), sar=np.zeros((3, 4)))
        with pytest.raises(ValueError, match="SAR"):
            ViewSet(samples=[sample], n_x=4, n_z=4, r_z=0.1)

    def test_silhouette_range(self):
        """Silhouette values must lie in [0, 1]."""
        sample = ViewSample(view=RadarView(), silhouette=np.full((4, 4), 1.5))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            ViewSet(samples=[sample], n_x=4, n_z=4, r_z=0.1)

    def test_has_sar(self, box_views):
        """Rendered view sets carry SAR unless asked not to."""
        assert box_views.has_sar
        assert len(box_views) == 4
        plain = ViewSet.render(box(), _views()[:1], 8, 8, 0.2, SHARP, with_sar=False)
        assert not plain.has_sar
        assert not ViewSet(samples=[], n_x=8, n_z=8, r_z=0.2).has_sar

    def test_grid_follows_view(self, box_views):
        """Each view gets its own projection grid."""
        steep = box_views.grid_for(RadarView(incident=60.0))
        shallow = box_views.grid_for(RadarView(incident=30.0))
        assert steep.image_shape == shallow.image_shape == (N, N)
        assert steep.n_y > shallow.n_y


class TestReconstructOptions:
    """Tests for ReconstructOptions."""

    def test_defaults(self):
        """Adam at 0.01 with batches of eight for 500 epochs."""
        options = ReconstructOptions()
        assert (options.lr, options.batch_size, options.epochs) == (0.01, 8, 500)
        assert options.mode == MODE_FULL

    def test_unknown_mode(self):
        """Only known modes validate."""
        with pytest.raises(ValidationError):
            ReconstructOptions(mode="bogus")


class TestReconstruct:
    """Tests for reconstruct."""

    def test_requires_views(self, template):
        """An empty view set is an error."""
        with pytest.raises(ValueError, match="view"):
            reconstruct(ViewSet(samples=[], n_x=8, n_z=8, r_z=0.1), template)

    def test_full_mode_requires_sar(self, template):
        """Full mode refuses silhouette-only observations."""
        views = ViewSet.render(box(), _views()[:1], 8, 8, 0.2, SHARP, with_sar=False)
        with pytest.raises(ValueError, match="SAR"):
            reconstruct(views, template, ReconstructOptions(mode=MODE_FULL, epochs=1))

    def test_silhouette_loss_decreases(self, box_views, template):
        """Ten epochs shrink the silhouette mismatch."""
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=10, batch_size=2, lr=0.02)
        result = reconstruct(box_views, template, options)
        assert len(result.history) == 20
        assert result.epochs_run == 10

        def epoch_sil(epoch):
            return sum(r.L_sil for r in result.history if r.epoch == epoch)

        assert epoch_sil(10) < epoch_sil(1)
        assert result.mesh.n_vertices == template.n_vertices
        assert np.array_equal(result.mesh.facets, template.facets)

    def test_template_untouched(self, box_views, template):
        """The input mesh is not modified in place."""
        original = template.vertices.copy()
        reconstruct(box_views, template, ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=1))
        assert np.array_equal(template.vertices, original)

    def test_batch_size_capped_by_views(self, box_views, template):
        """A batch larger than the view set is one batch per epoch."""
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=3, batch_size=50)
        result = reconstruct(box_views, template, options)
        assert len(result.history) == 3
        assert [r.batch for r in result.history] == [0, 0, 0]

    def test_fix_geometry(self, box_views):
        """With geometry fixed only scattering changes."""
        start = box((1.2, 0.6, 1.2), scattering=0.5)
        options = ReconstructOptions(epochs=2, batch_size=4, fix_geometry=True)
        result = reconstruct(box_views, start, options)
        assert np.array_equal(result.mesh.vertices, start.vertices)
        assert not np.array_equal(result.mesh.scattering, start.scattering)

    def test_scattering_clamped(self):
        """Scattering driven toward negative values stops at zero."""
        dark = box((1.2, 0.6, 1.2), scattering=0.0)
        views = ViewSet.render(dark, _views(), N, N, R_Z, SHARP)
        start = dark.with_scattering(np.full(dark.n_facets, 0.02))
        options = ReconstructOptions(epochs=5, batch_size=4, fix_geometry=True)
        result = reconstruct(views, start, options)
        assert result.mesh.scattering.min() >= 0.0
        assert result.mesh.scattering.min() < 0.02

    def test_snapshots(self, box_views, template):
        """The snapshot callback fires every snapshot_every epochs."""
        seen = []
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=4, snapshot_every=2)
        reconstruct(box_views, template, options, on_snapshot=lambda e, m: seen.append((e, m.n_facets)))
        assert seen == [(2, template.n_facets), (4, template.n_facets)]

    def test_divergence_keeps_last_good(self, template):
        """A NaN observation stops the run with the previous mesh attached."""
        grid_view = RadarView(incident=45.0)
        bad = np.zeros((8, 8))
        bad[3, 3] = np.nan
        views = ViewSet(samples=[ViewSample(view=grid_view, silhouette=bad)], n_x=8, n_z=8, r_z=0.2)
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=3)
        with pytest.raises(DivergenceError) as info:
            reconstruct(views, template, options)
        assert info.value.epoch == 1
        assert np.array_equal(info.value.last_good.vertices, template.vertices)

    def test_threads_do_not_change_result(self, box_views, template):
        """Worker threads give bit-identical meshes."""
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=2, batch_size=4)
        one = reconstruct(box_views, template, options, threads=1)
        two = reconstruct(box_views, template, options, threads=2)
        assert np.array_equal(one.mesh.vertices, two.mesh.vertices)

    def test_seed_is_deterministic(self, box_views, template):
        """The same seed reproduces the same run."""
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=2, batch_size=1)
        a = reconstruct(box_views, template, options, seed=3)
        b = reconstruct(box_views, template, options, seed=3)
        assert np.array_equal(a.mesh.vertices, b.mesh.vertices)
        assert [r.total for r in a.history] == [r.total for r in b.history]

    def test_result_dict(self, box_views, template):
        """History rows carry every loss column."""
        options = ReconstructOptions(mode=MODE_SILHOUETTE_ONLY, epochs=1, batch_size=4)
        result = reconstruct(box_views, template, options)
        data = result.to_dict()
        assert data["epochs_run"] == 1
        assert set(result.history[0].to_dict()) == set(HISTORY_COLUMNS)
        assert result.final_loss == result.history[-1].total


class TestEstimatePose:
    """Tests for estimate_pose."""

    def _observed(self, truth):
        grid = grid_from_view(32, 32, 0.15, truth)
        return render_silhouette(space_station(), truth, grid, SHARP).data, grid

    def test_never_worse_than_start(self):
        """The reported pose is the best one seen."""
        truth = RadarView(incident=45.0, azimuth=0.0)
        observed, grid = self._observed(truth)
        init = truth.model_copy(update={"azimuth": 6.0})
        result = estimate_pose(observed, space_station(), init, PoseOptions(epochs=5), grid=grid)
        assert result.final_iou >= result.initial_iou
        assert len(result.losses) == 5
        assert result.to_dict()["epochs"] == 5

    def test_start_at_truth(self):
        """Starting at the answer reports a perfect match."""
        truth = RadarView(incident=45.0, azimuth=0.0)
        observed, grid = self._observed(truth)
        result = estimate_pose(
            observed, space_station(), truth, PoseOptions(epochs=2), grid=grid, truth=truth.pose
        )
        assert result.initial_iou == pytest.approx(1.0)
        assert result.final_iou == pytest.approx(1.0)
        assert result.converged
        assert result.to_dict()["truth"] == truth.pose.model_dump()

    def test_recovers_scale(self):
        """A 20% oversized start shrinks back to the observed size within 5%."""
        truth = RadarView(incident=45.0, azimuth=30.0)
        grid = grid_from_view(48, 48, 0.2, truth)
        observed = render_silhouette(space_station(), truth, grid, SHARP).data
        init = truth.model_copy(update={"scale": 1.2})
        result = estimate_pose(
            observed, space_station(), init, PoseOptions(epochs=200), grid=grid, truth=truth.pose
        )
        start_size = math.sqrt(
            render_silhouette(space_station(), init, grid, SHARP).data.sum() / observed.sum()
        )
        size = math.sqrt(result.silhouette.sum() / observed.sum())
        assert start_size == pytest.approx(1.2, abs=0.05)
        assert size == pytest.approx(1.0, abs=0.05)
        assert result.converged

    def test_opposite_hemisphere_does_not_converge(self):
        """A start from below, behind and far too small stays under IoU 0.5."""
        truth = RadarView(incident=45.0, azimuth=0.0)
        observed, grid = self._observed(truth)
        init = truth.model_copy(update={"incident": -45.0, "azimuth": 180.0, "scale": 0.3})
        result = estimate_pose(
            observed, space_station(), init, PoseOptions(epochs=3), grid=grid, truth=truth.pose
        )
        assert result.final_iou < 0.5
        assert not result.converged
        assert result.to_dict()["converged"] is False

    def test_shape_mismatch(self):
        """Observed silhouettes must match the grid."""
        truth = RadarView(incident=45.0)
        _, grid = self._observed(truth)
        with pytest.raises(ValueError, match="grid"):
            estimate_pose(np.zeros((8, 8)), space_station(), truth, PoseOptions(epochs=1), grid=grid)


@pytest.mark.slow
class TestAcceptance:
    """Long end-to-end runs on the standard acquisition."""

    def test_tank_reconstruction(self):
        """32 views and 500 epochs recover the tank to voxel IoU 0.55."""
        truth = cuboid_with_turret()
        views = ViewSet.render(truth, standard_view_grid(), 64, 64, 0.08, SHARP, threads=4)
        result = reconstruct(views, _tank_template(), ReconstructOptions(), threads=4)
        assert mesh_iou(result.mesh, truth, 32) >= 0.55

    def test_texture_recovery(self):
        """With geometry fixed the texture loss falls below 5% of its start."""
        truth = cuboid_with_turret()
        truth = truth.with_scattering(np.linspace(0.2, 2.0, truth.n_facets))
        views = ViewSet.render(truth, standard_view_grid(), 64, 64, 0.08, SHARP, threads=4)
        start = truth.with_scattering(np.ones(truth.n_facets))
        options = ReconstructOptions(epochs=125, fix_geometry=True)
        result = reconstruct(views, start, options, LossWeights(), threads=4)
        first = np.mean([r.L_tex for r in result.history if r.epoch == 1])
        last = np.mean([r.L_tex for r in result.history if r.epoch == 125])
        assert last < 0.05 * first

    def test_pose_recovery(self):
        """The tank pose is recovered from 15 degrees off in incidence."""
        truth = RadarView(incident=75.0, azimuth=0.0, euler=(0.0, 0.0, 135.0))
        init = truth.model_copy(update={"incident": 60.0})
        grid = grid_from_view(64, 64, 0.08, init)
        observed = render_silhouette(cuboid_with_turret(), truth, grid, SHARP).data
        result = estimate_pose(observed, cuboid_with_turret(), init, grid=grid, truth=truth.pose)
        assert result.final_iou > 0.95

@pytest.mark.slow
class TestRegularizerAblation:
    """Full-loss, regularizer-free and flatness-free runs on the tank."""

    @pytest.fixture(scope="class")
    def runs(self):
        truth = cuboid_with_turret()
        views = ViewSet.render(truth, standard_view_grid(), 64, 64, 0.08, SHARP, threads=4)
        variants = {
            "full": LossWeights(),
            "bare": LossWeights(lap=0.0, flat=0.0),
            "no_flat": LossWeights(flat=0.0),
        }
        options = ReconstructOptions(batch_size=8)
        meshes = {
            name: reconstruct(views, _tank_template(), options, weights, threads=4).mesh
            for name, weights in variants.items()
        }
        return truth, meshes

    def test_regularizers_do_not_raise_iou(self, runs):
        """Dropping both regularizers scores at least the full-loss voxel IoU."""
        truth, meshes = runs
        assert mesh_iou(meshes["bare"], truth, 32) >= mesh_iou(meshes["full"], truth, 32)

    def test_full_loss_is_flatter(self, runs):
        """The full-loss mesh has a strictly lower flatness loss."""
        _, meshes = runs
        full, bare = meshes["full"], meshes["bare"]
        assert (
            loss_flatness(full, build_topology(full))[0]
            < loss_flatness(bare, build_topology(bare))[0]
        )

    def test_flatness_term_smooths_dihedrals(self, runs):
        """Without the flatness term the dihedral angles spread more."""
        _, meshes = runs

        def spread(mesh):
            return np.nanvar(dihedral_cosines(mesh, build_topology(mesh)))

        assert spread(meshes["no_flat"]) > spread(meshes["full"])
