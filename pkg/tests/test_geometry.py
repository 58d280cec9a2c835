"""Tests for radar coordinate transforms, pose and grids."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import GeometryError
from src.radar.geometry import (
    POSE_PARAMETERS,
    euler_matrix,
    euler_matrix_derivatives,
    grid_from_view,
    isar_resolution,
    isar_view_grid,
    posed_radar_vertices,
    radar_position,
    radar_to_world,
    radar_transform,
    radar_transform_derivatives,
    rotation_matrix,
    slant_range_transform,
    standard_view_grid,
    world_to_radar,
)
from src.radar.models import PoseParameters, RadarView


class TestRotation:
    """Tests for the world-to-radar rotation."""

    def test_vertical_view(self):
        """Looking straight down at zero azimuth flips X and Z."""
        R = rotation_matrix(RadarView(incident=90.0, azimuth=0.0))
        np.testing.assert_allclose(R, np.diag([-1.0, 1.0, -1.0]), atol=1e-15)

    def test_explicit_45_45(self):
        """Entries at alpha = beta = 45 degrees."""
        h = math.sqrt(0.5)
        expected = np.array(
            [
                [-h, -0.5, -0.5],
                [0.0, h, -h],
                [h, -0.5, -0.5],
            ]
        )
        R = rotation_matrix(RadarView(incident=45.0, azimuth=45.0))
        np.testing.assert_allclose(R, expected, atol=1e-15)

    @pytest.mark.parametrize("alpha,beta", [(15.0, 0.0), (30.0, 135.0), (-50.0, 270.0), (60.0, 315.0)])
    def test_orthonormal(self, alpha, beta):
        """R is a proper rotation."""
        R = rotation_matrix(RadarView(incident=alpha, azimuth=beta))
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
        assert np.linalg.det(R) == pytest.approx(1.0)

    def test_origin_maps_to_reference_range(self):
        """The scene center lies at (0, 0, f) in the radar frame."""
        view = RadarView(incident=30.0, azimuth=135.0, reference_range=500.0)
        np.testing.assert_allclose(world_to_radar(np.zeros(3), view), [0.0, 0.0, 500.0], atol=1e-9)

    def test_radar_position_distance(self):
        """The default antenna sits f meters from the origin."""
        view = RadarView(incident=60.0, azimuth=90.0, reference_range=250.0)
        assert np.linalg.norm(radar_position(view)) == pytest.approx(250.0)

    def test_radar_above_scene(self):
        """At positive incidence the antenna is on the +Y side."""
        assert radar_position(RadarView(incident=45.0))[1] > 0

    def test_inverse(self):
        """radar_to_world undoes world_to_radar."""
        view = RadarView(incident=40.0, azimuth=20.0, reference_range=100.0)
        pts = np.random.default_rng(0).normal(size=(10, 3))
        np.testing.assert_allclose(radar_to_world(world_to_radar(pts, view), view), pts, atol=1e-12)

    def test_explicit_radar_position(self):
        """An explicit antenna position is used as given."""
        view = RadarView(radar_position=(1.0, 2.0, 3.0))
        np.testing.assert_allclose(world_to_radar([1.0, 2.0, 3.0], view), 0.0, atol=1e-15)


class TestSlantRange:
    """Tests for slant_range_transform."""

    def test_pythagorean_example(self):
        """(3, 4, 0) lands at slant range 5 when f = 0."""
        np.testing.assert_allclose(slant_range_transform(np.array([3.0, 4.0, 0.0]), 0.0), [3.0, 0.0, 5.0])

    def test_batch_and_offset(self):
        """Batches are supported and f is subtracted."""
        out = slant_range_transform(np.array([[1.0, 0.0, 10.0], [2.0, 6.0, 8.0]]), 10.0)
        np.testing.assert_allclose(out, [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])


class TestEuler:
    """Tests for the target attitude matrix."""

    def test_identity(self):
        """Zero angles give the identity."""
        np.testing.assert_allclose(euler_matrix(0.0, 0.0, 0.0), np.eye(3))

    def test_rotation(self):
        """R_e is orthonormal for arbitrary angles."""
        Re = euler_matrix(10.0, -35.0, 120.0)
        np.testing.assert_allclose(Re @ Re.T, np.eye(3), atol=1e-14)

    def test_derivatives_match_finite_differences(self):
        """Analytic dR_e matches central differences per radian."""
        angles = np.array([10.0, -15.0, 25.0])
        h = 1e-6
        analytic = euler_matrix_derivatives(*angles)
        for k in range(3):
            step = np.zeros(3)
            step[k] = math.degrees(h)
            numeric = (euler_matrix(*(angles + step)) - euler_matrix(*(angles - step))) / (2 * h)
            np.testing.assert_allclose(analytic[k], numeric, atol=1e-8)


class TestRadarTransform:
    """Tests for the posed affine map and its derivatives."""

    def test_default_pose_matches_world_to_radar(self):
        """Without pose the affine map equals world_to_radar."""
        view = RadarView(incident=35.0, azimuth=70.0, reference_range=50.0)
        pts = np.random.default_rng(1).normal(size=(5, 3))
        np.testing.assert_allclose(posed_radar_vertices(pts, view), world_to_radar(pts, view), atol=1e-12)

    def test_translation_is_range(self):
        """With the default antenna b = f e_z."""
        _, b = radar_transform(RadarView(incident=20.0, azimuth=300.0, reference_range=80.0))
        np.testing.assert_allclose(b, [0.0, 0.0, 80.0], atol=1e-12)

    def test_scale_scales_offsets(self):
        """Scale multiplies offsets from the scene center."""
        base = RadarView(incident=50.0, reference_range=20.0)
        pts = np.array([[0.3, -0.2, 0.5]])
        v1 = posed_radar_vertices(pts, base)
        v2 = posed_radar_vertices(pts, base.model_copy(update={"scale": 2.0}))
        np.testing.assert_allclose(v2 - [0.0, 0.0, 20.0], 2.0 * (v1 - [0.0, 0.0, 20.0]), atol=1e-12)

    @pytest.mark.parametrize("radar_pos", [None, (3.0, 40.0, -25.0)])
    def test_derivatives_match_finite_differences(self, radar_pos):
        """dA and db agree with central differences on the pose vector."""
        view = RadarView(
            incident=40.0,
            azimuth=20.0,
            euler=(10.0, -15.0, 25.0),
            scale=1.1,
            reference_range=30.0,
            radar_position=radar_pos,
        )
        derivs = radar_transform_derivatives(view)
        base = view.pose.as_vector()
        h = 1e-6
        for k, name in enumerate(POSE_PARAMETERS):
            step = np.zeros(6)
            step[k] = h
            plus = view.with_pose(PoseParameters.from_vector(base + step))
            minus = view.with_pose(PoseParameters.from_vector(base - step))
            A_p, b_p = radar_transform(plus)
            A_m, b_m = radar_transform(minus)
            dA, db = derivs[name]
            np.testing.assert_allclose(dA, (A_p - A_m) / (2 * h), atol=1e-7, err_msg=name)
            np.testing.assert_allclose(db, (b_p - b_m) / (2 * h), atol=1e-5, err_msg=name)


class TestGrids:
    """Tests for grid construction."""

    @pytest.mark.parametrize("alpha,n_y", [(45.0, 128), (60.0, 222), (30.0, 74)])
    def test_projection_rows(self, alpha, n_y):
        """N_y = ceil(N_z tan alpha)."""
        assert grid_from_view(128, 128, 0.05, RadarView(incident=alpha)).n_y == n_y

    def test_cell_sizes(self):
        """R_y = R_z cot alpha and R_x = R_z."""
        grid = grid_from_view(64, 32, 0.1, RadarView(incident=60.0))
        assert grid.r_y == pytest.approx(0.1 / math.sqrt(3.0))
        assert grid.r_x == 0.1
        assert grid.image_shape == (32, 64)

    def test_negative_incidence(self):
        """Negative angles use |alpha|."""
        a = grid_from_view(16, 16, 0.1, RadarView(incident=-40.0))
        b = grid_from_view(16, 16, 0.1, RadarView(incident=40.0))
        assert (a.n_y, a.r_y) == (b.n_y, b.r_y)

    @pytest.mark.parametrize("alpha", [0.0, 90.0, -90.0, 120.0])
    def test_invalid_incidence(self, alpha):
        """Grazing or vertical incidence has no valid projection plane."""
        with pytest.raises(GeometryError):
            grid_from_view(16, 16, 0.1, RadarView(incident=alpha))

    def test_invalid_cell_size(self):
        """Cell size must be positive."""
        with pytest.raises(GeometryError):
            grid_from_view(16, 16, 0.0, RadarView())

    def test_center_cell(self):
        """The origin lands on the middle of the grid."""
        grid = grid_from_view(33, 33, 0.1, RadarView())
        assert grid.x_to_col(0.0) == 16.0
        assert grid.slant_to_row(0.0) == 16.0


class TestViewGrids:
    """Tests for acquisition view sets and labels."""

    def test_standard_grid(self):
        """Four incidences at eight azimuths."""
        views = standard_view_grid(reference_range=100.0)
        assert len(views) == 32
        assert {v.incident for v in views} == {15.0, 30.0, 45.0, 60.0}
        assert all(v.reference_range == 100.0 for v in views)

    def test_isar_grid_is_negative(self):
        """ISAR views look from below."""
        views = isar_view_grid()
        assert len(views) == 32
        assert all(v.incident < 0 for v in views)

    @pytest.mark.parametrize(
        "incident,azimuth,label",
        [(45.0, 0.0, "a45_b000"), (-30.0, 45.0, "am30_b045"), (15.0, 22.5, "a15_b22p5")],
    )
    def test_labels(self, incident, azimuth, label):
        """Labels are file-name safe."""
        assert RadarView(incident=incident, azimuth=azimuth).label == label

    def test_name_overrides_label(self):
        """An explicit name wins."""
        assert RadarView(name="front").label == "front"

    def test_near_must_precede_far(self):
        """A depth range with near >= far is rejected."""
        with pytest.raises(ValidationError):
            RadarView(near=100.0, far=50.0)

    def test_default_depth_range(self):
        """Cut-off planes default to f -/+ 10 m."""
        view = RadarView(reference_range=1000.0)
        assert (view.z_near, view.z_far) == (990.0, 1010.0)

    def test_with_pose_keeps_scene_fields(self):
        """Replacing the pose leaves range, cut-off planes and name alone."""
        view = RadarView(reference_range=500.0, near=495.0, far=505.0, name="front")
        pose = PoseParameters(incident=60.0, azimuth=30.0, euler=(1.0, 2.0, 3.0), scale=1.5)
        posed = view.with_pose(pose)
        assert posed.pose == pose
        assert (posed.reference_range, posed.z_near, posed.z_far) == (500.0, 495.0, 505.0)
        assert posed.label == "front"
        assert view.incident == 45.0


class TestIsarResolution:
    """Tests for isar_resolution."""

    def test_ku_band_example(self):
        """16.7 GHz, 1 GHz bandwidth and 3.5 degrees give about 15 cm cells."""
        r_a, r_r = isar_resolution(16.7e9, 1e9, math.radians(3.5))
        assert r_a == pytest.approx(0.147, abs=1e-3)
        assert r_r == pytest.approx(0.150, abs=1e-3)

    def test_rejects_non_positive(self):
        """All parameters must be positive."""
        with pytest.raises(GeometryError):
            isar_resolution(16.7e9, 0.0, 0.1)
