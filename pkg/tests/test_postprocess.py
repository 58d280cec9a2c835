"""Tests for dB display, sidelobe filtering and silhouette extraction."""

import numpy as np
import pytest

from src.imaging.postprocess import (
    db_to_u8,
    extract_silhouette,
    find_peaks,
    sidelobe_filter,
    to_db,
)

PSF = np.outer([0.1, 0.3, 1.0, 0.3, 0.1], [0.1, 0.3, 1.0, 0.3, 0.1])


def _point_response(size=21, center=(10, 10)):
    """A unit scatterer whose sidelobes follow PSF exactly."""
    image = np.zeros((size, size))
    r, c = center
    image[r - 2 : r + 3, c - 2 : c + 3] = PSF
    return image


class TestDecibels:
    """Tests for to_db and db_to_u8."""

    def test_to_db(self):
        """10 log10 with a floor."""
        np.testing.assert_allclose(to_db(np.array([1.0, 0.1, 0.0]), -60.0), [0.0, -10.0, -60.0])

    def test_floor_must_be_negative(self):
        """A non-negative floor is rejected."""
        with pytest.raises(ValueError):
            to_db(np.ones(3), 0.0)

    def test_u8_range(self):
        """Floor maps to 0 and the maximum to 255."""
        out = db_to_u8(np.array([-60.0, -30.0, 0.0, -90.0]), -60.0)
        assert out.dtype == np.uint8
        assert out.tolist() == [0, 128, 255, 0]

    def test_flat_image(self):
        """An image at the floor maps to zeros."""
        assert not db_to_u8(np.full((3, 3), -60.0), -60.0).any()


class TestFindPeaks:
    """Tests for find_peaks."""

    def test_two_scatterers(self):
        """Both local maxima above the threshold are found."""
        image = _point_response() + 0.5 * _point_response(center=(4, 15))
        peaks = {tuple(p) for p in find_peaks(image).tolist()}
        assert peaks == {(10, 10), (4, 15)}

    def test_threshold(self):
        """Peaks weaker than the threshold are ignored."""
        image = _point_response() + 1e-4 * _point_response(center=(4, 15))
        assert find_peaks(image, -30.0).tolist() == [[10, 10]]

    def test_empty(self):
        """A zero image has no peaks."""
        assert find_peaks(np.zeros((4, 4))).shape == (0, 2)


class TestSidelobeFilter:
    """Tests for sidelobe_filter."""

    @pytest.mark.parametrize("linear", [False, True])
    def test_removes_psf_sidelobes(self, linear):
        """Pixels explained by the PSF go, a stronger neighbour stays."""
        image = _point_response()
        image[10, 11] = 0.5
        out = sidelobe_filter(image, PSF, linear=linear)
        assert {tuple(p) for p in np.argwhere(out > 0).tolist()} == {(10, 10), (10, 11)}
        assert out[10, 11] == 0.5

    def test_db_psf(self):
        """A dB PSF gives the same result as its linear form."""
        image = _point_response()
        a = sidelobe_filter(image, PSF)
        b = sidelobe_filter(image, 10.0 * np.log10(PSF), psf_domain="db")
        assert np.array_equal(a, b)

    def test_infinite_entries_never_suppress(self):
        """-inf PSF entries keep the pixel."""
        psf_db = 10.0 * np.log10(PSF)
        psf_db[4, 4] = -np.inf
        out = sidelobe_filter(_point_response(), psf_db, psf_domain="db")
        assert out[8, 8] > 0
        assert out[12, 12] > 0
        assert out[9, 9] == 0

    def test_filtering_twice_changes_nothing(self):
        """A pixel that becomes a peak after suppression still suppresses its sidelobes."""
        ring = np.maximum.outer(np.abs(np.arange(-2, 3)), np.abs(np.arange(-2, 3)))
        psf_db = np.array([0.0, -3.0, -20.0])[ring]
        image = np.zeros((11, 11))
        image[5, 5], image[5, 6], image[5, 7], image[5, 9] = 1.0, 0.3, 0.2, 0.0009
        once = sidelobe_filter(image, psf_db, psf_domain="db")
        assert once[5, 6] == 0.0
        assert once[5, 7] == 0.2
        assert once[5, 9] == 0.0
        np.testing.assert_array_equal(sidelobe_filter(once, psf_db, psf_domain="db"), once)

    def test_idempotent_on_point_responses(self):
        """Two overlapping scatterers reach a fixed point in one call."""
        image = _point_response() + 0.05 * _point_response(center=(10, 13))
        once = sidelobe_filter(image, PSF)
        np.testing.assert_array_equal(sidelobe_filter(once, PSF), once)

    def test_no_peaks(self):
        """Without peaks the image is returned unchanged."""
        image = np.zeros((5, 5))
        out = sidelobe_filter(image, PSF)
        assert np.array_equal(out, image)
        assert out is not image

    def test_bad_psf(self):
        """The PSF must be 2D and its domain known."""
        with pytest.raises(ValueError):
            sidelobe_filter(_point_response(), np.ones(5))
        with pytest.raises(ValueError, match="domain"):
            sidelobe_filter(_point_response(), PSF, psf_domain="power")


class TestExtractSilhouette:
    """Tests for extract_silhouette."""

    def test_largest_blob_with_holes_filled(self):
        """Small blobs are dropped and interior holes filled."""
        image = np.zeros((10, 10))
        image[1:6, 1:6] = 1.0
        image[3, 3] = 0.0
        image[8, 8] = 1.0
        mask = extract_silhouette(image, 0.5)
        expected = np.zeros((10, 10))
        expected[1:6, 1:6] = 1.0
        assert np.array_equal(mask, expected)

    def test_empty(self):
        """Nothing above the threshold gives an empty mask."""
        assert not extract_silhouette(np.zeros((4, 4)), 0.5).any()
