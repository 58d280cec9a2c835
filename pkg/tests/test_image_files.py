"""Tests for .fimg files and PNG export."""

import numpy as np
import pytest
from PIL import Image

from src.errors import FileFormatError
from src.tools.image_files import (
    FIMG_DTYPE,
    FloatImageFile,
    image_to_u8,
    load_image,
    save_image,
)


class TestFloatImageFile:
    """Tests for FloatImageFile."""

    def test_round_trip_is_float32_exact(self, tmp_path):
        """Reading back gives the float32 values that were stored."""
        data = np.random.default_rng(0).uniform(0.0, 3.0, size=(5, 7))
        path = FloatImageFile(data=data, tag="linear").write(tmp_path / "a.fimg")
        loaded = FloatImageFile.read(path)
        assert loaded.tag == "linear"
        assert (loaded.height, loaded.width) == (5, 7)
        assert np.array_equal(loaded.data, data.astype(FIMG_DTYPE).astype(np.float64))

    def test_header(self, tmp_path):
        """One ASCII header line precedes the little-endian payload."""
        path = FloatImageFile(data=np.ones((2, 3)), tag="binary").write(tmp_path / "b.fimg")
        raw = path.read_bytes()
        assert raw.startswith(b"FIMG 3 2 binary\n")
        assert len(raw) == len(b"FIMG 3 2 binary\n") + 6 * 4

    def test_same_data_same_bytes(self, tmp_path):
        """Writing is deterministic."""
        data = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        a = FloatImageFile(data=data).write(tmp_path / "a.fimg").read_bytes()
        b = FloatImageFile(data=data).write(tmp_path / "b.fimg").read_bytes()
        assert a == b

    def test_creates_parent_directories(self, tmp_path):
        """Nested output paths are created."""
        path = FloatImageFile(data=np.zeros((1, 1))).write(tmp_path / "x" / "y" / "z.fimg")
        assert path.exists()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"data": np.zeros(4)},
            {"data": np.zeros((0, 3))},
            {"data": np.zeros((2, 2)), "tag": "complex"},
            {"data": np.array([[np.nan, 0.0]])},
        ],
    )
    def test_invalid(self, kwargs):
        """2D, non-empty, finite data with a known tag."""
        with pytest.raises(FileFormatError):
            FloatImageFile(**kwargs)

    def test_bad_magic(self, tmp_path):
        """A foreign header is rejected."""
        path = tmp_path / "bad.fimg"
        path.write_bytes(b"PGM 1 1 linear\n" + b"\x00" * 4)
        with pytest.raises(FileFormatError):
            FloatImageFile.read(path)

    def test_truncated(self, tmp_path):
        """The payload must hold width * height values."""
        path = tmp_path / "short.fimg"
        path.write_bytes(b"FIMG 2 2 linear\n" + b"\x00" * 12)
        with pytest.raises(FileFormatError, match="expected 16"):
            FloatImageFile.read(path)

    def test_missing_header_line(self, tmp_path):
        """A file without a newline has no header."""
        path = tmp_path / "raw.fimg"
        path.write_bytes(b"FIMG")
        with pytest.raises(FileFormatError, match="header"):
            FloatImageFile.read(path)

    def test_missing_file(self, tmp_path):
        """A missing file is FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            FloatImageFile.read(tmp_path / "nope.fimg")


class TestDisplay:
    """Tests for PNG export."""

    def test_binary_mapping(self):
        """Binary images map 0/1 to 0/255."""
        image = FloatImageFile(data=np.array([[0.0, 1.0]]), tag="binary")
        assert image_to_u8(image).tolist() == [[0, 255]]

    def test_linear_mapping(self):
        """Linear images are shown in dB with the max at 255."""
        image = FloatImageFile(data=np.array([[1.0, 0.1, 0.0]]), tag="linear")
        assert image_to_u8(image, -40.0).tolist() == [[255, 191, 0]]

    def test_save_image(self, tmp_path):
        """save_image writes the float file and a matching PNG."""
        data = np.zeros((4, 6))
        data[1:3, 2:5] = 1.0
        fimg, png = save_image(data, tmp_path / "sil", tag="binary")
        assert fimg.suffix == ".fimg" and png.suffix == ".png"
        with Image.open(png) as img:
            assert img.size == (6, 4)
            assert img.mode == "L"
        np.testing.assert_allclose(load_image(png), data)
        np.testing.assert_array_equal(load_image(fimg), data)
