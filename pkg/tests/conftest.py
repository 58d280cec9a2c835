"""Pytest configuration and shared fixtures."""

import os
from unittest.mock import patch

import pytest

from src.config import get_settings
from src.mesh.templates import box, icosphere
from src.radar.geometry import grid_from_view
from src.radar.models import RadarView
from src.render.raster import RenderParams


@pytest.fixture(autouse=True)
def clean_settings_cache():
    """Clear settings cache before each test."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def mock_env_empty():
    """Fixture that clears all environment variables."""
    with patch.dict(os.environ, {}, clear=True):
        yield


@pytest.fixture
def view45():
    """Default view at 45 degrees incidence."""
    return RadarView(incident=45.0, azimuth=0.0)


@pytest.fixture
def small_grid(view45):
    """32 x 32 mapping grid with 5 cm cells."""
    return grid_from_view(32, 32, 0.05, view45)


@pytest.fixture
def soft_params():
    """Render parameters soft enough for finite differences on small grids."""
    return RenderParams(sigma=0.5, gamma=0.05, sigma_g=0.5)


@pytest.fixture
def small_box():
    """0.6 x 0.4 x 0.5 m box at the origin."""
    return box((0.6, 0.4, 0.5))


@pytest.fixture
def coarse_sphere():
    """Icosphere with 80 facets."""
    return icosphere(1, 0.4)
