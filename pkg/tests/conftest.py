import numpy as np
import pytest

from hrisloc.geometry import HrisGeometry, NearFieldSource

DEG = np.pi / 180.0

# Five-source benchmark layout used across the estimator tests (degrees, m).
FIVE_SOURCES = (
    (34.8194, 43.4387, 0.1454),
    (45.2282, 125.4274, 0.1701),
    (77.5605, 128.1999, 0.1235),
    (124.8440, 140.6266, 0.1696),
    (126.1008, 55.0334, 0.1371),
)

TWO_SOURCES = (
    (48.7223, 138.5400, 0.1503),
    (124.8461, 140.6148, 0.1696),
)


def make_sources(table) -> list[NearFieldSource]:
    return [
        NearFieldSource(el * DEG, az * DEG, rng) for el, az, rng in table
    ]


@pytest.fixture
def geom9() -> HrisGeometry:
    """9x9 quarter-wavelength HRIS at 10 mm wavelength."""
    return HrisGeometry(m_x=4, n_z=4, spacing=0.0025, wavelength=0.01)


@pytest.fixture
def geom_small() -> HrisGeometry:
    """5x5 array for cheap structural tests."""
    return HrisGeometry(m_x=2, n_z=2, spacing=0.0025, wavelength=0.01)


@pytest.fixture
def source_mid() -> NearFieldSource:
    return NearFieldSource(90.0 * DEG, 90.0 * DEG, 0.15)
