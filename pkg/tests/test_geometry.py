import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrisloc.geometry import (
    BsGeometry,
    HrisGeometry,
    NearFieldSource,
    SphericalBearing,
    bearing_from_positions,
    bearing_unit_vector,
    bs_steering,
    exact_path_delta,
    fresnel_coefficients,
    fresnel_path_delta,
    fresnel_phase_residual_bound,
    hris_ff_steering,
    nf_steering,
    nf_steering_entry,
)

DEG = np.pi / 180.0

angles = st.floats(min_value=0.05, max_value=np.pi - 0.05)
ranges = st.floats(min_value=0.08, max_value=0.5)


def test_geometry_counts_and_index_map(geom9):
    assert geom9.size == 81
    assert geom9.num_x == 9 and geom9.num_z == 9
    # Column-major over the (m, n) grid.
    assert geom9.element_index(-4, -4) == 0
    assert geom9.element_index(4, 4) == 80
    assert geom9.element_index(0, 0) == geom9.center_index == 40
    u = geom9.element_index(1, -2)
    assert geom9.flat_m[u] == 1 and geom9.flat_n[u] == -2


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        HrisGeometry(m_x=-1, n_z=0, spacing=0.0025, wavelength=0.01)
    with pytest.raises(ValueError):
        HrisGeometry(m_x=1, n_z=1, spacing=0.0025, wavelength=0.0)


def test_source_domain_checks():
    with pytest.raises(ValueError):
        NearFieldSource(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        NearFieldSource(1.0, np.pi, 0.1)
    with pytest.raises(ValueError):
        NearFieldSource(1.0, 1.0, -0.1)


def test_source_region_warning(geom9):
    far = NearFieldSource(1.0, 1.0, 10.0)
    with pytest.warns(UserWarning):
        far.validate_region(geom9)


def test_exact_delta_center_is_zero(geom9, source_mid):
    assert exact_path_delta(geom9, source_mid, 0, 0) == 0.0


def test_exact_delta_matches_direct_formula(geom9):
    # Direct scalar evaluation of the square-root expression.
    src = NearFieldSource(90.0 * DEG, 90.0 * DEG, 0.15)
    d, r = geom9.spacing, src.range_m
    omega = 1 * np.sin(src.elevation) * np.cos(src.azimuth)
    expected = np.sqrt(r**2 - 2 * d * r * omega + d**2) - r
    assert exact_path_delta(geom9, src, 1, 0) == pytest.approx(expected, rel=1e-14)


def test_exact_equals_fresnel_far_away():
    geom = HrisGeometry(m_x=4, n_z=4, spacing=0.0025, wavelength=0.01)
    src = NearFieldSource(70 * DEG, 60 * DEG, 10.0)
    mm, nn = np.meshgrid(geom.m_indices, geom.n_indices, indexing="ij")
    diff = exact_path_delta(geom, src, mm, nn) - fresnel_path_delta(geom, src, mm, nn)
    assert np.max(np.abs(diff)) < 1e-6 * geom.wavelength


def test_fresnel_limit_property(geom9):
    # Beyond 100 D^2 / lambda the expansion is tight to 1e-6 lambda; the
    # third-order expansion term d^3 w rho^2 / (2 r^2) sets this scale.
    r = 100.0 * geom9.aperture**2 / geom9.wavelength
    src = NearFieldSource(55 * DEG, 110 * DEG, r)
    mm, nn = np.meshgrid(geom9.m_indices, geom9.n_indices, indexing="ij")
    diff = exact_path_delta(geom9, src, mm, nn) - fresnel_path_delta(geom9, src, mm, nn)
    assert np.max(np.abs(diff)) <= 1e-6 * geom9.wavelength


def test_fresnel_coefficient_symmetries(geom9):
    # Broadside azimuth kills the x-slope; broadside elevation kills the z-slope.
    g_x, _, _, _, _ = fresnel_coefficients(NearFieldSource(1.0, np.pi / 2, 0.15), geom9.spacing)
    assert g_x == pytest.approx(0.0, abs=1e-18)
    src = NearFieldSource(np.pi / 2, 1.0, 0.15)
    _, g_z, _, q_z, _ = fresnel_coefficients(src, geom9.spacing)
    assert g_z == pytest.approx(0.0, abs=1e-18)
    assert q_z == pytest.approx(geom9.spacing**2 / (2 * src.range_m), rel=1e-12)


@given(el=angles, az=angles, r=ranges, m=st.integers(-4, 4), n=st.integers(-4, 4))
@settings(max_examples=60, deadline=None)
def test_fresnel_central_symmetry_identity(el, az, r, m, n):
    # Linear terms cancel under central symmetry, leaving twice the even part.
    geom = HrisGeometry(m_x=4, n_z=4, spacing=0.0025, wavelength=0.01)
    src = NearFieldSource(el, az, r)
    g_x, g_z, q_x, q_z, c_xz = fresnel_coefficients(src, geom.spacing)
    total = fresnel_path_delta(geom, src, m, n) + fresnel_path_delta(geom, src, -m, -n)
    even = 2.0 * (q_x * m**2 + q_z * n**2 + c_xz * m * n)
    assert total == pytest.approx(even, rel=1e-12, abs=1e-18)


@given(el=angles, az=angles, r=ranges)
@settings(max_examples=40, deadline=None)
def test_steering_unit_modulus(el, az, r):
    geom = HrisGeometry(m_x=3, n_z=2, spacing=0.0025, wavelength=0.01)
    vec = nf_steering(geom, NearFieldSource(el, az, r))
    assert np.allclose(np.abs(vec), 1.0, atol=1e-12)


def test_steering_entry_matches_loop_oracle(geom_small, source_mid):
    vec = nf_steering(geom_small, source_mid)
    idx = 0
    for n in geom_small.n_indices:
        for m in geom_small.m_indices:
            expected = np.exp(
                2j
                * np.pi
                / geom_small.wavelength
                * exact_path_delta(geom_small, source_mid, m, n)
            )
            assert vec[idx] == pytest.approx(expected, rel=1e-13)
            idx += 1


def test_steering_center_entry_and_phase(geom9, source_mid):
    assert nf_steering_entry(geom9, source_mid, 0, 0) == pytest.approx(1.0 + 0.0j)
    entry = nf_steering_entry(geom9, source_mid, 2, -1)
    expected_phase = 2 * np.pi / geom9.wavelength * exact_path_delta(geom9, source_mid, 2, -1)
    assert np.angle(entry) == pytest.approx(
        np.angle(np.exp(1j * expected_phase)), abs=1e-12
    )


def test_central_symmetry_of_exact_delta(geom9):
    # Odd part of the exact delta equals twice the linear Fresnel slope up to
    # twice the Fresnel residual.
    src = NearFieldSource(60 * DEG, 100 * DEG, 0.15)
    g_x, g_z, *_ = fresnel_coefficients(src, geom9.spacing)
    mm, nn = np.meshgrid(geom9.m_indices, geom9.n_indices, indexing="ij")
    odd = exact_path_delta(geom9, src, mm, nn) - exact_path_delta(geom9, src, -mm, -nn)
    linear = 2.0 * (g_x * mm + g_z * nn)
    residual = np.abs(exact_path_delta(geom9, src, mm, nn) - fresnel_path_delta(geom9, src, mm, nn))
    max_fresnel = residual.max()
    assert np.max(np.abs(odd - linear)) <= 2.0 * max_fresnel + 1e-15


def test_fresnel_phase_residual_bound_is_a_bound(geom9):
    lam = geom9.wavelength
    for el, az, r in [(34.8, 43.4, 0.1454), (126.1, 55.0, 0.1371), (90.0, 90.0, 0.12)]:
        src = NearFieldSource(el * DEG, az * DEG, r)
        g_x, g_z, *_ = fresnel_coefficients(src, geom9.spacing)
        mm, nn = np.meshgrid(geom9.m_indices, geom9.n_indices, indexing="ij")
        odd = exact_path_delta(geom9, src, mm, nn) - exact_path_delta(geom9, src, -mm, -nn)
        phase_err = 2 * np.pi / lam * np.abs(odd - 2.0 * (g_x * mm + g_z * nn))
        assert phase_err.max() <= fresnel_phase_residual_bound(geom9, r)


def test_bs_steering_single_element_and_broadside():
    bs = BsGeometry(n_x=1, n_z=1)
    bearing = SphericalBearing(40 * DEG, 72 * DEG)
    assert np.allclose(bs_steering(bs, bearing, "x"), [1.0])
    bs5 = BsGeometry(n_x=5, n_z=5)
    broadside = SphericalBearing(np.pi / 2, 1.0)
    assert np.allclose(bs_steering(bs5, broadside, "z"), np.ones(5))


def test_bs_steering_matches_direct_formula():
    bs = BsGeometry(n_x=5, n_z=5)
    bearing = SphericalBearing(40 * DEG, 72 * DEG)
    vec = bs_steering(bs, bearing, "x")
    ph = np.sin(bearing.elevation) * np.cos(bearing.azimuth)
    for i in range(5):
        assert vec[i] == pytest.approx(np.exp(1j * (2.0 - i) * ph), rel=1e-13)
    with pytest.raises(ValueError):
        bs_steering(bs, bearing, "y")


def test_hris_ff_steering_kron_structure(geom_small):
    bearing = SphericalBearing(100 * DEG, 130 * DEG)
    vec = hris_ff_steering(geom_small, bearing)
    assert np.allclose(np.abs(vec), 1.0, atol=1e-12)
    # Kronecker of the z and x linear factors in vec-of-grid order.
    ax = np.sin(bearing.elevation) * np.cos(bearing.azimuth)
    az = np.cos(bearing.elevation)
    b_x = np.exp(-1j * geom_small.m_indices * ax)
    b_z = np.exp(-1j * geom_small.n_indices * az)
    assert np.allclose(vec, np.kron(b_z, b_x), atol=1e-12)


def test_hris_ff_steering_degenerate_array():
    geom = HrisGeometry(m_x=0, n_z=0, spacing=0.0025, wavelength=0.01)
    vec = hris_ff_steering(geom, SphericalBearing(1.0, 1.0))
    assert vec.shape == (1,) and vec[0] == pytest.approx(1.0 + 0.0j)


def test_bearing_reciprocity():
    bearing = SphericalBearing(40 * DEG, 72 * DEG)
    rec = bearing.reciprocal()
    assert rec.elevation == pytest.approx(np.pi - bearing.elevation)
    assert rec.azimuth == pytest.approx(np.pi - bearing.azimuth)


def test_bearing_from_positions_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p0 = rng.uniform(-5, 5, 3)
        bearing = SphericalBearing(rng.uniform(0.1, np.pi - 0.1), rng.uniform(0.1, np.pi - 0.1))
        p1 = p0 + rng.uniform(0.5, 10.0) * bearing_unit_vector(bearing)
        back = bearing_from_positions(p0, p1)
        assert back.elevation == pytest.approx(bearing.elevation, abs=1e-12)
        assert back.azimuth == pytest.approx(bearing.azimuth, abs=1e-12)
