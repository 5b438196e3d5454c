import numpy as np
import pytest

from hrisloc.coarray import (
    LagSet,
    assemble_h_tau,
    average_difference_coarray,
    build_pseudo_snapshots,
    coarray_covariance,
    cross_correlate_pair,
)
from hrisloc.danm import virtual_slope
from hrisloc.geometry import (
    HrisGeometry,
    NearFieldSource,
    exact_path_delta,
    fresnel_coefficients,
    fresnel_phase_residual_bound,
)
from hrisloc.synthesis import ChannelSpec, HrisSnapshotBlock, SourceSignalModel, synthesize_hris_rx

from conftest import DEG, make_sources, TWO_SOURCES


def _noiseless_block(geom, sources, num_slots=400, seed=0):
    channel = ChannelSpec(delta=0.5, noise_variance=0.0)
    return synthesize_hris_rx(
        geom, sources, SourceSignalModel(seed=seed, offset_spacing=0.08), channel, num_slots
    )


def test_lagset_validation():
    with pytest.raises(ValueError):
        LagSet(())
    with pytest.raises(ValueError):
        LagSet((0, 0, 1))
    with pytest.raises(ValueError):
        LagSet((-1, 2))
    lag = LagSet.consecutive(8)
    assert lag.count == 8
    lag.validate_for(8)
    with pytest.raises(ValueError):
        lag.validate_for(7)


def test_cross_correlation_phase_matches_exact_model(geom9):
    # Single noiseless unit-power source at zero lag: the correlation phase is
    # the centrally symmetric exact-delay difference; under the second-order
    # expansion that collapses to twice the linear slope.
    src = NearFieldSource(62 * DEG, 105 * DEG, 0.14)
    block = _noiseless_block(geom9, [src])
    lam = geom9.wavelength
    g_x, g_z, *_ = fresnel_coefficients(src, geom9.spacing)
    for m, n in [(1, 0), (3, -2), (-4, 4), (2, 3)]:
        value = cross_correlate_pair(block, m, n, 0)
        exact_phase = (
            2 * np.pi / lam
            * (exact_path_delta(geom9, src, m, n) - exact_path_delta(geom9, src, -m, -n))
        )
        assert np.angle(value) == pytest.approx(
            np.angle(np.exp(1j * exact_phase)), abs=1e-9
        )
        fresnel_phase = 4 * np.pi / lam * (g_x * m + g_z * n)
        bound = fresnel_phase_residual_bound(geom9, src.range_m)
        assert abs(np.angle(value * np.exp(-1j * fresnel_phase))) <= bound


def test_center_autocorrelation_is_total_power(geom9):
    sources = make_sources(TWO_SOURCES)
    block = _noiseless_block(geom9, sources)
    value = cross_correlate_pair(block, 0, 0, 0)
    assert value.imag == pytest.approx(0.0, abs=1e-12)
    # delta * sum of powers, up to the small tone cross residual.
    assert value.real == pytest.approx(0.5 * 2.0, rel=0.05)
    assert value.real > 0


def test_pure_noise_correlations_decay(geom_small):
    rng = np.random.default_rng(5)
    noise = (rng.standard_normal((geom_small.size, 20000))
             + 1j * rng.standard_normal((geom_small.size, 20000))) / np.sqrt(2)
    block = HrisSnapshotBlock(geom=geom_small, vec=noise)
    assert abs(cross_correlate_pair(block, 1, 1, 0)) < 0.05
    assert abs(cross_correlate_pair(block, 1, 1, 3)) < 0.05
    assert abs(cross_correlate_pair(block, 0, 0, 5)) < 0.05
    # The center element at zero lag keeps the noise power.
    assert cross_correlate_pair(block, 0, 0, 0).real == pytest.approx(1.0, rel=0.05)


def test_lag_bound_enforced(geom_small):
    block = _noiseless_block(geom_small, make_sources(TWO_SOURCES), num_slots=16)
    with pytest.raises(ValueError):
        cross_correlate_pair(block, 0, 0, 16)
    with pytest.raises(ValueError):
        assemble_h_tau(block, 20)


def test_assemble_matches_pairwise_loop(geom_small):
    block = _noiseless_block(geom_small, make_sources(TWO_SOURCES), num_slots=64)
    h = assemble_h_tau(block, 2)
    for m in geom_small.m_indices:
        for n in geom_small.n_indices:
            u = geom_small.element_index(m, n)
            assert h[u] == pytest.approx(cross_correlate_pair(block, m, n, 2), rel=1e-12)


def test_single_source_pseudo_snapshots_collinear(geom9):
    src = NearFieldSource(75 * DEG, 120 * DEG, 0.15)
    block = _noiseless_block(geom9, [src], num_slots=500)
    h0 = assemble_h_tau(block, 0)
    for tau in (1, 5, 20):
        h = assemble_h_tau(block, tau)
        cos_angle = np.abs(np.vdot(h0, h)) / (np.linalg.norm(h0) * np.linalg.norm(h))
        assert np.arccos(min(cos_angle, 1.0)) < 1e-6


def test_center_entry_noise_debias(geom_small):
    rng = np.random.default_rng(7)
    noise = (rng.standard_normal((geom_small.size, 50000))
             + 1j * rng.standard_normal((geom_small.size, 50000))) * np.sqrt(2.0)
    block = HrisSnapshotBlock(geom=geom_small, vec=noise)
    biased = assemble_h_tau(block, 0)
    debiased = assemble_h_tau(block, 0, noise_variance=4.0)
    center = geom_small.center_index
    assert abs(biased[center]) == pytest.approx(4.0, rel=0.05)
    assert abs(debiased[center]) < 0.2


def test_pseudo_snapshot_matrix_shape_and_columns(geom_small):
    block = _noiseless_block(geom_small, make_sources(TWO_SOURCES), num_slots=64)
    lags = LagSet((0, 1, 5))
    pseudo = build_pseudo_snapshots(block, lags)
    assert pseudo.values.shape == (geom_small.size, 3)
    assert np.allclose(pseudo.values[:, 0], assemble_h_tau(block, 0))
    single = build_pseudo_snapshots(block, LagSet((0,)))
    assert np.allclose(single.values[:, 0], assemble_h_tau(block, 0))


def test_coarray_covariance_structure(geom_small):
    src = [NearFieldSource(70 * DEG, 100 * DEG, 0.15)]
    block = _noiseless_block(geom_small, src, num_slots=400)
    pseudo = build_pseudo_snapshots(block, LagSet.consecutive(64))
    coarray = coarray_covariance(pseudo)
    assert coarray.values.shape == (geom_small.size**2,)
    mat = coarray.matrix
    # Hermitian PSD, rank one for a single noiseless source.
    assert np.allclose(mat, mat.conj().T, atol=1e-12)
    vals = np.linalg.eigvalsh(mat)
    assert vals.min() >= -1e-10 * vals.max()
    assert vals[-2] / vals[-1] < 1e-8
    # Trace identity against the pseudo-snapshot energy.
    energy = np.sum(np.abs(pseudo.values) ** 2) / pseudo.lags.count
    assert np.trace(mat).real == pytest.approx(energy, rel=1e-12)


def test_difference_coarray_phase_doubling(geom9):
    # The averaged co-array phases follow the doubled linear slope; the
    # quadratic and cross terms of the element-domain expansion are absent.
    src = NearFieldSource(58 * DEG, 97 * DEG, 0.13)
    block = _noiseless_block(geom9, [src], num_slots=500)
    pseudo = build_pseudo_snapshots(block, LagSet.consecutive(125))
    diff = average_difference_coarray(coarray_covariance(pseudo))
    g_x, g_z, *_ = fresnel_coefficients(src, geom9.spacing)
    slope = virtual_slope(geom9)
    wx = np.sin(src.elevation) * np.cos(src.azimuth)
    wz = np.cos(src.elevation)
    p = np.arange(-2 * geom9.m_x, 2 * geom9.m_x + 1)
    s = np.arange(-2 * geom9.n_z, 2 * geom9.n_z + 1)
    model = np.exp(1j * slope * (wx * p[:, None] + wz * s[None, :]))
    observed = diff.values / diff.values[2 * geom9.m_x, 2 * geom9.n_z]
    phase_err = np.abs(np.angle(observed * model.conj()))
    # Within the third-order residual of the expansion (about 0.08 rad here).
    assert phase_err.max() < 0.1


def test_difference_coarray_counts(geom_small):
    block = _noiseless_block(geom_small, make_sources(TWO_SOURCES), num_slots=64)
    coarray = coarray_covariance(build_pseudo_snapshots(block, LagSet.consecutive(16)))
    diff = average_difference_coarray(coarray)
    assert diff.values.shape == (4 * geom_small.m_x + 1, 4 * geom_small.n_z + 1)
    assert diff.counts.sum() == geom_small.size**2
    assert diff.counts[2 * geom_small.m_x, 2 * geom_small.n_z] == geom_small.size
    assert diff.counts[0, 0] == 1
