import numpy as np
import pytest

from hrisloc.bench import compute_snr
from hrisloc.geometry import BsGeometry, HrisGeometry, NearFieldSource, SphericalBearing
from hrisloc.synthesis import (
    ChannelSpec,
    PhaseSchedule,
    SourceSignalModel,
    draw_source_signals,
    random_phase_schedule,
    spatial_response,
    synthesize_bs_rx,
    synthesize_hris_rx,
)

from conftest import DEG, make_sources, TWO_SOURCES


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec(delta=0.0)
    with pytest.raises(ValueError):
        ChannelSpec(delta=1.0)
    with pytest.raises(ValueError):
        ChannelSpec(noise_variance=-1.0)


def test_signal_model_validation():
    with pytest.raises(ValueError):
        SourceSignalModel(kind="chirp")
    with pytest.raises(ValueError):
        SourceSignalModel(power=0.0)
    with pytest.raises(ValueError):
        SourceSignalModel(offset_spacing=0.6)


def test_noiseless_center_element_is_scaled_signal(geom9):
    src = [NearFieldSource(90 * DEG, 90 * DEG, 0.15)]
    channel = ChannelSpec(delta=0.5, noise_variance=0.0)
    block = synthesize_hris_rx(geom9, src, SourceSignalModel(seed=3), channel, 64)
    center = block.vec[geom9.center_index]
    assert np.allclose(center, np.sqrt(0.5) * block.source_signals[0], rtol=1e-12)


def test_block_shapes_and_grid_view(geom9):
    sources = make_sources(TWO_SOURCES)
    block = synthesize_hris_rx(
        geom9, sources, SourceSignalModel(seed=1), ChannelSpec(noise_variance=0.1), 32
    )
    assert block.vec.shape == (81, 32)
    assert block.grids.shape == (9, 9, 32)
    # Grid view agrees with the global index map.
    u = geom9.element_index(2, -3)
    assert np.allclose(block.grids[2 + 4, -3 + 4, :], block.vec[u, :])


def test_empty_source_list_rejected(geom9):
    with pytest.raises(ValueError):
        synthesize_hris_rx(geom9, [], SourceSignalModel(), ChannelSpec(), 8)


def test_tone_signals_unit_power_and_orthogonal():
    sources = make_sources(TWO_SOURCES)
    model = SourceSignalModel(kind="tone", seed=5, offset_spacing=0.08)
    sig = draw_source_signals(model, sources, 500)
    assert np.allclose(np.abs(sig), 1.0, atol=1e-12)
    cross = np.abs(sig[0] @ sig[1].conj()) / 500
    assert cross < 0.02


def test_gaussian_signals_power():
    sources = make_sources(TWO_SOURCES)
    model = SourceSignalModel(kind="complex-gaussian", seed=5)
    sig = draw_source_signals(model, sources, 20000)
    assert np.mean(np.abs(sig) ** 2) == pytest.approx(1.0, rel=0.05)


def test_empirical_snr_matches_configuration(geom9):
    # Eq.-37-style measurement against the configured per-element ratio.
    sources = make_sources(TWO_SOURCES)
    snr_db = 20.0
    sigma2 = 0.5 * len(sources) / 10 ** (snr_db / 10)
    block = synthesize_hris_rx(
        geom9, sources, SourceSignalModel(seed=9), ChannelSpec(delta=0.5, noise_variance=sigma2),
        4000, rng=np.random.default_rng(9),
    )
    measured = compute_snr(block, sigma2)
    # The energy ratio includes the noise term: 10 log10(1 + snr).
    expected = 10 * np.log10(1 + 10 ** (snr_db / 10))
    assert measured == pytest.approx(expected, abs=0.3)


def test_bs_rx_zero_gain_arm_is_pure_noise(geom_small):
    sources = make_sources(TWO_SOURCES)
    channel = ChannelSpec(gamma_x=0.0, gamma_z=1.0, delta=0.5, noise_variance=0.0)
    block = synthesize_hris_rx(geom_small, sources, SourceSignalModel(seed=2), channel, 16)
    bs = BsGeometry(n_x=3, n_z=3)
    sched = random_phase_schedule(geom_small.size, 16, 0)
    out = synthesize_bs_rx(bs, geom_small, SphericalBearing(1.0, 1.0), channel, sched, block)
    assert np.allclose(out.x_arm, 0.0)
    assert not np.allclose(out.z_arm, 0.0)


def test_bs_rx_scalar_case_matches_hand_formula():
    geom = HrisGeometry(m_x=0, n_z=0, spacing=0.0025, wavelength=0.01)
    src = [NearFieldSource(1.0, 1.0, 0.2)]
    channel = ChannelSpec(delta=0.4, noise_variance=0.0, gamma_x=2.0 - 1.0j)
    block = synthesize_hris_rx(geom, src, SourceSignalModel(seed=4), channel, 8)
    bs = BsGeometry(n_x=1, n_z=1)
    bearing = SphericalBearing(0.7, 0.9)
    sched = random_phase_schedule(1, 8, 1)
    out = synthesize_bs_rx(bs, geom, bearing, channel, sched, block)
    # M = N = 1: the x-arm is sqrt(1-delta) * gamma * w_t * ybar(t).
    expected = np.sqrt(0.6) * (2.0 - 1.0j) * sched.slots[:, 0] * block.vec[0]
    assert np.allclose(out.x_arm[0], expected, rtol=1e-12)


def test_bs_rx_rank_one_noiseless(geom_small):
    sources = make_sources(TWO_SOURCES)
    channel = ChannelSpec(delta=0.5, noise_variance=0.0)
    block = synthesize_hris_rx(geom_small, sources, SourceSignalModel(seed=6), channel, 24)
    bs = BsGeometry(n_x=4, n_z=4)
    sched = random_phase_schedule(geom_small.size, 24, 3)
    out = synthesize_bs_rx(bs, geom_small, SphericalBearing(0.8, 1.2), channel, sched, block)
    s = np.linalg.svd(out.x_arm, compute_uv=False)
    assert s[1] < 1e-10 * s[0]


def test_bs_rx_linear_in_snapshots(geom_small):
    sources = make_sources(TWO_SOURCES)
    channel = ChannelSpec(delta=0.5, noise_variance=0.0)
    block = synthesize_hris_rx(geom_small, sources, SourceSignalModel(seed=8), channel, 16)
    doubled = type(block)(geom=block.geom, vec=2.0 * block.vec)
    bs = BsGeometry(n_x=3, n_z=3)
    bearing = SphericalBearing(1.1, 0.6)
    sched = random_phase_schedule(geom_small.size, 16, 5)
    out1 = synthesize_bs_rx(bs, geom_small, bearing, channel, sched, block)
    out2 = synthesize_bs_rx(bs, geom_small, bearing, channel, sched, doubled)
    assert np.allclose(out2.x_arm, 2.0 * out1.x_arm, rtol=1e-12)


def test_bs_rx_slot_mismatch_rejected(geom_small):
    sources = make_sources(TWO_SOURCES)
    channel = ChannelSpec(noise_variance=0.0)
    block = synthesize_hris_rx(geom_small, sources, SourceSignalModel(seed=1), channel, 16)
    sched = random_phase_schedule(geom_small.size, 8, 0)
    with pytest.raises(ValueError):
        synthesize_bs_rx(BsGeometry(3, 3), geom_small, SphericalBearing(1.0, 1.0), channel, sched, block)


def test_spatial_response_outer_product(geom_small):
    bearing = SphericalBearing(0.9, 1.3)
    h = spatial_response(BsGeometry(4, 4), geom_small, bearing, 1.5 + 0.5j, "x")
    assert h.shape == (4, geom_small.size)
    assert np.linalg.matrix_rank(h) == 1


def test_random_schedule_determinism_and_modulus():
    a = random_phase_schedule(16, 8, 42)
    b = random_phase_schedule(16, 8, 42)
    assert np.array_equal(a.slots, b.slots)
    assert np.allclose(np.abs(a.slots), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        random_phase_schedule(0, 4, 1)


def test_random_schedule_phase_uniformity():
    # Chi-square check on the phase histogram over many draws.
    sched = random_phase_schedule(100, 1000, 7)
    phases = np.angle(sched.slots).ravel() % (2 * np.pi)
    counts, _ = np.histogram(phases, bins=16, range=(0, 2 * np.pi))
    expected = phases.size / 16
    chi2 = np.sum((counts - expected) ** 2 / expected)
    # 15 degrees of freedom; 99.9th percentile is about 37.7.
    assert chi2 < 37.7


def test_phase_schedule_validation():
    with pytest.raises(ValueError):
        PhaseSchedule(slots=np.full((4, 3), 0.5 + 0.0j))


def test_hris_and_bs_noise_streams_independent(geom_small):
    sources = make_sources(TWO_SOURCES)
    channel = ChannelSpec(delta=0.5, noise_variance=1.0)
    rng_a = np.random.default_rng(11)
    rng_b = np.random.default_rng(12)
    block = synthesize_hris_rx(geom_small, sources, SourceSignalModel(seed=11), channel, 5000, rng=rng_a)
    clean = synthesize_hris_rx(
        geom_small, sources, SourceSignalModel(seed=11),
        ChannelSpec(delta=0.5, noise_variance=0.0), 5000,
    )
    hris_noise = (block.vec - clean.vec)[0]
    bs = BsGeometry(1, 1)
    sched = random_phase_schedule(geom_small.size, 5000, 2)
    out = synthesize_bs_rx(bs, geom_small, SphericalBearing(1.0, 1.0),
                           ChannelSpec(delta=0.5, noise_variance=1.0), sched, clean, rng=rng_b)
    ref = synthesize_bs_rx(bs, geom_small, SphericalBearing(1.0, 1.0),
                           ChannelSpec(delta=0.5, noise_variance=0.0), sched, clean)
    bs_noise = (out.x_arm - ref.x_arm)[0]
    corr = np.abs(np.mean(hris_noise * bs_noise.conj()))
    assert corr < 0.05
