"""Per-trial execution of the two-stage localization pipeline.

One trial synthesizes the HRIS block, runs the co-array stage-1 estimator
(with optional bias correction), and, when BSs are configured, estimates the
HRIS-to-BS bearings from the four arm observations, triangulates the HRIS
position, and optionally repeats the BS side under the power-optimized phase
schedules.  All randomness derives from one seed sequence per trial.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coarray import LagSet, average_difference_coarray, build_pseudo_snapshots, coarray_covariance
from .config import PipelineOptions, ScenarioConfig
from .danm import (
    EstimateRecord,
    PairedAngles,
    RangeScanConfig,
    estimate_ranges,
    music_angles,
    pair_angles,
    refine_pairs,
    solve_danm,
    virtual_slope,
)
from .geometry import SphericalBearing, bearing_unit_vector
from .locator import (
    extract_bearing,
    reconstruct_hris_obs,
    reconstruct_weighted_obs,
    solve_bs_anm,
    triangulate,
)
from .phaseopt import optimize_schedule
from .sdp import SolverSettings
from .synthesis import (
    ChannelSpec,
    PhaseSchedule,
    random_phase_schedule,
    spatial_response,
    synthesize_bs_rx,
    synthesize_hris_rx,
)
from .tls import ConditioningError, RefinedEstimate, build_design_matrix, refine

__all__ = ["BsSideResult", "TrialResult", "run_trial", "trial_seed"]


@dataclass(frozen=True)
class BsSideResult:
    """Bearings, position, and received powers for one schedule family."""

    bearings: tuple
    position: np.ndarray | None
    condition_number: float
    mean_power: float
    schedules: dict = field(repr=False, default_factory=dict)


@dataclass
class TrialResult:
    """All per-trial outputs; ``failed`` trials carry the error text."""

    coarse: np.ndarray | None = None
    refined: np.ndarray | None = None
    ranges_coarse: np.ndarray | None = None
    random_side: BsSideResult | None = None
    optimized_side: BsSideResult | None = None
    target_positions: np.ndarray | None = None
    failed: bool = False
    error: str | None = None


def trial_seed(master_seed: int, sweep_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(sweep_index), int(trial_index)])


def _solver_settings(budget) -> SolverSettings:
    return SolverSettings(
        max_iterations=budget.max_iterations,
        primal_tolerance=budget.tolerance,
        dual_tolerance=budget.tolerance,
    )


def _stage1(config: ScenarioConfig, channel: ChannelSpec, rng: np.random.Generator):
    geom = config.geometry
    options = config.pipeline
    num_slots = config.run.num_slots
    block = synthesize_hris_rx(geom, list(config.sources), config.signal, channel, num_slots, rng=rng)
    lags = LagSet.consecutive(config.run.lags_for(num_slots))
    pseudo = build_pseudo_snapshots(block, lags, noise_variance=channel.noise_variance)
    coarray = coarray_covariance(pseudo)
    k = len(config.sources)
    blocks = solve_danm(
        coarray,
        k,
        settings=_solver_settings(options.danm),
        rho_scale=options.danm.rho_scale,
    )
    slope = virtual_slope(geom)
    spec_x = music_angles(blocks.gen_x, k, slope, grid_size=options.music_grid)
    spec_z = music_angles(blocks.gen_z, k, slope, grid_size=options.music_grid)
    elevations = np.arccos(np.clip(-spec_z.peaks, -1.0, 1.0))
    pairs = pair_angles(blocks.z_d, elevations, spec_x.peaks, slope)
    if options.refine_2d:
        diff = average_difference_coarray(coarray)
        pairs = refine_pairs(diff, pairs, slope)
    if options.range_scan is not None:
        scan = RangeScanConfig(
            options.range_scan.r_min_m, options.range_scan.r_max_m, options.range_scan.points
        )
    else:
        scan = RangeScanConfig.for_geometry(geom)
    ranges = estimate_ranges(block, pairs, scan)
    under = spec_x.under_resolved or spec_z.under_resolved
    coarse = [
        EstimateRecord(
            elevation=float(pairs.elevations[i]),
            azimuth=float(pairs.azimuths[i]),
            range_m=float(ranges[i]),
            pairing_rejected=bool(pairs.rejected[i]),
            under_resolved=under,
        )
        for i in range(k)
    ]
    return block, coarse


def _tls_pass(config: ScenarioConfig, coarse: list[EstimateRecord]) -> list[RefinedEstimate]:
    refined = []
    for record in coarse:
        design = build_design_matrix(
            config.geometry, (record.elevation, record.azimuth, record.range_m)
        )
        try:
            refined.append(refine(design))
        except ConditioningError as exc:
            refined.append(
                RefinedEstimate(
                    elevation=record.elevation,
                    azimuth=record.azimuth,
                    range_m=record.range_m,
                    min_singular_value=np.nan,
                    refined=False,
                    reject_reason=str(exc),
                )
            )
    return refined


def _bs_side(
    config: ScenarioConfig,
    channel: ChannelSpec,
    block,
    estimates,
    schedules: dict,
    rng: np.random.Generator,
):
    """Synthesize the four arm observations and estimate both bearings."""
    geom = config.geometry
    options = config.pipeline
    settings = _solver_settings(options.bs_anm)
    noise_level = float(np.sqrt(channel.noise_variance))
    reconstructed = reconstruct_hris_obs(geom, estimates, block, channel.delta)
    bearings = []
    powers = []
    for i, placement in enumerate(config.bs):
        bs_geom = placement.geometry(config.hris_position)
        bearing_true = placement.bearing()
        sched_x, sched_z = schedules[(i, "x")], schedules[(i, "z")]
        bs_block = synthesize_bs_rx(
            bs_geom, geom, bearing_true, channel, (sched_x, sched_z), block, rng=rng
        )
        powers.append(np.mean(np.sum(np.abs(bs_block.x_arm) ** 2, axis=0)))
        powers.append(np.mean(np.sum(np.abs(bs_block.z_arm) ** 2, axis=0)))
        arm_solutions = {}
        for axis, arm in (("x", bs_block.x_arm), ("z", bs_block.z_arm)):
            weighted = reconstruct_weighted_obs(
                geom, estimates, block, schedules[(i, axis)], channel.delta,
                reconstructed=reconstructed,
            )
            arm_solutions[axis] = solve_bs_anm(
                arm, weighted, channel.delta, noise_level, geom, settings,
                rho_scale=options.bs_anm.rho_scale,
            )
        bearings.append(
            extract_bearing(
                arm_solutions["x"].gen_bs,
                arm_solutions["z"].gen_bs,
                grid_size=options.music_grid,
            )
        )
    position = None
    cond = np.inf
    try:
        geometries = config.bs_geometries()
        estimate = triangulate(
            bearings[0], bearings[1], geometries[0].position, geometries[1].position
        )
        position = estimate.position
        cond = estimate.condition_number
    except ValueError:
        position = None
    return BsSideResult(
        bearings=tuple(bearings),
        position=position,
        condition_number=cond,
        mean_power=float(np.mean(powers)),
        schedules=schedules,
    ), reconstructed


def _optimized_schedules(
    config: ScenarioConfig,
    random_result: BsSideResult,
    reconstructed: np.ndarray,
    seed_ints: list[int],
):
    """Phase schedules aligned to the (estimated or oracle) arm channels."""
    geom = config.geometry
    options = config.pipeline
    schedules = {}
    for i, placement in enumerate(config.bs):
        bs_geom = placement.geometry(config.hris_position)
        if options.oracle_channel:
            bearing = placement.bearing()
        else:
            est = random_result.bearings[i]
            bearing = SphericalBearing(est.elevation, est.azimuth)
        for j, axis in enumerate(("x", "z")):
            channel_mat = spatial_response(bs_geom, geom, bearing, 1.0, axis)
            schedules[(i, axis)] = optimize_schedule(
                channel_mat,
                reconstructed,
                config.channel.delta,
                randomizations=options.randomizations,
                seed=seed_ints[2 * i + j],
            )
    return schedules


def run_trial(config: ScenarioConfig, sweep_index: int, trial_index: int) -> TrialResult:
    """Execute one Monte Carlo trial at the already-specialized scenario."""
    seq = trial_seed(config.run.seed, sweep_index, trial_index)
    children = seq.spawn(4)
    rng_stage1 = np.random.default_rng(children[0])
    rng_bs_random = np.random.default_rng(children[1])
    rng_bs_opt = np.random.default_rng(children[2])
    seed_ints = np.random.default_rng(children[3]).integers(0, 2**31 - 1, size=12)
    result = TrialResult()
    try:
        noise_var = config.noise_variance_for(config.snr_db)
        channel = replace(config.channel, noise_variance=noise_var)
        block, coarse = _stage1(config, channel, rng_stage1)
        result.coarse = np.array(
            [[r.elevation, r.azimuth, r.range_m] for r in coarse]
        )
        if config.pipeline.enable_tls:
            refined = _tls_pass(config, coarse)
            result.refined = np.array(
                [[r.elevation, r.azimuth, r.range_m] for r in refined]
            )
            estimates = refined
        else:
            estimates = coarse
            result.refined = result.coarse.copy()

        if config.bs:
            num_slots = config.run.num_slots
            schedules = {
                (i, axis): random_phase_schedule(
                    config.geometry.size, num_slots, int(seed_ints[4 + 2 * i + j])
                )
                for i in range(2)
                for j, axis in enumerate(("x", "z"))
            }
            random_side, reconstructed = _bs_side(
                config, channel, block, estimates, schedules, rng_bs_random
            )
            result.random_side = random_side
            if config.pipeline.enable_phase_opt:
                opt_schedules = _optimized_schedules(
                    config, random_side, reconstructed, [int(s) for s in seed_ints[:4]]
                )
                optimized_side, _ = _bs_side(
                    config, channel, block, estimates, opt_schedules, rng_bs_opt
                )
                result.optimized_side = optimized_side

            side = result.optimized_side or result.random_side
            if side.position is not None:
                final = result.refined
                units = np.stack(
                    [
                        bearing_unit_vector(SphericalBearing(el, az))
                        for el, az, _ in final
                    ]
                )
                result.target_positions = side.position[None, :] + final[:, 2:3] * units
    except Exception as exc:  # noqa: BLE001 - per-trial fault isolation
        result.failed = True
        result.error = f"{type(exc).__name__}: {exc}"
    return result
