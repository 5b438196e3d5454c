"""HRIS self-localization from the BS-side observations.

The HRIS-side snapshots are reconstructed from the stage-1 target estimates,
re-weighted by the known phase schedules, and used as the mixing input of a
channel atomic-norm program per BS arm.  One-dimensional MUSIC on the
recovered BS-side Toeplitz blocks yields the per-BS bearings, and a
projector-based least-squares triangulation returns the 3-D HRIS position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .danm import music_angles
from .geometry import HrisGeometry, bearing_unit_vector, path_delta_exact
from .sdp import PsdSolution, SolverSettings, StructuredPsdProblem, solve_structured_psd
from .synthesis import HrisSnapshotBlock, PhaseSchedule
from .toeplitz import ToeplitzGenerator, TwoLevelToeplitzGenerator

__all__ = [
    "CollinearGeometryError",
    "WeightedObservation",
    "BsAnmBlocks",
    "BearingEstimate",
    "HrisPositionEstimate",
    "reconstruct_source_series",
    "reconstruct_hris_obs",
    "reconstruct_weighted_obs",
    "solve_bs_anm",
    "extract_bearing",
    "triangulate",
]

BS_MUSIC_SLOPE = -1.0


class CollinearGeometryError(ValueError):
    """Raised when the two bearing rays cannot triangulate a position."""


@dataclass(frozen=True)
class WeightedObservation:
    """Schedule-weighted reconstructed HRIS snapshots, shape ``(M, T)``."""

    values: np.ndarray

    @property
    def num_slots(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BsAnmBlocks:
    """Channel ANM solution for one BS arm."""

    gen_bs: ToeplitzGenerator
    gen_hris: TwoLevelToeplitzGenerator
    channel: np.ndarray
    rho: float
    solution: PsdSolution = field(repr=False)


@dataclass(frozen=True)
class BearingEstimate:
    """Estimated HRIS bearing seen from one BS."""

    elevation: float
    azimuth: float
    composite: float
    rejected: bool = False


@dataclass(frozen=True)
class HrisPositionEstimate:
    """Triangulated HRIS position with conditioning diagnostics."""

    position: np.ndarray
    condition_number: float
    residual: float


def _estimate_steering(geom: HrisGeometry, estimates) -> np.ndarray:
    cols = []
    for est in estimates:
        delta_r = path_delta_exact(
            est.elevation, est.azimuth, est.range_m, geom.spacing, geom.flat_m, geom.flat_n
        )
        cols.append(np.exp(2j * np.pi / geom.wavelength * delta_r))
    return np.column_stack(cols)


def reconstruct_source_series(
    geom: HrisGeometry,
    estimates,
    block: HrisSnapshotBlock,
    delta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares source series against the estimated steering matrix.

    The sensed snapshots are the only place the source waveforms are
    observable, so the reconstruction projects them onto the estimated
    steering directions.  Returns ``(signals_hat, steering_hat)``.
    """
    steering = _estimate_steering(geom, estimates)
    signals, *_ = np.linalg.lstsq(np.sqrt(delta) * steering, block.vec, rcond=None)
    return signals, steering


def reconstruct_hris_obs(
    geom: HrisGeometry,
    estimates,
    block: HrisSnapshotBlock,
    delta: float,
) -> np.ndarray:
    """Model-based reconstruction of the HRIS snapshots, shape ``(M, T)``."""
    signals, steering = reconstruct_source_series(geom, estimates, block, delta)
    return np.sqrt(delta) * steering @ signals


def reconstruct_weighted_obs(
    geom: HrisGeometry,
    estimates,
    block: HrisSnapshotBlock,
    schedule: PhaseSchedule,
    delta: float,
    reconstructed: np.ndarray | None = None,
) -> WeightedObservation:
    """Schedule-weighted reconstruction used as the ANM mixing input.

    ``reconstructed`` short-circuits the model rebuild when the caller has
    already computed it (one reconstruction serves all four arms).
    """
    if reconstructed is None:
        reconstructed = reconstruct_hris_obs(geom, estimates, block, delta)
    if schedule.num_slots != reconstructed.shape[1]:
        raise ValueError("schedule and reconstruction slot counts differ")
    return WeightedObservation(values=schedule.slots.T * reconstructed)


def solve_bs_anm(
    arm_data: np.ndarray,
    weighted_obs: WeightedObservation,
    delta: float,
    noise_level: float,
    hris_geom: HrisGeometry,
    settings: SolverSettings | None = None,
    rho_scale: float = 1.0,
) -> BsAnmBlocks:
    """Recover the rank-one arm channel through the structured PSD program.

    The diagonal blocks are the BS-side Toeplitz factor (plain) and the
    HRIS-side factor, which is two-level Toeplitz because the far-field HRIS
    response is a Kronecker product over the element grid.
    """
    arm_data = np.asarray(arm_data, dtype=complex)
    n_arm, num_slots = arm_data.shape
    if weighted_obs.num_slots != num_slots:
        raise ValueError("arm data and weighted observation slot counts differ")
    m = hris_geom.size
    rho = rho_scale * noise_level * np.sqrt(n_arm * m * np.log(n_arm * m))
    rho = max(rho, 1e-8 * np.linalg.norm(arm_data))
    problem = StructuredPsdProblem.channel_recovery(
        observed=arm_data,
        mixer=weighted_obs.values,
        scale=np.sqrt(1.0 - delta),
        rho=rho,
        top_levels=(hris_geom.num_x, hris_geom.num_z),
    )
    solution = solve_structured_psd(problem, settings)
    return BsAnmBlocks(
        gen_bs=solution.bottom,
        gen_hris=solution.top,
        channel=solution.off_block,
        rho=rho,
        solution=solution,
    )


def extract_bearing(
    gen_bx: ToeplitzGenerator,
    gen_bz: ToeplitzGenerator,
    grid_size: int = 2048,
) -> BearingEstimate:
    """Bearing from the two BS-side Toeplitz blocks via rank-one MUSIC.

    The z arm resolves ``cos(elevation)`` and the x arm the composite
    ``sin(elevation) cos(azimuth)``; a composite ratio outside the arccos
    domain is clipped and flagged.
    """
    spec_z = music_angles(gen_bz, 1, BS_MUSIC_SLOPE, grid_size=grid_size)
    spec_x = music_angles(gen_bx, 1, BS_MUSIC_SLOPE, grid_size=grid_size)
    elevation = float(np.arccos(np.clip(spec_z.peaks[0], -1.0, 1.0)))
    composite = float(spec_x.peaks[0])
    sin_el = np.sin(elevation)
    ratio = composite / sin_el if sin_el > 0 else np.inf
    rejected = bool(abs(ratio) > 1.0)
    azimuth = float(np.arccos(np.clip(ratio, -1.0, 1.0)))
    return BearingEstimate(
        elevation=elevation, azimuth=azimuth, composite=composite, rejected=rejected
    )


def triangulate(
    bearing_1: BearingEstimate,
    bearing_2: BearingEstimate,
    p_bs1: np.ndarray,
    p_bs2: np.ndarray,
    condition_limit: float = 1e8,
) -> HrisPositionEstimate:
    """Least-squares intersection of the two bearing rays.

    Each BS constrains the HRIS to its bearing ray through the orthogonal
    projector ``I - g g^T``; the stationary point solves
    ``(G1 + G2) p = G1 p1 + G2 p2``.  Nearly parallel rays make the sum
    rank-deficient and raise :class:`CollinearGeometryError`.
    """
    p_bs1 = np.asarray(p_bs1, dtype=float)
    p_bs2 = np.asarray(p_bs2, dtype=float)
    from .geometry import SphericalBearing

    g1 = bearing_unit_vector(SphericalBearing(bearing_1.elevation, bearing_1.azimuth))
    g2 = bearing_unit_vector(SphericalBearing(bearing_2.elevation, bearing_2.azimuth))
    proj_1 = np.eye(3) - np.outer(g1, g1)
    proj_2 = np.eye(3) - np.outer(g2, g2)
    total = proj_1 + proj_2
    cond = float(np.linalg.cond(total))
    if not np.isfinite(cond) or cond > condition_limit:
        raise CollinearGeometryError(
            f"near-collinear geometry: projector sum condition {cond:.3g} "
            f"exceeds {condition_limit:.3g}"
        )
    position = np.linalg.solve(total, proj_1 @ p_bs1 + proj_2 @ p_bs2)
    residual = float(
        (position - p_bs1) @ proj_1 @ (position - p_bs1)
        + (position - p_bs2) @ proj_2 @ (position - p_bs2)
    )
    return HrisPositionEstimate(
        position=position, condition_number=cond, residual=residual
    )
