"""Stage-1 target parameter estimation on the virtual co-array.

The decoupled atomic-norm program denoises the redundancy-averaged co-array
into a pair of Hermitian Toeplitz blocks whose subspaces carry the two scan
variables: ``cos(elevation)`` on the z block and the composite
``sin(elevation) cos(azimuth)`` on the x block.  One-dimensional MUSIC on
each block, a cross-coupling pairing step, and a range MUSIC over the raw
snapshot covariance complete the coarse estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .coarray import CoarrayVector, DifferenceCoarray, average_difference_coarray
from .geometry import HrisGeometry, virtual_steering
from .sdp import PsdSolution, SolverSettings, StructuredPsdProblem, solve_structured_psd
from .synthesis import HrisSnapshotBlock
from .toeplitz import ToeplitzGenerator

__all__ = [
    "AngleSpectrum",
    "PairedAngles",
    "EstimateRecord",
    "RangeScanConfig",
    "DanmBlocks",
    "virtual_slope",
    "solve_danm",
    "music_angles",
    "refine_pairs",
    "pair_angles",
    "estimate_ranges",
]


def virtual_slope(geom: HrisGeometry) -> float:
    """Phase slope per virtual element index: ``-4 pi d / lambda``.

    The centrally symmetric correlation doubles the physical phase slope
    ``-2 pi d / lambda``; with quarter-wavelength spacing the magnitude is
    ``pi``, so scan variables in ``(-1, 1)`` remain alias-free.
    """
    return -4.0 * np.pi * geom.spacing / geom.wavelength


@dataclass(frozen=True)
class AngleSpectrum:
    """MUSIC search surface with refined peak locations."""

    grid: np.ndarray
    values: np.ndarray
    peaks: np.ndarray
    under_resolved: bool = False


@dataclass(frozen=True)
class PairedAngles:
    """Per-source (elevation, azimuth) pairs with pairing diagnostics."""

    elevations: np.ndarray
    azimuths: np.ndarray
    composites: np.ndarray
    rejected: np.ndarray
    pairing_conflict: bool = False

    @property
    def count(self) -> int:
        return self.elevations.size


@dataclass(frozen=True)
class EstimateRecord:
    """Coarse stage-1 estimate for one source."""

    elevation: float
    azimuth: float
    range_m: float
    pairing_rejected: bool = False
    under_resolved: bool = False


@dataclass(frozen=True)
class RangeScanConfig:
    """Logarithmic range scan window (meters) for the range MUSIC step."""

    r_min: float
    r_max: float
    num_points: int = 512

    def __post_init__(self) -> None:
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.num_points < 8:
            raise ValueError("scan needs at least 8 points")

    @classmethod
    def for_geometry(cls, geom: HrisGeometry, num_points: int = 512) -> "RangeScanConfig":
        return cls(0.3 * geom.aperture, geom.rayleigh_distance, num_points)

    def grid(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.num_points)


@dataclass(frozen=True)
class DanmBlocks:
    """Decoupled atomic-norm solution: Toeplitz blocks plus the data block."""

    gen_x: ToeplitzGenerator
    gen_z: ToeplitzGenerator
    z_d: np.ndarray
    rho: float
    solution: PsdSolution = field(repr=False)


def solve_danm(
    coarray: CoarrayVector,
    num_sources: int,
    noise_level: float | None = None,
    settings: SolverSettings | None = None,
    rho_scale: float = 1.0,
) -> DanmBlocks:
    """Decoupled atomic-norm denoising of the co-array vector.

    ``noise_level`` is the per-entry noise scale of the averaged co-array
    data; when omitted it is estimated from the redundancy-averaging scatter.
    The regularizer is ``noise * sqrt(mbar nbar log(mbar nbar))`` on the
    weighted block traces.
    """
    if num_sources < 1:
        raise ValueError("need at least one source")
    geom = coarray.geom
    diff = average_difference_coarray(coarray)
    m_bar = 4 * geom.m_x + 1
    n_bar = 4 * geom.n_z + 1
    sigma = diff.noise_scale if noise_level is None else float(noise_level)
    rho = rho_scale * sigma * np.sqrt(m_bar * n_bar * np.log(m_bar * n_bar))
    data_norm = np.linalg.norm(diff.values)
    rho = max(rho, 1e-8 * data_norm)
    problem = StructuredPsdProblem.toeplitz_denoising(diff.values, rho=rho)
    solution = solve_structured_psd(problem, settings)
    return DanmBlocks(
        gen_x=solution.bottom,
        gen_z=solution.top,
        z_d=solution.off_block,
        rho=rho,
        solution=solution,
    )


def _refine_peak(grid: np.ndarray, values: np.ndarray, idx: int) -> float:
    """Quadratic interpolation of a spectrum peak through three samples."""
    if idx == 0 or idx == grid.size - 1:
        return float(grid[idx])
    y0, y1, y2 = values[idx - 1], values[idx], values[idx + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return float(grid[idx])
    shift = 0.5 * (y0 - y2) / denom
    shift = np.clip(shift, -1.0, 1.0)
    step = grid[idx] - grid[idx - 1] if shift < 0 else grid[idx + 1] - grid[idx]
    return float(grid[idx] + shift * abs(step))


def _pick_peaks(
    grid: np.ndarray, values: np.ndarray, count: int, min_separation: int = 2
) -> tuple[np.ndarray, bool]:
    """Largest ``count`` local maxima at least ``min_separation`` cells apart."""
    interior = (values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])
    candidates = np.flatnonzero(interior) + 1
    if candidates.size == 0:
        candidates = np.array([int(np.argmax(values))])
    order = candidates[np.argsort(values[candidates])[::-1]]
    chosen: list[int] = []
    for idx in order:
        if all(abs(idx - c) >= min_separation for c in chosen):
            chosen.append(int(idx))
        if len(chosen) == count:
            break
    under_resolved = len(chosen) < count
    while len(chosen) < count:
        chosen.append(chosen[len(chosen) % max(1, len(chosen))])
    peaks = np.array([_refine_peak(grid, values, i) for i in chosen])
    return peaks, under_resolved


def music_angles(
    gen: ToeplitzGenerator,
    num_sources: int,
    slope: float,
    grid_size: int = 2048,
    domain: tuple[float, float] = (-1.0, 1.0),
) -> AngleSpectrum:
    """One-dimensional MUSIC on a Toeplitz block.

    Scans ``omega`` over ``domain`` against the symmetric-index steering
    ``exp(j slope p omega)``; the spectrum is the reciprocal noise-subspace
    projection.  Peaks are refined by local quadratic interpolation.
    """
    t_mat = gen.matrix()
    dim = gen.dim
    if dim <= num_sources:
        raise ValueError(
            f"subspace dimension insufficient: Toeplitz dimension {dim} "
            f"must exceed the source count {num_sources}"
        )
    vals, vecs = np.linalg.eigh(t_mat)
    noise_basis = vecs[:, : dim - num_sources]
    grid = np.linspace(domain[0], domain[1], grid_size + 2)[1:-1]
    half = (dim - 1) // 2
    steering = virtual_steering(grid, half, slope)
    proj = noise_basis.conj().T @ steering
    denom = np.sum(np.abs(proj) ** 2, axis=0)
    spectrum = 1.0 / np.maximum(denom, 1e-300)
    peaks, under = _pick_peaks(grid, spectrum, num_sources)
    return AngleSpectrum(grid=grid, values=spectrum, peaks=peaks, under_resolved=under)


def pair_angles(
    z_d: np.ndarray,
    elevations: np.ndarray,
    composites: np.ndarray,
    slope: float,
) -> PairedAngles:
    """Match unpaired elevation and composite estimates via the data block.

    Projects ``z_d`` onto the estimated steering bases from both sides; the
    magnitude of the coupling matrix selects, for each elevation, the
    composite that belongs to the same source.  Azimuth follows from
    ``arccos(composite / sin(elevation))``; out-of-domain ratios are clipped
    and flagged.
    """
    elevations = np.asarray(elevations, dtype=float)
    composites = np.asarray(composites, dtype=float)
    k = elevations.size
    if composites.size != k:
        raise ValueError("elevation and composite lists must have equal length")
    m_bar, n_bar = z_d.shape
    a_x = virtual_steering(composites, (m_bar - 1) // 2, slope).reshape(m_bar, k)
    a_z = virtual_steering(np.cos(elevations), (n_bar - 1) // 2, slope).reshape(n_bar, k)
    coupling = np.linalg.pinv(a_x) @ z_d @ np.linalg.pinv(a_z.T)
    choice = np.abs(coupling).argmax(axis=0)
    conflict = np.unique(choice).size != k
    if conflict:
        # Duplicate selections: fall back to a one-to-one assignment.
        row, col = scipy.optimize.linear_sum_assignment(-np.abs(coupling))
        choice = row[np.argsort(col)]
    paired = composites[choice]
    ratio = paired / np.sin(elevations)
    rejected = np.abs(ratio) > 1.0
    azimuths = np.arccos(np.clip(ratio, -1.0, 1.0))
    return PairedAngles(
        elevations=elevations,
        azimuths=azimuths,
        composites=paired,
        rejected=rejected,
        pairing_conflict=bool(conflict),
    )


def refine_pairs(
    diff: DifferenceCoarray,
    pairs: PairedAngles,
    slope: float,
    passes: int = 3,
    cell_fraction: float = 0.125,
) -> PairedAngles:
    """Joint local refinement of paired scan variables on the averaged co-array.

    The one-dimensional subspace scans cannot separate sources that nearly
    collide in a single marginal (equal elevations, or equal composites);
    the separable model ``sum_k q_k vx(wx_k) vz(wz_k)^T`` still identifies
    them jointly.  Starting from the paired estimates, each source's
    ``(wx, wz)`` is refined by cyclic bounded line searches on the
    count-weighted residual with the amplitudes re-solved by least squares.
    The search stays within ``cell_fraction`` of a virtual-aperture
    resolution cell, so this is a local polish, not a re-detection.
    """
    values, counts = diff.values, diff.counts
    m_bar, n_bar = values.shape
    weights = np.sqrt(counts)
    data = (weights * values).ravel()
    wx = pairs.composites.astype(float).copy()
    wz = np.cos(pairs.elevations)
    k = wx.size

    def basis(wx_j: float, wz_j: float) -> np.ndarray:
        vx = virtual_steering(wx_j, (m_bar - 1) // 2, slope)
        vz = virtual_steering(wz_j, (n_bar - 1) // 2, slope)
        return (weights * np.outer(vx, vz)).ravel()

    def solve_amplitudes() -> tuple[np.ndarray, np.ndarray]:
        b = np.column_stack([basis(wx[j], wz[j]) for j in range(k)])
        q, *_ = np.linalg.lstsq(b, data, rcond=None)
        return b, q

    half_x = cell_fraction * 2.0 / m_bar
    half_z = cell_fraction * 2.0 / n_bar
    for _ in range(passes):
        b, q = solve_amplitudes()
        for j in range(k):
            residual = data - b @ q + b[:, j] * q[j]

            def misfit(wx_j: float, wz_j: float) -> float:
                b_j = basis(wx_j, wz_j)
                return -np.abs(np.vdot(b_j, residual)) ** 2 / np.vdot(b_j, b_j).real

            for axis, half in ((0, half_x), (1, half_z)):
                current = [wx[j], wz[j]]

                def objective(v: float, axis=axis, current=current) -> float:
                    point = list(current)
                    point[axis] = v
                    return misfit(*point)

                lo = max(-0.999, current[axis] - half)
                hi = min(0.999, current[axis] + half)
                best = scipy.optimize.minimize_scalar(
                    objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
                )
                current[axis] = float(best.x)
                wx[j], wz[j] = current
            b, q = solve_amplitudes()

    elevations = np.arccos(np.clip(wz, -1.0, 1.0))
    ratio = wx / np.sin(elevations)
    rejected = np.abs(ratio) > 1.0
    azimuths = np.arccos(np.clip(ratio, -1.0, 1.0))
    return PairedAngles(
        elevations=elevations,
        azimuths=azimuths,
        composites=wx,
        rejected=rejected | pairs.rejected,
        pairing_conflict=pairs.pairing_conflict,
    )


def estimate_ranges(
    block: HrisSnapshotBlock,
    pairs: PairedAngles,
    scan: RangeScanConfig | None = None,
) -> np.ndarray:
    """Per-source range MUSIC over the raw HRIS snapshot covariance.

    Scans the exact-model steering at each paired angle along a logarithmic
    range grid against the covariance noise subspace.
    """
    geom = block.geom
    k = pairs.count
    if block.num_slots < k + 1:
        raise ValueError(
            f"insufficient snapshots: {block.num_slots} slots cannot support "
            f"{k} sources"
        )
    if scan is None:
        scan = RangeScanConfig.for_geometry(geom)
    cov = block.vec @ block.vec.conj().T / block.num_slots
    vals, vecs = np.linalg.eigh(cov)
    noise_basis = vecs[:, : geom.size - k]
    grid = scan.grid()
    ranges = np.empty(k)
    for i in range(k):
        el, az = pairs.elevations[i], pairs.azimuths[i]
        omega = geom.flat_m[:, None] * np.sin(el) * np.cos(az) + geom.flat_n[:, None] * np.cos(el)
        rr = grid[None, :]
        r_mn = np.sqrt(
            rr**2
            - 2.0 * geom.spacing * rr * omega
            + (geom.flat_m[:, None] ** 2 + geom.flat_n[:, None] ** 2) * geom.spacing**2
        )
        steering = np.exp(2j * np.pi / geom.wavelength * (r_mn - rr))
        proj = noise_basis.conj().T @ steering
        spectrum = 1.0 / np.maximum(np.sum(np.abs(proj) ** 2, axis=0), 1e-300)
        idx = int(np.argmax(spectrum))
        ranges[i] = _refine_peak(grid, spectrum, idx)
    return ranges
