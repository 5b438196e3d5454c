"""Fisher information, Cramer-Rao bounds, and the HRIS position error bound.

Target bounds use the exact spherical-wave model with closed-form steering
partials; signals are treated as known (conditional formulation), so the
information grows linearly with slot count.  The HRIS bound chains per-BS
bearing information through the bearing-vs-position Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    BsGeometry,
    HrisGeometry,
    NearFieldSource,
    SphericalBearing,
    bs_steering,
    hris_ff_steering,
)
from .synthesis import PhaseSchedule

__all__ = [
    "FimMatrix",
    "BoundReport",
    "target_steering_partials",
    "target_fim",
    "target_crb",
    "bs_channel_partial",
    "bs_fim",
    "bearing_jacobian",
    "hris_peb",
]


@dataclass(frozen=True)
class FimMatrix:
    """Real symmetric Fisher information with parameter-name metadata."""

    values: np.ndarray
    parameters: tuple[str, ...]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.parameters):
            raise ValueError("FIM must be square and match the parameter list")
        object.__setattr__(self, "values", 0.5 * (v + v.T))


@dataclass(frozen=True)
class BoundReport:
    """Square-root bounds per parameter plus conditioning diagnostics."""

    labels: tuple[str, ...]
    bounds: np.ndarray
    condition_number: float
    pseudo_inverse_used: bool = False

    def by_label(self, label: str) -> np.ndarray:
        mask = np.array([lab.startswith(label) for lab in self.labels])
        return self.bounds[mask]


def target_steering_partials(
    geom: HrisGeometry, src: NearFieldSource, delta: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form partials of ``sqrt(delta) a(el, az, r)`` per element.

    Returns the elevation, azimuth, and range partial vectors (length ``M``,
    global element order) of the exact-model steering response.
    """
    m = geom.flat_m.astype(float)
    n = geom.flat_n.astype(float)
    d, lam, r = geom.spacing, geom.wavelength, src.range_m
    el, az = src.elevation, src.azimuth
    omega = m * np.sin(el) * np.cos(az) + n * np.cos(el)
    r_mn = np.sqrt(r**2 - 2.0 * d * r * omega + (m**2 + n**2) * d**2)
    steering = np.sqrt(delta) * np.exp(2j * np.pi / lam * (r_mn - r))
    common = 1j * 2.0 * np.pi / lam * steering
    d_el = common * (r * d / r_mn) * (n * np.sin(el) - m * np.cos(el) * np.cos(az))
    d_az = common * (r * d / r_mn) * (m * np.sin(el) * np.sin(az))
    d_r = common * ((r - omega * d) / r_mn - 1.0)
    return d_el, d_az, d_r


def target_fim(
    geom: HrisGeometry,
    sources: list[NearFieldSource],
    delta: float,
    noise_variance: float,
    num_slots: int,
    signals: np.ndarray | None = None,
) -> FimMatrix:
    """Fisher information for the stacked ``(el, az, r)`` target parameters.

    ``F = (2 / sigma^2) sum_t Re{ J_t^H J_t }`` with the closed-form steering
    partials as columns.  ``signals`` (K x T) supplies realized source series;
    when omitted the expected cross-energy ``T * diag(power)`` is used.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive for a finite FIM")
    k = len(sources)
    partials = np.empty((geom.size, 3 * k), dtype=complex)
    for i, src in enumerate(sources):
        d_el, d_az, d_r = target_steering_partials(geom, src, delta)
        partials[:, 3 * i] = d_el
        partials[:, 3 * i + 1] = d_az
        partials[:, 3 * i + 2] = d_r
    if signals is None:
        powers = np.array([s.power for s in sources])
        cross = np.diag(num_slots * powers).astype(complex)
    else:
        signals = np.asarray(signals, dtype=complex)
        if signals.shape[0] != k:
            raise ValueError("signals must have one row per source")
        cross = signals @ signals.conj().T
    gram = partials.conj().T @ partials
    expand = np.kron(cross.T, np.ones((3, 3)))
    fim = 2.0 / noise_variance * np.real(gram * expand)
    labels = tuple(
        f"{name}_{i}" for i in range(k) for name in ("elevation", "azimuth", "range")
    )
    return FimMatrix(values=fim, parameters=labels)


def _invert_fim(fim: FimMatrix) -> tuple[np.ndarray, float, bool]:
    vals, vecs = np.linalg.eigh(fim.values)
    vmax = float(vals.max(initial=0.0))
    if vmax <= 0:
        raise np.linalg.LinAlgError("Fisher information is identically zero")
    cond = np.inf if vals.min() <= 0 else vmax / vals.min()
    pseudo = bool(vals.min() <= 1e-12 * vmax)
    inv_vals = np.where(vals > 1e-12 * vmax, 1.0 / np.maximum(vals, 1e-300), 0.0)
    inv = (vecs * inv_vals) @ vecs.T
    return inv, cond, pseudo


def target_crb(fim: FimMatrix) -> BoundReport:
    """Square-root CRBs: ``sqrt(diag(F^-1))`` per parameter."""
    inv, cond, pseudo = _invert_fim(fim)
    return BoundReport(
        labels=fim.parameters,
        bounds=np.sqrt(np.maximum(np.diag(inv), 0.0)),
        condition_number=cond,
        pseudo_inverse_used=pseudo,
    )


def bs_channel_partial(
    bs: BsGeometry,
    hris_geom: HrisGeometry,
    bearing: SphericalBearing,
    gamma: complex,
    axis: str,
) -> np.ndarray:
    """Partial of the rank-one arm response w.r.t. its bearing angle.

    x arm: derivative in azimuth; z arm: derivative in elevation.  The
    re-radiation factor is held at the nominal reciprocal bearing, matching
    the closed-form expressions this implements.
    """
    b_arm = bs_steering(bs, bearing, axis)
    n_elems = b_arm.size
    offsets = (n_elems - 1) / 2.0 - np.arange(n_elems)
    if axis == "x":
        factor = -1j * np.sin(bearing.elevation) * np.sin(bearing.azimuth) * offsets
    elif axis == "z":
        factor = -1j * np.sin(bearing.elevation) * offsets
    else:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    b_r = hris_ff_steering(hris_geom, bearing.reciprocal())
    return gamma * np.outer(b_arm * factor, b_r.conj())


def bs_fim(
    bs: BsGeometry,
    hris_geom: HrisGeometry,
    bearing: SphericalBearing,
    gamma_x: complex,
    gamma_z: complex,
    delta: float,
    noise_variance: float,
    schedule_x: PhaseSchedule,
    schedule_z: PhaseSchedule,
    hris_vec: np.ndarray,
) -> FimMatrix:
    """Per-BS 2x2 bearing FIM over ``(azimuth, elevation)``.

    The x arm informs the azimuth and the z arm the elevation; the cross
    terms vanish under the block-diagonal derivative structure, so the FIM
    is diagonal.  ``hris_vec`` holds the reflected snapshots (M x T).
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive for a finite FIM")
    scale = 1.0 - delta
    d_hx = bs_channel_partial(bs, hris_geom, bearing, gamma_x, "x")
    d_hz = bs_channel_partial(bs, hris_geom, bearing, gamma_z, "z")
    refl_x = schedule_x.slots.T * hris_vec
    refl_z = schedule_z.slots.T * hris_vec
    f_az = 2.0 / noise_variance * scale * np.sum(np.abs(d_hx @ refl_x) ** 2)
    f_el = 2.0 / noise_variance * scale * np.sum(np.abs(d_hz @ refl_z) ** 2)
    return FimMatrix(
        values=np.diag([f_az, f_el]), parameters=("azimuth_bs", "elevation_bs")
    )


def bearing_jacobian(p_bs: np.ndarray, p_hris: np.ndarray) -> np.ndarray:
    """3x2 Jacobian of the BS-to-HRIS bearing w.r.t. the HRIS position.

    Columns are the gradients of azimuth and elevation.  The azimuth has no
    vertical sensitivity; the elevation gradient follows from the arccos form
    of the bearing.
    """
    p_bs = np.asarray(p_bs, dtype=float)
    p_hris = np.asarray(p_hris, dtype=float)
    diff = p_hris - p_bs
    horiz_sq = diff[0] ** 2 + diff[1] ** 2
    horiz = np.sqrt(horiz_sq)
    dist_sq = float(diff @ diff)
    if horiz == 0.0 or dist_sq == 0.0:
        raise ValueError("bearing Jacobian undefined on the vertical axis")
    d_az = np.array([-diff[1] / horiz_sq, diff[0] / horiz_sq, 0.0])
    d_el = np.array(
        [
            diff[2] * diff[0] / (dist_sq * horiz),
            diff[2] * diff[1] / (dist_sq * horiz),
            -horiz / dist_sq,
        ]
    )
    return np.column_stack([d_az, d_el])


def hris_peb(
    fim_1: FimMatrix,
    fim_2: FimMatrix,
    p_bs1: np.ndarray,
    p_bs2: np.ndarray,
    p_hris: np.ndarray,
) -> BoundReport:
    """Position error bound from the two per-BS bearing FIMs.

    Each BS contributes ``J_i F_i J_i^T`` with its own Jacobian evaluated at
    the true geometry; the PEB is the root-trace of the inverse sum.  A
    singular sum (collinear geometry) reports an infinite bound.
    """
    j1 = bearing_jacobian(p_bs1, p_hris)
    j2 = bearing_jacobian(p_bs2, p_hris)
    fp = j1 @ fim_1.values @ j1.T + j2 @ fim_2.values @ j2.T
    vals = np.linalg.eigvalsh(0.5 * (fp + fp.T))
    vmax = vals.max(initial=0.0)
    if vals.min() <= 1e-12 * max(vmax, 1e-300):
        return BoundReport(
            labels=("position",),
            bounds=np.array([np.inf]),
            condition_number=np.inf,
            pseudo_inverse_used=True,
        )
    peb = float(np.sqrt(np.trace(np.linalg.inv(fp))))
    return BoundReport(
        labels=("position",),
        bounds=np.array([peb]),
        condition_number=float(vmax / vals.min()),
    )
