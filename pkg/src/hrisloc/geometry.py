"""Array geometries and steering-vector / path-delay math.

Conventions used throughout the package:

* The HRIS is a uniform planar array in the xoz plane with elements indexed
  by ``(m, n)``, ``m in [-m_x, m_x]`` along x and ``n in [-n_z, n_z]`` along z.
* The global vectorization order is column-major over the ``(m, n)`` grid:
  flat index ``u = (m + m_x) + (n + n_z) * (2 m_x + 1)``.
* Elevation and azimuth angles live in the open interval ``(0, pi)`` and are
  stored in radians.  Degrees appear only at configuration boundaries.
* A bearing ``(elevation, azimuth)`` maps to the unit vector
  ``[sin(el) cos(az), sin(el) sin(az), cos(el)]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "HrisGeometry",
    "BsGeometry",
    "NearFieldSource",
    "SphericalBearing",
    "fresnel_coefficients",
    "fresnel_coefficients_angles",
    "path_delta_exact",
    "path_delta_fresnel",
    "exact_path_delta",
    "fresnel_path_delta",
    "fresnel_phase_residual_bound",
    "nf_steering_entry",
    "nf_steering",
    "steering_matrix",
    "bs_steering",
    "hris_ff_steering",
    "virtual_steering",
    "bearing_unit_vector",
    "bearing_from_positions",
]


def _check_open_angle(value: float, name: str) -> None:
    if not 0.0 < value < np.pi:
        raise ValueError(f"{name} must lie in the open interval (0, pi), got {value}")


@dataclass(frozen=True)
class HrisGeometry:
    """Uniform planar HRIS array in the xoz plane.

    Parameters
    ----------
    m_x, n_z : int
        Number of elements on the positive x / z half-axes.  The full grid
        has ``(2 m_x + 1) * (2 n_z + 1)`` elements.
    spacing : float
        Element spacing in meters (quarter wavelength in all replication
        scenarios).
    wavelength : float
        Carrier wavelength in meters.
    """

    m_x: int
    n_z: int
    spacing: float
    wavelength: float

    def __post_init__(self) -> None:
        if self.m_x < 0 or self.n_z < 0:
            raise ValueError("m_x and n_z must be nonnegative")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def num_x(self) -> int:
        return 2 * self.m_x + 1

    @property
    def num_z(self) -> int:
        return 2 * self.n_z + 1

    @property
    def size(self) -> int:
        return self.num_x * self.num_z

    @property
    def aperture(self) -> float:
        """Corner-to-corner aperture diameter in meters."""
        return 2.0 * self.spacing * np.hypot(self.m_x, self.n_z)

    @property
    def rayleigh_distance(self) -> float:
        """Far-field boundary ``2 D^2 / lambda`` of the full aperture."""
        return 2.0 * self.aperture**2 / self.wavelength

    @property
    def reactive_limit(self) -> float:
        """Reactive near-field limit ``0.62 sqrt(D^3 / lambda)``."""
        return 0.62 * np.sqrt(self.aperture**3 / self.wavelength)

    @cached_property
    def m_indices(self) -> np.ndarray:
        return np.arange(-self.m_x, self.m_x + 1)

    @cached_property
    def n_indices(self) -> np.ndarray:
        return np.arange(-self.n_z, self.n_z + 1)

    @cached_property
    def flat_m(self) -> np.ndarray:
        """x-index of each element in global vectorization order."""
        return np.tile(self.m_indices, self.num_z)

    @cached_property
    def flat_n(self) -> np.ndarray:
        """z-index of each element in global vectorization order."""
        return np.repeat(self.n_indices, self.num_x)

    def element_index(self, m: int, n: int) -> int:
        """Flat index of element ``(m, n)`` in global vectorization order."""
        if abs(m) > self.m_x or abs(n) > self.n_z:
            raise ValueError(f"element ({m}, {n}) outside the array")
        return (m + self.m_x) + (n + self.n_z) * self.num_x

    @property
    def center_index(self) -> int:
        return self.element_index(0, 0)


@dataclass(frozen=True)
class BsGeometry:
    """Cross-shaped BS array: two centered ULAs sharing the origin element.

    ``n_x`` elements lie on the x-axis and ``n_z`` on the z-axis; ``position``
    is the array center in global coordinates (meters).
    """

    n_x: int
    n_z: int
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if self.n_x < 1 or self.n_z < 1:
            raise ValueError("arm element counts must be positive")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")


@dataclass(frozen=True)
class NearFieldSource:
    """Near-field target described relative to the HRIS center.

    ``elevation`` and ``azimuth`` are in radians within ``(0, pi)``;
    ``range_m`` is the distance to the HRIS center in meters; ``power`` is the
    linear source signal power.
    """

    elevation: float
    azimuth: float
    range_m: float
    power: float = 1.0

    def __post_init__(self) -> None:
        _check_open_angle(self.elevation, "elevation")
        _check_open_angle(self.azimuth, "azimuth")
        if self.range_m <= 0:
            raise ValueError("range must be positive")
        if self.power <= 0:
            raise ValueError("power must be positive")

    def validate_region(self, geom: HrisGeometry) -> None:
        """Warn when the source leaves the radiated near-field of ``geom``."""
        if self.range_m <= geom.reactive_limit:
            warnings.warn(
                f"source range {self.range_m:.4g} m inside the reactive limit "
                f"{geom.reactive_limit:.4g} m",
                stacklevel=2,
            )
        if self.range_m >= geom.rayleigh_distance:
            warnings.warn(
                f"source range {self.range_m:.4g} m beyond the Rayleigh distance "
                f"{geom.rayleigh_distance:.4g} m",
                stacklevel=2,
            )

    def unit_vector(self) -> np.ndarray:
        return bearing_unit_vector(SphericalBearing(self.elevation, self.azimuth))

    def position(self, origin: np.ndarray | None = None) -> np.ndarray:
        """Cartesian position relative to ``origin`` (HRIS center by default)."""
        p = self.range_m * self.unit_vector()
        return p if origin is None else np.asarray(origin, dtype=float) + p


@dataclass(frozen=True)
class SphericalBearing:
    """Elevation/azimuth direction pair, both in ``(0, pi)`` radians."""

    elevation: float
    azimuth: float

    def __post_init__(self) -> None:
        _check_open_angle(self.elevation, "elevation")
        _check_open_angle(self.azimuth, "azimuth")

    def reciprocal(self) -> "SphericalBearing":
        """Bearing seen from the other end of the link: ``(pi - el, pi - az)``."""
        return SphericalBearing(np.pi - self.elevation, np.pi - self.azimuth)


def bearing_unit_vector(bearing: SphericalBearing) -> np.ndarray:
    el, az = bearing.elevation, bearing.azimuth
    return np.array(
        [np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)]
    )


def bearing_from_positions(p_from: np.ndarray, p_to: np.ndarray) -> SphericalBearing:
    """Bearing of ``p_to`` as seen from ``p_from``.

    Azimuth is ``atan2(dy, dx)`` and elevation ``arccos(dz / r)``, matching
    the unit-vector convention of :func:`bearing_unit_vector`.
    """
    diff = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    r = np.linalg.norm(diff)
    if r == 0:
        raise ValueError("coincident positions have no bearing")
    elevation = np.arccos(np.clip(diff[2] / r, -1.0, 1.0))
    azimuth = np.arctan2(diff[1], diff[0])
    return SphericalBearing(float(elevation), float(azimuth))


def fresnel_coefficients_angles(
    elevation: float, azimuth: float, range_m: float, spacing: float
) -> tuple[float, float, float, float, float]:
    """Second-order path-delay expansion coefficients ``(g_x, g_z, q_x, q_z, c_xz)``.

    The approximate delay is
    ``g_x m + g_z n + q_x m^2 + q_z n^2 + c_xz m n`` with

    * ``g_x = -d sin(el) cos(az)``
    * ``g_z = -d cos(el)``
    * ``q_x = d^2 (1 - sin^2(el) cos^2(az)) / (2 r)``
    * ``q_z = d^2 sin^2(el) / (2 r)``
    * ``c_xz = -d^2 cos(az) sin(2 el) / (2 r)``
    """
    d, el, az, r = spacing, elevation, azimuth, range_m
    sin_el, cos_el = np.sin(el), np.cos(el)
    cos_az = np.cos(az)
    g_x = -d * sin_el * cos_az
    g_z = -d * cos_el
    q_x = d**2 * (1.0 - sin_el**2 * cos_az**2) / (2.0 * r)
    q_z = d**2 * sin_el**2 / (2.0 * r)
    c_xz = -(d**2) * cos_az * np.sin(2.0 * el) / (2.0 * r)
    return g_x, g_z, q_x, q_z, c_xz


def fresnel_coefficients(
    src: NearFieldSource, spacing: float
) -> tuple[float, float, float, float, float]:
    """Fresnel coefficients of ``src``; see :func:`fresnel_coefficients_angles`."""
    return fresnel_coefficients_angles(src.elevation, src.azimuth, src.range_m, spacing)


def path_delta_exact(elevation: float, azimuth: float, range_m: float, spacing: float, m, n):
    """Exact path difference ``r_{m,n} - r_{0,0}`` for raw angle/range values."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    r = range_m
    omega = m * np.sin(elevation) * np.cos(azimuth) + n * np.cos(elevation)
    r_mn = np.sqrt(r**2 - 2.0 * spacing * r * omega + (m**2 + n**2) * spacing**2)
    return r_mn - r


def path_delta_fresnel(elevation: float, azimuth: float, range_m: float, spacing: float, m, n):
    """Fresnel path difference for raw angle/range values."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    g_x, g_z, q_x, q_z, c_xz = fresnel_coefficients_angles(elevation, azimuth, range_m, spacing)
    return g_x * m + g_z * n + q_x * m**2 + q_z * n**2 + c_xz * m * n


def exact_path_delta(geom: HrisGeometry, src: NearFieldSource, m, n):
    """Exact spherical-wave path difference ``r_{m,n} - r_{0,0}`` in meters.

    ``m`` and ``n`` may be scalars or broadcastable arrays.
    """
    return path_delta_exact(src.elevation, src.azimuth, src.range_m, geom.spacing, m, n)


def fresnel_path_delta(geom: HrisGeometry, src: NearFieldSource, m, n):
    """Fresnel (second-order) approximation of :func:`exact_path_delta`."""
    return path_delta_fresnel(src.elevation, src.azimuth, src.range_m, geom.spacing, m, n)


def fresnel_phase_residual_bound(geom: HrisGeometry, range_m: float) -> float:
    """Analytic bound (radians) on the centrally-symmetric Fresnel phase residual.

    Bounds ``(2 pi / lambda) |[dr(m,n) - dr(-m,-n)] - 2 (g_x m + g_z n)|`` over
    all elements.  The bound combines the explicit third-order expansion term
    ``d^3 w rho^2 / (2 r^2)`` (with ``|w| <= rho``, the only odd term surviving
    the central-symmetric difference at this order) and the Lagrange remainder
    of the square-root expansion.
    """
    d, lam, r = geom.spacing, geom.wavelength, range_m
    rho = np.hypot(geom.m_x, geom.n_z)
    third_order = d**3 * rho**3 / r**2
    eps = 2.0 * d * rho / r + (d * rho / r) ** 2
    if eps >= 1.0:
        raise ValueError("geometry outside the Fresnel expansion radius")
    remainder = 2.0 * r * eps**3 / 16.0 / (1.0 - eps) ** 2.5
    return 2.0 * np.pi / lam * (third_order + remainder)


def nf_steering_entry(
    geom: HrisGeometry, src: NearFieldSource, m, n, model: str = "exact"
):
    """Unit-modulus steering entry ``exp(j 2 pi / lambda * dr_{m,n})``."""
    if model == "exact":
        delta = exact_path_delta(geom, src, m, n)
    elif model == "fresnel":
        delta = fresnel_path_delta(geom, src, m, n)
    else:
        raise ValueError(f"unknown propagation model {model!r}")
    return np.exp(2j * np.pi / geom.wavelength * delta)


def nf_steering(geom: HrisGeometry, src: NearFieldSource, model: str = "exact") -> np.ndarray:
    """Full steering vector of length ``M`` in global vectorization order."""
    return nf_steering_entry(geom, src, geom.flat_m, geom.flat_n, model=model)


def steering_matrix(
    geom: HrisGeometry, sources: list[NearFieldSource], model: str = "exact"
) -> np.ndarray:
    """Stack steering vectors of ``sources`` into an ``M x K`` matrix."""
    if not sources:
        raise ValueError("at least one source required")
    return np.column_stack([nf_steering(geom, s, model=model) for s in sources])


def bs_steering(geom: BsGeometry, bearing: SphericalBearing, axis: str) -> np.ndarray:
    """Steering vector of one BS arm toward ``bearing``.

    Entries are ``exp(j ((N-1)/2 - i) * ph)`` for ``i = 0..N-1`` with
    ``ph = sin(el) cos(az)`` on the x arm and ``ph = cos(el)`` on the z arm;
    the index set is symmetric about the shared center element.
    """
    if axis == "x":
        n_elems = geom.n_x
        ph = np.sin(bearing.elevation) * np.cos(bearing.azimuth)
    elif axis == "z":
        n_elems = geom.n_z
        ph = np.cos(bearing.elevation)
    else:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    offsets = (n_elems - 1) / 2.0 - np.arange(n_elems)
    return np.exp(1j * offsets * ph)


def hris_ff_steering(geom: HrisGeometry, bearing: SphericalBearing) -> np.ndarray:
    """Far-field HRIS steering toward ``bearing``, in global vectorization order.

    Equals the Kronecker product of the z-axis and x-axis linear factors whose
    element-``(m, n)`` entry is ``exp(-j (m sin(el) cos(az) + n cos(el)))``.
    """
    ax = np.sin(bearing.elevation) * np.cos(bearing.azimuth)
    az = np.cos(bearing.elevation)
    return np.exp(-1j * (geom.flat_m * ax + geom.flat_n * az))


def virtual_steering(omega, half_len: int, slope: float) -> np.ndarray:
    """Steering of the symmetric virtual ULA ``p = -half_len..half_len``.

    Entries are ``exp(j * slope * p * omega)``; ``omega`` may be an array, in
    which case the result has shape ``(2 half_len + 1, len(omega))``.
    """
    p = np.arange(-half_len, half_len + 1)
    omega = np.asarray(omega, dtype=float)
    return np.exp(1j * slope * np.outer(p, omega).squeeze())
