"""Total-least-squares correction of the Fresnel-approximation bias.

The coarse stage-1 estimate is pushed back through the second-order delay
model to regenerate per-element delays, which are then fit against the exact
spherical delay relation.  The relation is linear in
``(r sin(el) cos(az), r cos(el), r, 1)``, so the null direction of an
``M x 4`` design matrix recovers the bias-corrected parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import HrisGeometry, path_delta_exact, path_delta_fresnel

__all__ = [
    "ConditioningError",
    "DelayDesignMatrix",
    "RefinedEstimate",
    "build_design_matrix",
    "refine",
]


class ConditioningError(ValueError):
    """Raised when the design matrix cannot support parameter recovery."""


@dataclass(frozen=True)
class DelayDesignMatrix:
    """Exact-relation design matrix built at a coarse estimate.

    Rows follow the global element order; the row for element ``(m, n)`` is
    ``[2 d m, 2 d n, 2 dr, dr^2 - (m^2 + n^2) d^2]`` with ``dr`` the
    regenerated delay.  The all-zero center row is retained to keep row
    indexing aligned with the element map.
    """

    matrix: np.ndarray
    coarse: tuple[float, float, float]
    geom: HrisGeometry


@dataclass(frozen=True)
class RefinedEstimate:
    """Bias-corrected per-source parameters plus conditioning diagnostics."""

    elevation: float
    azimuth: float
    range_m: float
    min_singular_value: float
    refined: bool = True
    reject_reason: str | None = None


def build_design_matrix(
    geom: HrisGeometry,
    coarse: tuple[float, float, float],
    delta_model: str = "fresnel",
) -> DelayDesignMatrix:
    """Regenerate delays at ``coarse = (elevation, azimuth, range)`` and stack rows.

    ``delta_model="exact"`` substitutes the exact spherical delays (used by
    the fixed-point and oracle paths).
    """
    el, az, r = coarse
    if r <= 0:
        raise ValueError("coarse range must be positive")
    if delta_model == "fresnel":
        deltas = path_delta_fresnel(el, az, r, geom.spacing, geom.flat_m, geom.flat_n)
    elif delta_model == "exact":
        deltas = path_delta_exact(el, az, r, geom.spacing, geom.flat_m, geom.flat_n)
    else:
        raise ValueError(f"unknown delta model {delta_model!r}")
    d = geom.spacing
    m = geom.flat_m.astype(float)
    n = geom.flat_n.astype(float)
    matrix = np.column_stack(
        [
            2.0 * d * m,
            2.0 * d * n,
            2.0 * deltas,
            deltas**2 - (m**2 + n**2) * d**2,
        ]
    )
    return DelayDesignMatrix(matrix=matrix, coarse=(el, az, r), geom=geom)


def refine(design: DelayDesignMatrix) -> RefinedEstimate:
    """Recover parameters from the least singular direction of the design matrix.

    The singular vector is sign-normalized so the recovered range is
    positive; estimates whose angle ratios leave the arccos domain are
    rejected and the coarse values returned with a flag.
    """
    p = design.matrix
    if p.shape[0] < 4:
        raise ConditioningError("need at least 4 rows to recover 4 parameters")
    _, svals, vt = np.linalg.svd(p, full_matrices=False)
    if np.sum(svals > 1e-12 * svals[0]) < 3:
        raise ConditioningError("design matrix numerical rank below 3")
    f = vt[-1]
    smin = float(svals[-1])
    if abs(f[3]) < 1e-12:
        raise ConditioningError("vanishing scale component: range unobservable")
    f = f * np.sign(f[3])

    el0, az0, r0 = design.coarse

    def rejected(reason: str) -> RefinedEstimate:
        return RefinedEstimate(
            elevation=el0,
            azimuth=az0,
            range_m=r0,
            min_singular_value=smin,
            refined=False,
            reject_reason=reason,
        )

    if f[2] <= 0:
        return rejected("nonpositive recovered range scale")
    cos_el = f[1] / f[2]
    if abs(cos_el) > 1.0:
        return rejected("elevation ratio outside arccos domain")
    elevation = float(np.arccos(cos_el))
    sin_el = np.sin(elevation)
    if sin_el == 0.0:
        return rejected("degenerate elevation: azimuth unobservable")
    cos_az = f[0] / (f[2] * sin_el)
    if abs(cos_az) > 1.0:
        return rejected("azimuth ratio outside arccos domain")
    azimuth = float(np.arccos(cos_az))
    range_m = float(f[2] / f[3])
    return RefinedEstimate(
        elevation=elevation,
        azimuth=azimuth,
        range_m=range_m,
        min_singular_value=smin,
    )
