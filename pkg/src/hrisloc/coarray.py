"""Delay-based cross-correlation of centrally symmetric HRIS elements.

Correlating element ``(m, n)`` at time ``t + tau`` against element
``(-m, -n)`` at time ``t`` cancels the quadratic (range-dependent) phase
terms of the spherical wavefront, leaving a plane-wave-like model whose phase
slope is doubled.  Collecting the correlation vectors over a set of lags
yields pseudo snapshots of this virtual far-field array; their covariance
expands the virtual aperture once more.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import HrisGeometry
from .synthesis import HrisSnapshotBlock

__all__ = [
    "LagSet",
    "PseudoSnapshotMatrix",
    "CoarrayVector",
    "DifferenceCoarray",
    "cross_correlate_pair",
    "assemble_h_tau",
    "build_pseudo_snapshots",
    "coarray_covariance",
    "average_difference_coarray",
]


@dataclass(frozen=True)
class LagSet:
    """Strictly increasing nonnegative sample delays used as pseudo snapshots."""

    lags: tuple[int, ...]

    def __post_init__(self) -> None:
        lags = tuple(int(t) for t in self.lags)
        if not lags:
            raise ValueError("need at least one lag")
        if any(t < 0 for t in lags):
            raise ValueError("lags must be nonnegative")
        if any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be strictly increasing")
        object.__setattr__(self, "lags", lags)

    @classmethod
    def consecutive(cls, count: int) -> "LagSet":
        return cls(tuple(range(count)))

    @property
    def count(self) -> int:
        return len(self.lags)

    def validate_for(self, num_slots: int) -> None:
        if self.lags[-1] >= num_slots:
            raise ValueError(
                f"max lag {self.lags[-1]} must be below the slot count {num_slots}"
            )


@dataclass(frozen=True)
class PseudoSnapshotMatrix:
    """Pseudo snapshots ``h(tau)`` as columns, shape ``(M, L)``."""

    geom: HrisGeometry
    values: np.ndarray
    lags: LagSet

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.geom.size, self.lags.count):
            raise ValueError("values must have shape (M, L)")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CoarrayVector:
    """Vectorized covariance of the pseudo snapshots, length ``M^2``."""

    geom: HrisGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.geom.size**2,):
            raise ValueError("values must have length M^2")
        object.__setattr__(self, "values", values)

    @cached_property
    def matrix(self) -> np.ndarray:
        """``M x M`` reshape (Hermitian up to estimation noise)."""
        m = self.geom.size
        return self.values.reshape(m, m, order="F")


@dataclass(frozen=True)
class DifferenceCoarray:
    """Redundancy-averaged two-level difference co-array.

    ``values[p + 2 m_x, s + 2 n_z]`` holds the average of all covariance
    entries whose element pairs differ by ``(p, s)``; ``counts`` holds the
    class sizes and ``noise_scale`` a pooled estimate of the per-entry
    averaging noise standard deviation.
    """

    geom: HrisGeometry
    values: np.ndarray
    counts: np.ndarray
    noise_scale: float

    @property
    def half_x(self) -> int:
        return 2 * self.geom.m_x

    @property
    def half_z(self) -> int:
        return 2 * self.geom.n_z


def cross_correlate_pair(block: HrisSnapshotBlock, m: int, n: int, tau: int) -> complex:
    """Sample correlation of element ``(m, n)`` against ``(-m, -n)`` at lag ``tau``."""
    geom = block.geom
    if tau >= block.num_slots:
        raise ValueError(f"lag {tau} must be below the slot count {block.num_slots}")
    u = geom.element_index(m, n)
    v = geom.element_index(-m, -n)
    t_max = block.num_slots - tau
    fwd = block.vec[u, tau : tau + t_max]
    ref = block.vec[v, :t_max]
    return complex(np.mean(fwd * ref.conj()))


def assemble_h_tau(
    block: HrisSnapshotBlock, tau: int, noise_variance: float | None = None
) -> np.ndarray:
    """Pseudo snapshot ``h(tau)``: all centrally symmetric correlations at ``tau``.

    The center element correlates against itself, so at ``tau = 0`` it carries
    a receiver-noise power bias; when ``noise_variance`` is given that single
    entry is debiased.
    """
    if tau >= block.num_slots:
        raise ValueError(f"lag {tau} must be below the slot count {block.num_slots}")
    t_max = block.num_slots - tau
    fwd = block.vec[:, tau : tau + t_max]
    ref = block.vec[::-1, :t_max]
    h = np.mean(fwd * ref.conj(), axis=1)
    if tau == 0 and noise_variance is not None:
        h[block.geom.center_index] -= noise_variance
    return h


def build_pseudo_snapshots(
    block: HrisSnapshotBlock, lagset: LagSet, noise_variance: float | None = None
) -> PseudoSnapshotMatrix:
    """Collect ``h(tau)`` columns over the lag set into an ``M x L`` matrix."""
    lagset.validate_for(block.num_slots)
    cols = [assemble_h_tau(block, tau, noise_variance) for tau in lagset.lags]
    return PseudoSnapshotMatrix(
        geom=block.geom, values=np.column_stack(cols), lags=lagset
    )


def coarray_covariance(pseudo: PseudoSnapshotMatrix) -> CoarrayVector:
    """Vectorized pseudo-snapshot covariance ``vec(H H^H / L)``."""
    h = pseudo.values
    cov = h @ h.conj().T / pseudo.lags.count
    return CoarrayVector(geom=pseudo.geom, values=cov.flatten(order="F"))


def _difference_classes(geom: HrisGeometry) -> tuple[np.ndarray, int]:
    """Flat class index of every covariance entry by its 2-D element difference."""
    dm = geom.flat_m[:, None] - geom.flat_m[None, :]
    dn = geom.flat_n[:, None] - geom.flat_n[None, :]
    width_x = 4 * geom.m_x + 1
    width_z = 4 * geom.n_z + 1
    cls = (dm + 2 * geom.m_x) + (dn + 2 * geom.n_z) * width_x
    return cls.ravel(), width_x * width_z


def average_difference_coarray(coarray: CoarrayVector) -> DifferenceCoarray:
    """Average the co-array covariance over equal element-difference classes.

    The within-class scatter doubles as a self-calibrating estimate of the
    estimation noise carried by each averaged entry.
    """
    geom = coarray.geom
    cls, n_classes = _difference_classes(geom)
    flat = coarray.matrix.ravel()
    counts = np.bincount(cls, minlength=n_classes)
    sums = np.bincount(cls, weights=flat.real, minlength=n_classes) + 1j * np.bincount(
        cls, weights=flat.imag, minlength=n_classes
    )
    means = sums / counts
    dev = flat - means[cls]
    sq = np.bincount(cls, weights=np.abs(dev) ** 2, minlength=n_classes)
    dof = np.sum(counts - 1)
    pooled = np.sqrt(np.sum(sq) / dof) if dof > 0 else 0.0
    noise_scale = float(pooled / np.sqrt(np.median(counts)))
    width_x = 4 * geom.m_x + 1
    values = means.reshape(width_x, -1, order="F")
    counts_2d = counts.reshape(width_x, -1, order="F")
    return DifferenceCoarray(
        geom=geom, values=values, counts=counts_2d, noise_scale=noise_scale
    )
