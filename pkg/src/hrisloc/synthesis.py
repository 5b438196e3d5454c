"""Time-domain observation synthesis for the HRIS and the BS arms.

The HRIS senses a ``sqrt(delta)`` share of the impinging near-field signals;
the remaining ``sqrt(1 - delta)`` share is re-radiated toward each BS arm
through a rank-one spatial response weighted by the per-slot phase schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import (
    BsGeometry,
    HrisGeometry,
    NearFieldSource,
    SphericalBearing,
    bs_steering,
    hris_ff_steering,
    steering_matrix,
)

__all__ = [
    "SourceSignalModel",
    "ChannelSpec",
    "PhaseSchedule",
    "HrisSnapshotBlock",
    "BsSnapshotBlock",
    "draw_source_signals",
    "synthesize_hris_rx",
    "spatial_response",
    "synthesize_bs_rx",
    "random_phase_schedule",
]


@dataclass(frozen=True)
class SourceSignalModel:
    """Zero-mean source signal ensemble.

    ``kind="tone"`` (default) draws narrowband constant-envelope signals with
    uniformly random initial phases and deterministic per-source carrier
    offsets of ``offset_spacing`` cycles per slot.  The offsets keep the
    sample cross-correlations between sources near zero at every lag while
    the self-correlation stays at full magnitude, which is what the
    delay-domain pseudo-snapshot construction requires.  ``kind =
    "complex-gaussian"`` draws temporally white circular Gaussian samples;
    their self-correlation vanishes in expectation at all nonzero lags, so
    this kind is only useful for single-lag diagnostics.

    ``power`` is a common linear scale multiplying the per-source powers;
    ``seed`` makes generation deterministic when no generator is supplied.
    """

    kind: str = "tone"
    power: float = 1.0
    seed: int = 0
    offset_spacing: float = 0.04

    def __post_init__(self) -> None:
        if self.kind not in {"tone", "complex-gaussian"}:
            raise ValueError(f"unsupported signal kind {self.kind!r}")
        if self.power <= 0:
            raise ValueError("power must be positive")
        if not 0.0 < self.offset_spacing < 0.5:
            raise ValueError("offset_spacing must lie in (0, 0.5) cycles per slot")


@dataclass(frozen=True)
class ChannelSpec:
    """Power split, reflection path gains, and receiver noise variance."""

    gamma_x: complex = 1.0 + 0.0j
    gamma_z: complex = 1.0 + 0.0j
    delta: float = 0.5
    noise_variance: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie strictly between 0 and 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class PhaseSchedule:
    """Per-slot unit-modulus HRIS weight vectors, shape ``(T, M)``."""

    slots: np.ndarray

    def __post_init__(self) -> None:
        slots = np.asarray(self.slots, dtype=complex)
        if slots.ndim != 2:
            raise ValueError("slots must be a (T, M) array")
        if not np.allclose(np.abs(slots), 1.0, atol=1e-9):
            raise ValueError("schedule entries must have unit modulus")
        object.__setattr__(self, "slots", slots)

    @property
    def num_slots(self) -> int:
        return self.slots.shape[0]

    @property
    def num_elements(self) -> int:
        return self.slots.shape[1]


@dataclass(frozen=True)
class HrisSnapshotBlock:
    """HRIS observations: vectorized snapshots as columns of ``vec`` (M x T).

    ``source_signals`` keeps the realized source series (K x T) for oracle
    tests and bound evaluation; it is not used by the estimators.
    """

    geom: HrisGeometry
    vec: np.ndarray
    source_signals: np.ndarray | None = None

    def __post_init__(self) -> None:
        vec = np.asarray(self.vec, dtype=complex)
        if vec.ndim != 2 or vec.shape[0] != self.geom.size:
            raise ValueError("vec must have shape (M, T)")
        object.__setattr__(self, "vec", vec)

    @property
    def num_slots(self) -> int:
        return self.vec.shape[1]

    @cached_property
    def grids(self) -> np.ndarray:
        """Snapshots reshaped to the element grid, shape ``(num_x, num_z, T)``."""
        return self.vec.reshape(self.geom.num_x, self.geom.num_z, -1, order="F")


@dataclass(frozen=True)
class BsSnapshotBlock:
    """One BS's cross-array observations: ``x_arm`` (N_x x T), ``z_arm`` (N_z x T)."""

    x_arm: np.ndarray
    z_arm: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x_arm, dtype=complex)
        z = np.asarray(self.z_arm, dtype=complex)
        if x.ndim != 2 or z.ndim != 2 or x.shape[1] != z.shape[1]:
            raise ValueError("arms must be 2-D with equal slot counts")
        object.__setattr__(self, "x_arm", x)
        object.__setattr__(self, "z_arm", z)

    @property
    def num_slots(self) -> int:
        return self.x_arm.shape[1]


def _complex_gaussian(rng: np.random.Generator, shape, variance) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_source_signals(
    model: SourceSignalModel,
    sources: list[NearFieldSource],
    num_slots: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw mutually independent source series, shape ``(K, T)``."""
    if rng is None:
        rng = np.random.default_rng(model.seed)
    k = len(sources)
    powers = model.power * np.array([s.power for s in sources])
    if model.kind == "complex-gaussian":
        return _complex_gaussian(rng, (k, num_slots), powers[:, None])
    offsets = (np.arange(k) - (k - 1) / 2.0) * model.offset_spacing
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
    t = np.arange(num_slots)
    args = 2.0 * np.pi * offsets[:, None] * t[None, :] + phases[:, None]
    return np.sqrt(powers)[:, None] * np.exp(1j * args)


def synthesize_hris_rx(
    geom: HrisGeometry,
    sources: list[NearFieldSource],
    signal_model: SourceSignalModel,
    channel: ChannelSpec,
    num_slots: int,
    rng: np.random.Generator | None = None,
) -> HrisSnapshotBlock:
    """Generate the HRIS-side observation block over ``num_slots`` slots.

    Each snapshot is ``sqrt(delta) * A s(t) + noise`` with exact-model
    steering ``A`` and circular Gaussian noise of the configured variance per
    element.
    """
    if num_slots < 1:
        raise ValueError("need at least one slot")
    if not sources:
        raise ValueError("at least one source required")
    if rng is None:
        rng = np.random.default_rng(signal_model.seed)
    signals = draw_source_signals(signal_model, sources, num_slots, rng)
    a = steering_matrix(geom, sources, model="exact")
    clean = np.sqrt(channel.delta) * a @ signals
    noise = _complex_gaussian(rng, clean.shape, channel.noise_variance)
    return HrisSnapshotBlock(geom=geom, vec=clean + noise, source_signals=signals)


def spatial_response(
    bs: BsGeometry,
    hris_geom: HrisGeometry,
    bearing: SphericalBearing,
    gamma: complex,
    axis: str,
) -> np.ndarray:
    """Rank-one HRIS-to-BS response ``gamma * b_arm(bearing) b_R(recip)^H``."""
    b_arm = bs_steering(bs, bearing, axis)
    b_r = hris_ff_steering(hris_geom, bearing.reciprocal())
    return gamma * np.outer(b_arm, b_r.conj())


def synthesize_bs_rx(
    bs: BsGeometry,
    hris_geom: HrisGeometry,
    bearing: SphericalBearing,
    channel: ChannelSpec,
    schedule,
    hris_block: HrisSnapshotBlock,
    rng: np.random.Generator | None = None,
) -> BsSnapshotBlock:
    """Generate one BS's cross-array observations from the HRIS block.

    ``schedule`` is either a single :class:`PhaseSchedule` shared by both arms
    or an ``(x, z)`` pair.  Each arm sees
    ``sqrt(1 - delta) * H_arm * diag(w_t) * ybar(t) + noise``.
    """
    if isinstance(schedule, PhaseSchedule):
        sched_x = sched_z = schedule
    else:
        sched_x, sched_z = schedule
    for sched in (sched_x, sched_z):
        if sched.num_slots != hris_block.num_slots:
            raise ValueError("schedule slot count must match the HRIS block")
        if sched.num_elements != hris_geom.size:
            raise ValueError("schedule width must match the HRIS element count")
    if rng is None:
        rng = np.random.default_rng(0)
    scale = np.sqrt(1.0 - channel.delta)
    arms = {}
    for axis, gamma, sched in (
        ("x", channel.gamma_x, sched_x),
        ("z", channel.gamma_z, sched_z),
    ):
        h = spatial_response(bs, hris_geom, bearing, gamma, axis)
        reflected = sched.slots.T * hris_block.vec
        clean = scale * h @ reflected
        arms[axis] = clean + _complex_gaussian(rng, clean.shape, channel.noise_variance)
    return BsSnapshotBlock(x_arm=arms["x"], z_arm=arms["z"])


def random_phase_schedule(num_elements: int, num_slots: int, seed: int) -> PhaseSchedule:
    """I.i.d. uniform-phase schedule, deterministic given ``seed``."""
    if num_elements < 1 or num_slots < 1:
        raise ValueError("num_elements and num_slots must be positive")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(num_slots, num_elements))
    return PhaseSchedule(slots=np.exp(1j * phases))
