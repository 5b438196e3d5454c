"""Scenario configuration: dataclasses plus the YAML boundary.

Angles are degrees and distances meters inside configuration files; they are
converted to radians on load and never appear in degrees past this module.
BS placement uses bearing triples ``(elevation, azimuth, distance)``: the BS
is positioned so that the HRIS lies at that bearing and distance from it,
which keeps all bearing angles inside the ``(0, pi)`` domain of the array
model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .geometry import (
    BsGeometry,
    HrisGeometry,
    NearFieldSource,
    SphericalBearing,
    bearing_unit_vector,
)
from .synthesis import ChannelSpec, SourceSignalModel

__all__ = [
    "ConfigError",
    "SolverBudget",
    "RangeScanSpec",
    "BsPlacement",
    "PipelineOptions",
    "RunOptions",
    "SweepSpec",
    "ScenarioConfig",
    "load_scenario",
]

DEG = np.pi / 180.0


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario files."""


@dataclass(frozen=True)
class SolverBudget:
    max_iterations: int
    tolerance: float
    rho_scale: float = 1.0


@dataclass(frozen=True)
class RangeScanSpec:
    r_min_m: float
    r_max_m: float
    points: int = 512


@dataclass(frozen=True)
class BsPlacement:
    """One BS: arm sizes plus the bearing triple locating the HRIS from it."""

    n_x: int
    n_z: int
    bearing_elevation: float
    bearing_azimuth: float
    distance_m: float

    def geometry(self, hris_position: np.ndarray) -> BsGeometry:
        bearing = SphericalBearing(self.bearing_elevation, self.bearing_azimuth)
        position = hris_position - self.distance_m * bearing_unit_vector(bearing)
        return BsGeometry(n_x=self.n_x, n_z=self.n_z, position=position)

    def bearing(self) -> SphericalBearing:
        return SphericalBearing(self.bearing_elevation, self.bearing_azimuth)


@dataclass(frozen=True)
class PipelineOptions:
    enable_tls: bool = True
    enable_phase_opt: bool = False
    oracle_channel: bool = False
    refine_2d: bool = True
    range_scan: RangeScanSpec | None = None
    danm: SolverBudget = field(
        default_factory=lambda: SolverBudget(max_iterations=4000, tolerance=1e-7)
    )
    bs_anm: SolverBudget = field(
        default_factory=lambda: SolverBudget(max_iterations=400, tolerance=1e-4)
    )
    randomizations: int = 200
    music_grid: int = 2048


@dataclass(frozen=True)
class RunOptions:
    num_slots: int = 500
    num_lags: int | None = None  # None: one quarter of the slots
    trials: int = 200
    seed: int = 0
    failure_threshold: float = 0.1

    def lags_for(self, num_slots: int) -> int:
        return self.num_lags if self.num_lags is not None else max(1, num_slots // 4)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str = "none"  # none | snr | snapshots
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.parameter not in {"none", "snr", "snapshots"}:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}")
        if self.parameter != "none" and not self.values:
            raise ConfigError("sweep values must be non-empty")

    def points(self) -> tuple[float, ...]:
        return self.values if self.parameter != "none" else (float("nan"),)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    geometry: HrisGeometry
    sources: tuple[NearFieldSource, ...]
    channel: ChannelSpec
    snr_db: float | None
    signal: SourceSignalModel
    bs: tuple[BsPlacement, ...]
    run: RunOptions
    pipeline: PipelineOptions
    sweep: SweepSpec
    hris_position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def noise_variance_for(self, snr_db: float | None) -> float:
        """Noise variance per element from the configured SNR target.

        The target is the conventional per-element signal-to-noise ratio of
        the sensed snapshots, ``delta * sum(power) / sigma^2``.
        """
        if snr_db is None:
            return self.channel.noise_variance
        total = self.channel.delta * sum(s.power * self.signal.power for s in self.sources)
        return total / 10.0 ** (snr_db / 10.0)

    def bs_geometries(self) -> list[BsGeometry]:
        return [p.geometry(self.hris_position) for p in self.bs]


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing key {key!r} in {context}")
    return mapping[key]


def _parse_source(entry: dict) -> NearFieldSource:
    try:
        return NearFieldSource(
            elevation=float(_require(entry, "elevation_deg", "source")) * DEG,
            azimuth=float(_require(entry, "azimuth_deg", "source")) * DEG,
            range_m=float(_require(entry, "range_m", "source")),
            power=float(entry.get("power", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid source entry: {exc}") from exc


def _parse_budget(entry: dict | None, default: SolverBudget) -> SolverBudget:
    if entry is None:
        return default
    return SolverBudget(
        max_iterations=int(entry.get("max_iterations", default.max_iterations)),
        tolerance=float(entry.get("tolerance", default.tolerance)),
        rho_scale=float(entry.get("rho_scale", default.rho_scale)),
    )


def scenario_from_dict(data: dict, name: str = "scenario") -> ScenarioConfig:
    """Build and validate a :class:`ScenarioConfig` from parsed YAML."""
    if not isinstance(data, dict):
        raise ConfigError("scenario file must contain a mapping")
    geo = _require(data, "geometry", "scenario")
    wavelength = float(_require(geo, "wavelength_m", "geometry"))
    if "spacing_m" in geo:
        spacing = float(geo["spacing_m"])
    else:
        spacing = float(geo.get("spacing_wavelengths", 0.25)) * wavelength
    try:
        geometry = HrisGeometry(
            m_x=int(_require(geo, "m_x", "geometry")),
            n_z=int(_require(geo, "n_z", "geometry")),
            spacing=spacing,
            wavelength=wavelength,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid geometry: {exc}") from exc

    raw_sources = _require(data, "sources", "scenario")
    if not raw_sources:
        raise ConfigError("at least one source is required")
    sources = tuple(_parse_source(s) for s in raw_sources)
    for src in sources:
        src.validate_region(geometry)

    ch = data.get("channel", {})
    snr_db = ch.get("snr_db")
    try:
        channel = ChannelSpec(
            gamma_x=complex(ch.get("gamma_x", 1.0)),
            gamma_z=complex(ch.get("gamma_z", 1.0)),
            delta=float(ch.get("delta", 0.5)),
            noise_variance=float(ch.get("noise_variance", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid channel: {exc}") from exc

    sig = data.get("signal", {})
    try:
        signal = SourceSignalModel(
            kind=sig.get("kind", "tone"),
            power=float(sig.get("power", 1.0)),
            seed=int(sig.get("seed", 0)),
            offset_spacing=float(sig.get("offset_spacing", 0.08)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid signal model: {exc}") from exc

    bs_entries = data.get("bs", []) or []
    placements = []
    for entry in bs_entries:
        try:
            placements.append(
                BsPlacement(
                    n_x=int(_require(entry, "n_x", "bs")),
                    n_z=int(_require(entry, "n_z", "bs")),
                    bearing_elevation=float(_require(entry, "bearing_elevation_deg", "bs")) * DEG,
                    bearing_azimuth=float(_require(entry, "bearing_azimuth_deg", "bs")) * DEG,
                    distance_m=float(_require(entry, "distance_m", "bs")),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"invalid BS entry: {exc}") from exc
    if placements and len(placements) != 2:
        raise ConfigError("stage-2 scenarios require exactly two BS entries")

    run_entry = data.get("run", {})
    run = RunOptions(
        num_slots=int(run_entry.get("num_slots", 500)),
        num_lags=(int(run_entry["num_lags"]) if "num_lags" in run_entry else None),
        trials=int(run_entry.get("trials", 200)),
        seed=int(run_entry.get("seed", 0)),
        failure_threshold=float(run_entry.get("failure_threshold", 0.1)),
    )
    if run.num_slots < 2:
        raise ConfigError("need at least two slots")
    if run.trials < 1:
        raise ConfigError("need at least one trial")
    if run.lags_for(run.num_slots) > run.num_slots - 1:
        raise ConfigError("lag count must stay below the slot count")

    pipe = data.get("pipeline", {})
    scan_entry = pipe.get("range_scan")
    scan = None
    if scan_entry is not None:
        scan = RangeScanSpec(
            r_min_m=float(_require(scan_entry, "r_min_m", "range_scan")),
            r_max_m=float(_require(scan_entry, "r_max_m", "range_scan")),
            points=int(scan_entry.get("points", 512)),
        )
        if not 0 < scan.r_min_m < scan.r_max_m:
            raise ConfigError("range scan needs 0 < r_min < r_max")
    options = PipelineOptions(
        enable_tls=bool(pipe.get("enable_tls", True)),
        enable_phase_opt=bool(pipe.get("enable_phase_opt", False)),
        oracle_channel=bool(pipe.get("oracle_channel", False)),
        refine_2d=bool(pipe.get("refine_2d", True)),
        range_scan=scan,
        danm=_parse_budget(pipe.get("danm"), PipelineOptions().danm),
        bs_anm=_parse_budget(pipe.get("bs_anm"), PipelineOptions().bs_anm),
        randomizations=int(pipe.get("randomizations", 200)),
        music_grid=int(pipe.get("music_grid", 2048)),
    )
    if options.enable_phase_opt and not placements:
        raise ConfigError("phase optimization requires BS entries")

    sweep_entry = data.get("sweep", {})
    sweep = SweepSpec(
        parameter=sweep_entry.get("parameter", "none"),
        values=tuple(float(v) for v in sweep_entry.get("values", ())),
    )
    if sweep.parameter == "snr" and snr_db is None:
        snr_db = sweep.values[0]

    position = np.asarray(data.get("hris_position_m", [0.0, 0.0, 0.0]), dtype=float)
    if position.shape != (3,):
        raise ConfigError("hris_position_m must be a 3-vector")

    return ScenarioConfig(
        name=str(data.get("name", name)),
        geometry=geometry,
        sources=sources,
        channel=channel,
        snr_db=(float(snr_db) if snr_db is not None else None),
        signal=signal,
        bs=tuple(placements),
        run=run,
        pipeline=options,
        sweep=sweep,
        hris_position=position,
    )


def apply_full_scale(data: dict) -> dict:
    """Merge the optional ``full_scale`` override section into a raw config."""
    overrides = data.get("full_scale")
    if not overrides:
        return data
    merged = dict(data)
    merged.pop("full_scale")
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            sub = dict(merged[key])
            sub.update(value)
            merged[key] = sub
        else:
            merged[key] = value
    return merged


def load_scenario(path, full_scale: bool = False) -> ScenarioConfig:
    """Load, optionally up-scale, and validate a scenario YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if full_scale:
        data = apply_full_scale(data)
    else:
        data = dict(data)
        data.pop("full_scale", None)
    return scenario_from_dict(data, name=str(path))


def scenario_at(config: ScenarioConfig, sweep_value: float) -> ScenarioConfig:
    """Specialize a scenario to one sweep point."""
    if config.sweep.parameter == "snr":
        return replace(config, snr_db=float(sweep_value))
    if config.sweep.parameter == "snapshots":
        run = replace(config.run, num_slots=int(sweep_value))
        return replace(config, run=run)
    return config
