"""Monte Carlo execution, RMSE aggregation, and output emission.

A scenario run sweeps one axis (SNR or snapshot count), executes independent
seeded trials at each point, matches estimated sources to the truth by
angular distance, and aggregates per-parameter RMSEs alongside the
theoretical bounds.  Outputs are a fixed-schema CSV plus a plain-text plot
script that references it.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .bounds import bs_fim, hris_peb, target_crb, target_fim
from .config import ScenarioConfig, scenario_at
from .geometry import SphericalBearing, bearing_unit_vector
from .pipeline import TrialResult, run_trial, trial_seed
from .synthesis import HrisSnapshotBlock, random_phase_schedule, synthesize_hris_rx

__all__ = [
    "RmseTable",
    "CSV_COLUMNS",
    "compute_snr",
    "compute_rmse",
    "match_sources",
    "run_scenario",
    "emit_outputs",
]

CSV_COLUMNS = (
    "sweep_value",
    "n_trials",
    "n_failed",
    "rmse_elevation_coarse_deg",
    "rmse_azimuth_coarse_deg",
    "rmse_range_coarse_m",
    "rmse_elevation_refined_deg",
    "rmse_azimuth_refined_deg",
    "rmse_range_refined_m",
    "rmse_bearing_elevation_deg",
    "rmse_bearing_azimuth_deg",
    "rmse_hris_position_m",
    "rmse_target_position_m",
    "rmse_bearing_elevation_opt_deg",
    "rmse_bearing_azimuth_opt_deg",
    "rmse_hris_position_opt_m",
    "mean_bs_power",
    "mean_bs_power_opt",
    "crb_elevation_deg",
    "crb_azimuth_deg",
    "crb_range_m",
    "peb_m",
    "peb_opt_m",
)

RAD2DEG = 180.0 / np.pi


@dataclass
class RmseTable:
    """One row per sweep point, fixed column schema."""

    columns: tuple[str, ...] = CSV_COLUMNS
    rows: list[dict] = field(default_factory=list)

    def add_row(self, row: dict) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise ValueError(f"unknown columns {sorted(unknown)}")
        self.rows.append({col: row.get(col, math.nan) for col in self.columns})

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                value = row[col]
                if isinstance(value, (int, np.integer)):
                    cells.append(str(int(value)))
                else:
                    cells.append(format(float(value), ".17g"))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "RmseTable":
        lines = [ln for ln in text.strip().split("\n") if ln]
        columns = tuple(lines[0].split(","))
        table = cls(columns=columns)
        for line in lines[1:]:
            values = [float(cell) for cell in line.split(",")]
            table.rows.append(dict(zip(columns, values)))
        return table


def compute_snr(block: HrisSnapshotBlock, noise_variance: float) -> float:
    """Empirical per-element SNR (dB) of a snapshot block.

    Ratio of the total received energy to the noise energy ``sigma^2 M T``;
    an infinite value is reported for a noise-free configuration.
    """
    if block.vec.size == 0:
        raise ValueError("empty snapshot block")
    if noise_variance == 0.0:
        return math.inf
    total = float(np.sum(np.abs(block.vec) ** 2))
    return 10.0 * math.log10(total / (noise_variance * block.vec.size))


def match_sources(estimated: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Permutation aligning estimates to truth by great-circle distance.

    Rows are ``(elevation, azimuth, range)``; the assignment minimizes the
    summed angular separation of the direction vectors.
    """
    units_est = np.stack(
        [bearing_unit_vector(SphericalBearing(el, az)) for el, az, _ in estimated]
    )
    units_true = np.stack(
        [bearing_unit_vector(SphericalBearing(el, az)) for el, az, _ in truth]
    )
    cosine = np.clip(units_est @ units_true.T, -1.0, 1.0)
    cost = np.arccos(cosine)
    row, col = scipy.optimize.linear_sum_assignment(cost)
    return row[np.argsort(col)]


def compute_rmse(estimates: list[np.ndarray], truth: np.ndarray) -> dict:
    """Per-parameter RMSE over trials and sources after truth matching.

    ``estimates`` holds per-trial ``(K, 3)`` arrays; failed (``None``)
    entries are excluded and counted by the caller.
    """
    errors = []
    for est in estimates:
        if est is None:
            continue
        perm = match_sources(est, truth)
        errors.append(est[perm] - truth)
    if not errors:
        return {"elevation": math.nan, "azimuth": math.nan, "range": math.nan}
    stacked = np.concatenate(errors, axis=0)
    rms = np.sqrt(np.mean(stacked**2, axis=0))
    return {"elevation": float(rms[0]), "azimuth": float(rms[1]), "range": float(rms[2])}


def _bearing_rmse(results: list[TrialResult], config: ScenarioConfig, optimized: bool) -> dict:
    errs_el, errs_az, pos_err = [], [], []
    for res in results:
        side = res.optimized_side if optimized else res.random_side
        if res.failed or side is None:
            continue
        for placement, bearing in zip(config.bs, side.bearings):
            errs_el.append(bearing.elevation - placement.bearing_elevation)
            errs_az.append(bearing.azimuth - placement.bearing_azimuth)
        if side.position is not None:
            pos_err.append(np.linalg.norm(side.position - config.hris_position))
    out = {
        "elevation": math.nan,
        "azimuth": math.nan,
        "position": math.nan,
        "power": math.nan,
    }
    if errs_el:
        out["elevation"] = float(np.sqrt(np.mean(np.square(errs_el))))
        out["azimuth"] = float(np.sqrt(np.mean(np.square(errs_az))))
    if pos_err:
        out["position"] = float(np.sqrt(np.mean(np.square(pos_err))))
    powers = [
        (res.optimized_side if optimized else res.random_side).mean_power
        for res in results
        if not res.failed and (res.optimized_side if optimized else res.random_side)
    ]
    if powers:
        out["power"] = float(np.mean(powers))
    return out


def _target_position_rmse(results: list[TrialResult], config: ScenarioConfig) -> float:
    truth = np.stack(
        [src.position(config.hris_position) for src in config.sources]
    )
    params_truth = np.array(
        [[s.elevation, s.azimuth, s.range_m] for s in config.sources]
    )
    errors = []
    for res in results:
        if res.failed or res.target_positions is None:
            continue
        perm = match_sources(res.refined, params_truth)
        errors.append(np.linalg.norm(res.target_positions[perm] - truth, axis=1))
    if not errors:
        return math.nan
    return float(np.sqrt(np.mean(np.concatenate(errors) ** 2)))


def _bounds_row(config: ScenarioConfig, results: list[TrialResult]) -> dict:
    """Theoretical bound columns for one sweep point."""
    out = {}
    noise_var = config.noise_variance_for(config.snr_db)
    if noise_var <= 0:
        return out
    fim = target_fim(
        config.geometry, list(config.sources), config.channel.delta, noise_var,
        config.run.num_slots,
    )
    try:
        crb = target_crb(fim)
        k = len(config.sources)
        el = crb.bounds[0::3]
        az = crb.bounds[1::3]
        rr = crb.bounds[2::3]
        out["crb_elevation_deg"] = float(np.sqrt(np.mean(el**2)) * RAD2DEG)
        out["crb_azimuth_deg"] = float(np.sqrt(np.mean(az**2)) * RAD2DEG)
        out["crb_range_m"] = float(np.sqrt(np.mean(rr**2)))
    except np.linalg.LinAlgError:
        pass
    if not config.bs:
        return out
    # Reference block and schedules for the bearing FIM / PEB columns.
    seq = trial_seed(config.run.seed, 0, 1_000_003)
    rng = np.random.default_rng(seq)
    channel = replace(config.channel, noise_variance=noise_var)
    block = synthesize_hris_rx(
        config.geometry, list(config.sources), config.signal, channel,
        config.run.num_slots, rng=rng,
    )
    geometries = config.bs_geometries()

    def peb_for(results_side: str) -> float:
        fims = []
        for i, placement in enumerate(config.bs):
            if results_side == "random":
                sched_x = random_phase_schedule(config.geometry.size, config.run.num_slots, 7 + i)
                sched_z = random_phase_schedule(config.geometry.size, config.run.num_slots, 17 + i)
            else:
                side = next(
                    (
                        r.optimized_side
                        for r in results
                        if not r.failed and r.optimized_side is not None
                    ),
                    None,
                )
                if side is None:
                    return math.nan
                sched_x = side.schedules[(i, "x")]
                sched_z = side.schedules[(i, "z")]
            fims.append(
                bs_fim(
                    geometries[i], config.geometry, placement.bearing(),
                    config.channel.gamma_x, config.channel.gamma_z,
                    config.channel.delta, noise_var, sched_x, sched_z, block.vec,
                )
            )
        report = hris_peb(
            fims[0], fims[1], geometries[0].position, geometries[1].position,
            config.hris_position,
        )
        return float(report.bounds[0])

    out["peb_m"] = peb_for("random")
    if config.pipeline.enable_phase_opt:
        out["peb_opt_m"] = peb_for("optimized")
    return out


def _run_point(args):
    config, sweep_index, trial_index = args
    return trial_index, run_trial(config, sweep_index, trial_index)


def run_scenario(
    config: ScenarioConfig,
    workers: int = 1,
    progress=None,
) -> tuple[RmseTable, list[list[TrialResult]]]:
    """Execute the full sweep and aggregate RMSEs and bounds per point."""
    table = RmseTable()
    all_results: list[list[TrialResult]] = []
    params_truth = np.array(
        [[s.elevation, s.azimuth, s.range_m] for s in config.sources]
    )
    for sweep_index, value in enumerate(config.sweep.points()):
        point = scenario_at(config, value)
        jobs = [(point, sweep_index, t) for t in range(point.run.trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                indexed = list(pool.map(_run_point, jobs, chunksize=1))
            indexed.sort(key=lambda pair: pair[0])
            results = [res for _, res in indexed]
        else:
            results = []
            for job in jobs:
                results.append(_run_point(job)[1])
                if progress is not None:
                    progress(sweep_index, len(results))
        all_results.append(results)

        ok = [r for r in results if not r.failed]
        coarse = compute_rmse([r.coarse for r in ok], params_truth)
        refined = compute_rmse([r.refined for r in ok], params_truth)
        row = {
            "sweep_value": value,
            "n_trials": len(results),
            "n_failed": sum(r.failed for r in results),
            "rmse_elevation_coarse_deg": coarse["elevation"] * RAD2DEG,
            "rmse_azimuth_coarse_deg": coarse["azimuth"] * RAD2DEG,
            "rmse_range_coarse_m": coarse["range"],
            "rmse_elevation_refined_deg": refined["elevation"] * RAD2DEG,
            "rmse_azimuth_refined_deg": refined["azimuth"] * RAD2DEG,
            "rmse_range_refined_m": refined["range"],
        }
        if config.bs:
            rand = _bearing_rmse(results, point, optimized=False)
            row["rmse_bearing_elevation_deg"] = rand["elevation"] * RAD2DEG
            row["rmse_bearing_azimuth_deg"] = rand["azimuth"] * RAD2DEG
            row["rmse_hris_position_m"] = rand["position"]
            row["mean_bs_power"] = rand["power"]
            row["rmse_target_position_m"] = _target_position_rmse(results, point)
            if config.pipeline.enable_phase_opt:
                opt = _bearing_rmse(results, point, optimized=True)
                row["rmse_bearing_elevation_opt_deg"] = opt["elevation"] * RAD2DEG
                row["rmse_bearing_azimuth_opt_deg"] = opt["azimuth"] * RAD2DEG
                row["rmse_hris_position_opt_m"] = opt["position"]
                row["mean_bs_power_opt"] = opt["power"]
        row.update(_bounds_row(point, results))
        table.add_row(row)
    return table, all_results


PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Plot the RMSE table emitted next to this script.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "results.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["sweep_value"]) for r in rows]
fig, axes = plt.subplots(1, 3, figsize=(14, 4))
for ax, cols, title, unit in [
    (axes[0], ["rmse_elevation_coarse_deg", "rmse_elevation_refined_deg", "crb_elevation_deg"],
     "elevation", "deg"),
    (axes[1], ["rmse_azimuth_coarse_deg", "rmse_azimuth_refined_deg", "crb_azimuth_deg"],
     "azimuth", "deg"),
    (axes[2], ["rmse_range_coarse_m", "rmse_range_refined_m", "crb_range_m"],
     "range", "m"),
]:
    for col in cols:
        y = [float(r[col]) for r in rows]
        ax.semilogy(x, y, marker="o", label=col)
    ax.set_title(title)
    ax.set_xlabel("sweep value")
    ax.set_ylabel(unit)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("rmse_curves.png", dpi=150)
print("wrote rmse_curves.png")
"""


def emit_outputs(table: RmseTable, out_dir) -> tuple[str, str]:
    """Write the CSV and its companion plot script; returns the two paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    plot_path = os.path.join(out_dir, "plot_results.py")
    try:
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table.to_csv())
        with open(plot_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(PLOT_SCRIPT)
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out_dir!r}: {exc}") from exc
    return csv_path, plot_path
