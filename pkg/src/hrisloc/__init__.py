"""Near-field NLOS target localization via a position-unknown hybrid RIS.

Simulation, two-stage gridless estimation (virtual co-array + decoupled
atomic norm + bias correction, then bearing recovery + triangulation +
phase design), and theoretical CRB / PEB benchmarks.
"""

from .bench import RmseTable, compute_rmse, compute_snr, emit_outputs, run_scenario
from .bounds import BoundReport, FimMatrix, bearing_jacobian, bs_fim, hris_peb, target_crb, target_fim
from .coarray import (
    CoarrayVector,
    DifferenceCoarray,
    LagSet,
    PseudoSnapshotMatrix,
    assemble_h_tau,
    average_difference_coarray,
    build_pseudo_snapshots,
    coarray_covariance,
    cross_correlate_pair,
)
from .config import ConfigError, ScenarioConfig, load_scenario
from .danm import (
    AngleSpectrum,
    DanmBlocks,
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
from .geometry import (
    BsGeometry,
    HrisGeometry,
    NearFieldSource,
    SphericalBearing,
    bearing_from_positions,
    bearing_unit_vector,
    bs_steering,
    exact_path_delta,
    fresnel_coefficients,
    fresnel_path_delta,
    fresnel_phase_residual_bound,
    hris_ff_steering,
    nf_steering,
    nf_steering_entry,
    steering_matrix,
    virtual_steering,
)
from .locator import (
    BearingEstimate,
    BsAnmBlocks,
    CollinearGeometryError,
    HrisPositionEstimate,
    WeightedObservation,
    extract_bearing,
    reconstruct_hris_obs,
    reconstruct_source_series,
    reconstruct_weighted_obs,
    solve_bs_anm,
    triangulate,
)
from .phaseopt import (
    LiftedSolution,
    PhaseVector,
    QuadraticForm,
    build_quadratic,
    dominant_phase_vector,
    optimize_schedule,
    randomize_and_select,
    solve_relaxation,
)
from .pipeline import TrialResult, run_trial
from .sdp import (
    BlockSpec,
    Fidelity,
    PsdSolution,
    SolverSettings,
    StructuredPsdProblem,
    psd_project,
    solve_structured_psd,
)
from .synthesis import (
    BsSnapshotBlock,
    ChannelSpec,
    HrisSnapshotBlock,
    PhaseSchedule,
    SourceSignalModel,
    draw_source_signals,
    random_phase_schedule,
    spatial_response,
    synthesize_bs_rx,
    synthesize_hris_rx,
)
from .tls import (
    ConditioningError,
    DelayDesignMatrix,
    RefinedEstimate,
    build_design_matrix,
    refine,
)
from .toeplitz import (
    ToeplitzGenerator,
    TwoLevelToeplitzGenerator,
    project_toeplitz,
    project_toeplitz2,
    toeplitz_from_generator,
)
