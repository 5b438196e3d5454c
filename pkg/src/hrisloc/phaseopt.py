"""Per-slot HRIS phase design that maximizes the BS received power.

Lifting the unit-modulus quadratic maximization to a unit-diagonal PSD
program drops the rank constraint; Gaussian randomization rounds the lifted
solution back to a feasible phase vector.  The rank-one quadratic forms that
arise from the rank-one arm channels admit an exact closed form, which the
schedule optimizer uses as a fast path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sdp import PsdSolution, SolverSettings, StructuredPsdProblem, solve_structured_psd
from .synthesis import PhaseSchedule

__all__ = [
    "QuadraticForm",
    "LiftedSolution",
    "PhaseVector",
    "build_quadratic",
    "solve_relaxation",
    "randomize_and_select",
    "dominant_phase_vector",
    "optimize_schedule",
]


@dataclass(frozen=True)
class QuadraticForm:
    """Hermitian PSD power form ``w^H R w`` with provenance."""

    matrix: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("quadratic form must be square")
        r = 0.5 * (r + r.conj().T)
        vals = np.linalg.eigvalsh(r)
        if vals.min(initial=0.0) < -1e-10 * max(vals.max(initial=0.0), 1e-300):
            raise ValueError("quadratic form must be PSD")
        object.__setattr__(self, "matrix", r)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LiftedSolution:
    """Unit-diagonal PSD maximizer of ``tr(R W)`` and its objective."""

    matrix: np.ndarray
    objective: float
    solution: PsdSolution | None = field(default=None, repr=False)


@dataclass(frozen=True)
class PhaseVector:
    """Feasible unit-modulus weights and the power they achieve."""

    weights: np.ndarray
    power: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=complex)
        w = np.exp(1j * np.angle(w))
        object.__setattr__(self, "weights", w)


def build_quadratic(
    channel: np.ndarray, hris_snapshot: np.ndarray, delta: float, provenance: str = ""
) -> QuadraticForm:
    """Power form of one slot: ``C = sqrt(1 - delta) H diag(y)``, ``R = C^H C``."""
    c = np.sqrt(1.0 - delta) * np.asarray(channel, dtype=complex) * np.asarray(
        hris_snapshot, dtype=complex
    )[None, :]
    return QuadraticForm(matrix=c.conj().T @ c, provenance=provenance)


def solve_relaxation(
    quadratic: QuadraticForm, settings: SolverSettings | None = None
) -> LiftedSolution:
    """Solve the unit-diagonal PSD relaxation of the phase power problem."""
    problem = StructuredPsdProblem.phase_design(quadratic.matrix)
    solution = solve_structured_psd(problem, settings)
    return LiftedSolution(
        matrix=solution.matrix, objective=solution.objective, solution=solution
    )


def achieved_power(weights: np.ndarray, quadratic: QuadraticForm) -> float:
    return float(np.real(weights.conj() @ quadratic.matrix @ weights))


def randomize_and_select(
    lifted: LiftedSolution,
    quadratic: QuadraticForm,
    count: int,
    seed: int,
) -> PhaseVector:
    """Gaussian randomization rounding of the lifted solution.

    Draws ``count`` candidates ``U D^{1/2} n`` with standard complex Gaussian
    ``n``, projects each entry to unit modulus, and keeps the most powerful
    candidate.  Deterministic given ``seed``.
    """
    if count < 1:
        raise ValueError("need at least one randomization")
    vals, vecs = np.linalg.eigh(0.5 * (lifted.matrix + lifted.matrix.conj().T))
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    rng = np.random.default_rng(seed)
    m = lifted.matrix.shape[0]
    draws = (rng.standard_normal((m, count)) + 1j * rng.standard_normal((m, count))) / np.sqrt(2.0)
    candidates = np.exp(1j * np.angle(root @ draws))
    powers = np.real(np.einsum("ij,ik,kj->j", candidates.conj(), quadratic.matrix, candidates))
    best = int(np.argmax(powers))
    return PhaseVector(weights=candidates[:, best], power=float(powers[best]))


def dominant_phase_vector(quadratic: QuadraticForm) -> PhaseVector:
    """Exact phase alignment for a rank-one power form.

    For ``R = c u u^H`` any nonzero column of ``R`` is proportional to ``u``,
    so the principal direction comes without an eigendecomposition.  Global
    phase is immaterial; aligning with the phases of ``u`` maximizes
    ``|u^H w|``.
    """
    r = quadratic.matrix
    col = int(np.argmax(np.einsum("ij,ij->j", r.conj(), r).real))
    u = r[:, col]
    if np.linalg.norm(u) == 0.0:
        w = np.ones(quadratic.size, dtype=complex)
    else:
        w = np.exp(1j * np.angle(u))
    power = achieved_power(w, quadratic)
    return PhaseVector(weights=w, power=power)


def optimize_schedule(
    channel: np.ndarray,
    reconstructed: np.ndarray,
    delta: float,
    randomizations: int = 200,
    seed: int = 0,
    settings: SolverSettings | None = None,
    rank_tolerance: float = 1e-9,
) -> PhaseSchedule:
    """Per-slot phase design against ``channel`` and the reconstructed snapshots.

    Each slot's power form is rank one whenever the arm channel is, in which
    case the closed-form alignment is used; otherwise the slot runs the full
    relaxation plus randomization with a per-slot seeded stream.
    """
    reconstructed = np.asarray(reconstructed, dtype=complex)
    m, num_slots = reconstructed.shape
    rank_one = np.linalg.matrix_rank(np.asarray(channel), tol=None) == 1
    slots = np.empty((num_slots, m), dtype=complex)
    for t in range(num_slots):
        quad = build_quadratic(channel, reconstructed[:, t], delta, provenance=f"slot {t}")
        if rank_one:
            slots[t] = dominant_phase_vector(quad).weights
        else:
            lifted = solve_relaxation(quad, settings)
            slots[t] = randomize_and_select(lifted, quad, randomizations, seed + t).weights
    return PhaseSchedule(slots=slots)
