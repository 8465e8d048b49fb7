"""Quasi-probability distributions of work and heat for driven open qubits.

The package computes the quasi-characteristic generating function of
internal-energy change, dissipated heat, and work for a discretized
driven qubit coupled to a Kraus-modeled environment, together with the
exact delta-comb distributions those functions transform into.  Two
independent routes produce every result: a detector-based generating
function evolved step by step, and a direct sum over pairs of energy
eigenpath trajectories.  Both must agree; the driver enforces that.
"""

from ._backend import BACKEND, HAS_NUMBA
from .analysis import (
    EnergyAccount,
    NegativityReport,
    candidate_values,
    comb_average,
    energy_account,
    negativity_report,
    oracle_average_work,
    quasi_moment,
    recover_comb,
    stencil_chi_grid,
    tmp_distribution,
)
from .config import (
    RunInputs,
    ScenarioConfig,
    build_inputs,
    bundled_scenarios,
    load_bundled,
)
from .driver import ProtocolResult, ScenarioRun, SweepPoint, run_scenario, run_sweep
from .errors import (
    BadProbabilityError,
    ConfigError,
    ConvergenceError,
    DimensionMismatchError,
    EnumerationCapExceededError,
    GridTooCoarseError,
    IllConditionedError,
    InvariantViolationError,
    NonHermitianSampleError,
    NonRealWeightError,
    NormalizationError,
    NotHermitianError,
    QuasiworkError,
    WrongDimensionError,
    ZeroCoherenceError,
)
from .linalg import HermitianEig, expm_hermitian, hermitian_eig, tensor_product
from .model import (
    IDENTITY2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DetectorSpec,
    HamiltonianSchedule,
    KrausChannel,
    SystemState,
    amplitude_damping_channel,
    closed_channel,
    discretize_drive,
    require_valid_channel,
    validate_channel,
)
from .pathsum import (
    DeltaComb,
    PathPair,
    comb_model_qcgf,
    enumerate_path_pairs,
    pair_count_estimate,
    propagate_comb,
    qpdf_heat,
    qpdf_internal_energy,
    qpdf_work,
)
from .protocol import ProtocolKind, QcgfSamples, build_schedule, default_chi_grid, qcgf

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BadProbabilityError",
    "ConfigError",
    "ConvergenceError",
    "DeltaComb",
    "DetectorSpec",
    "DimensionMismatchError",
    "EnergyAccount",
    "EnumerationCapExceededError",
    "GridTooCoarseError",
    "HAS_NUMBA",
    "HamiltonianSchedule",
    "HermitianEig",
    "IDENTITY2",
    "IllConditionedError",
    "InvariantViolationError",
    "KrausChannel",
    "NegativityReport",
    "NonHermitianSampleError",
    "NonRealWeightError",
    "NormalizationError",
    "NotHermitianError",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "PathPair",
    "ProtocolKind",
    "ProtocolResult",
    "QcgfSamples",
    "QuasiworkError",
    "RunInputs",
    "ScenarioConfig",
    "ScenarioRun",
    "SweepPoint",
    "SystemState",
    "WrongDimensionError",
    "ZeroCoherenceError",
    "amplitude_damping_channel",
    "build_inputs",
    "build_schedule",
    "bundled_scenarios",
    "candidate_values",
    "closed_channel",
    "comb_average",
    "comb_model_qcgf",
    "default_chi_grid",
    "discretize_drive",
    "energy_account",
    "enumerate_path_pairs",
    "expm_hermitian",
    "hermitian_eig",
    "load_bundled",
    "negativity_report",
    "oracle_average_work",
    "pair_count_estimate",
    "propagate_comb",
    "qcgf",
    "qpdf_heat",
    "qpdf_internal_energy",
    "qpdf_work",
    "quasi_moment",
    "recover_comb",
    "require_valid_channel",
    "run_scenario",
    "run_sweep",
    "stencil_chi_grid",
    "tensor_product",
    "tmp_distribution",
    "validate_channel",
]
