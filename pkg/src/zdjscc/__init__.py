"""Zero-delay coding of Gauss-Markov sources over AWGN channels with feedback.

The library answers three questions about a vector source driven through a
power-limited channel: is the pair feasible at all, which encoder direction
certifiably stabilizes it, and what distortion does the closed loop actually
deliver. `matlib` keeps the numerics self-contained; `model` holds the
source/channel descriptions; `coder` runs the loop; `design` builds and
checks certificates. `cli` and `service` are thin front ends over
`pipeline`.
"""

from .coder import (
    POWER_NORMALIZED,
    STRICT,
    EncoderDesign,
    FilterState,
    SimulationReport,
    decoder_update,
    encode,
    kalman_gain,
    monte_carlo,
    riccati_step,
    simulate_trajectory,
)
from .design import (
    CONVERGED,
    DIVERGED,
    FEASIBLE,
    INFEASIBLE,
    OSCILLATING,
    DareResult,
    DesignCertificate,
    Feasibility,
    certificate_check,
    dare_fixed_point,
    design_gamma,
    effective_snr_capacity,
    feasibility_check,
    log_instability,
    reduced_J_solve,
    solve_M,
)
from .errors import (
    DegenerateDirection,
    DimensionMismatch,
    InvalidArgument,
    InvalidModel,
    NoConvergence,
    NotPD,
    NotPSD,
    NotSymmetric,
    ResonantSpectrum,
    SingularInnovationCovariance,
    SingularMatrix,
    ZdjsccError,
)
from .matlib import (
    INDEFINITE,
    PD,
    PSD,
    Matrix,
    determinant,
    eigenvalues,
    lu_solve,
    psd_check,
    stein_solve,
)
from .model import (
    MISO,
    SIMO,
    ChannelModel,
    CheckResult,
    RngState,
    SourceModel,
    ValidationReport,
    controllability_gramian,
    sample_mvn,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "POWER_NORMALIZED", "STRICT", "EncoderDesign", "FilterState", "SimulationReport",
    "decoder_update", "encode", "kalman_gain", "monte_carlo", "riccati_step",
    "simulate_trajectory",
    "CONVERGED", "DIVERGED", "FEASIBLE", "INFEASIBLE", "OSCILLATING",
    "DareResult", "DesignCertificate", "Feasibility", "certificate_check",
    "dare_fixed_point", "design_gamma", "effective_snr_capacity",
    "feasibility_check", "log_instability", "reduced_J_solve", "solve_M",
    "DegenerateDirection", "DimensionMismatch", "InvalidArgument", "InvalidModel",
    "NoConvergence", "NotPD", "NotPSD", "NotSymmetric", "ResonantSpectrum",
    "SingularInnovationCovariance", "SingularMatrix", "ZdjsccError",
    "INDEFINITE", "PD", "PSD", "Matrix", "determinant", "eigenvalues",
    "lu_solve", "psd_check", "stein_solve",
    "MISO", "SIMO", "ChannelModel", "CheckResult", "RngState", "SourceModel",
    "ValidationReport", "controllability_gramian", "sample_mvn", "validate_model",
    "__version__",
]
