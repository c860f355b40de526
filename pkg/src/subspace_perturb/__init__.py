"""Row-wise perturbation bounds for invariant subspaces of symmetric matrices."""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    corollary_infbound,
    lemma_y_bound,
    probg_rate_check,
    theorem_main_bound,
    two_perturbation_bound,
)
from .exceptions import (
    AssumptionError,
    CertificateError,
    ConfigError,
    ConvergenceError,
    DegenerateSplitError,
    DimensionError,
    FormatError,
    NotSymmetricError,
    OrderingError,
    SingularOperatorError,
    StaleResultError,
    SubspacePerturbError,
)
from .experiments import PRESETS, SigmaRule, SweepConfig, SweepRecord, run_sweep
from .generators import InstanceSpec, SeededRng, build_instance
from .linalg import (
    SpectralSplit,
    procrustes_align,
    sin_theta_distance,
    spectral_split,
    two_inf_subspace_error,
    two_to_inf_norm,
)
from .newton import NewtonOptions, newton_subspace, newton_subspace_matfree
from .schur import SchurSplit, schur_bound, schur_split
from .separation import gap_certificate, sep_2inf_upper_probe, sep_diag

__all__ = [
    "__version__",
    "BoundReport",
    "corollary_infbound",
    "lemma_y_bound",
    "probg_rate_check",
    "theorem_main_bound",
    "two_perturbation_bound",
    "AssumptionError",
    "CertificateError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateSplitError",
    "DimensionError",
    "FormatError",
    "NotSymmetricError",
    "OrderingError",
    "SingularOperatorError",
    "StaleResultError",
    "SubspacePerturbError",
    "PRESETS",
    "SigmaRule",
    "SweepConfig",
    "SweepRecord",
    "run_sweep",
    "InstanceSpec",
    "SeededRng",
    "build_instance",
    "SpectralSplit",
    "procrustes_align",
    "sin_theta_distance",
    "spectral_split",
    "two_inf_subspace_error",
    "two_to_inf_norm",
    "NewtonOptions",
    "newton_subspace",
    "newton_subspace_matfree",
    "SchurSplit",
    "schur_bound",
    "schur_split",
    "gap_certificate",
    "sep_2inf_upper_probe",
    "sep_diag",
]
