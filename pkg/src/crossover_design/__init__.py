"""Locally D-optimal crossover designs for correlated GLM responses.

Core pieces: treatment-sequence algebra and model matrices
(``sequences``), response families (``families``), working correlation
structures (``correlation``), GEE variance assembly and the design
criterion (``gee``), simplex optimization (``optimizer``),
misspecification metrics (``efficiency``), and two-stage trial
simulation (``simulation``). An HTTP service lives under ``service``;
``cli`` is a thin client over the same handlers.
"""

from .correlation import CorrelationSpec, build_correlation, default_rho_tables
from .errors import (
    ConfigError,
    CrossoverDesignError,
    DidNotConverge,
    DimensionMismatch,
    DomainError,
    FitDidNotConverge,
    MissingPairCorrelation,
    NonFiniteInput,
    NotPositiveDefinite,
    RankDeficientDesign,
    SingularInformation,
    SingularWorkingCovariance,
    UnknownTreatmentLabel,
)
from .families import Family, mean, mean_derivative, variance_fn
from .gee import GeeAssembly, VarianceReport, assemble, info_matrix, objective, variance_report
from .optimizer import OptimizationResult, OptimizerConfig, grid_oracle_2seq, optimize
from .efficiency import MisspecRow, MisspecTable, misspec_table, relative_d_efficiency, sensitivity
from .problem import Design, DesignProblem, ParamVector
from .sequences import (
    Sequence,
    build_design_matrix,
    build_full_indicator_matrix,
    enumerate_permutation_sequences,
    parse_sequence,
    parse_sequences,
    tau_selector,
)
from .simulation import (
    GeeFit,
    TrialDataset,
    TrialRecord,
    TwoStageConfig,
    TwoStageReport,
    fit_gee,
    largest_remainder_counts,
    simulate_responses,
    two_stage_run,
)
from .fixtures import FixtureSpec, fixture_names, fixture_problem, get_fixture

__version__ = "0.1.0"

__all__ = [
    "CorrelationSpec",
    "build_correlation",
    "default_rho_tables",
    "ConfigError",
    "CrossoverDesignError",
    "DidNotConverge",
    "DimensionMismatch",
    "DomainError",
    "FitDidNotConverge",
    "MissingPairCorrelation",
    "NonFiniteInput",
    "NotPositiveDefinite",
    "RankDeficientDesign",
    "SingularInformation",
    "SingularWorkingCovariance",
    "UnknownTreatmentLabel",
    "Family",
    "mean",
    "mean_derivative",
    "variance_fn",
    "GeeAssembly",
    "VarianceReport",
    "assemble",
    "info_matrix",
    "objective",
    "variance_report",
    "OptimizationResult",
    "OptimizerConfig",
    "grid_oracle_2seq",
    "optimize",
    "MisspecRow",
    "MisspecTable",
    "misspec_table",
    "relative_d_efficiency",
    "sensitivity",
    "Design",
    "DesignProblem",
    "ParamVector",
    "Sequence",
    "build_design_matrix",
    "build_full_indicator_matrix",
    "enumerate_permutation_sequences",
    "parse_sequence",
    "parse_sequences",
    "tau_selector",
    "GeeFit",
    "TrialDataset",
    "TrialRecord",
    "TwoStageConfig",
    "TwoStageReport",
    "fit_gee",
    "largest_remainder_counts",
    "simulate_responses",
    "two_stage_run",
    "FixtureSpec",
    "fixture_names",
    "fixture_problem",
    "get_fixture",
    "__version__",
]
