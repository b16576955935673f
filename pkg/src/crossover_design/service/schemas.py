"""Pydantic request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

CorrelationKind = Literal[
    "compound_symmetric",
    "ar1",
    "banded1",
    "seq_banded",
    "seq_ar1_symmetric",
    "seq_ar1",
    "custom",
]


class CorrelationModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: CorrelationKind
    rho: float | None = None
    rho_table: dict[str, float] | None = None    # letter pairs: {"AB": 0.2}
    custom: dict[str, list[list[float]]] | None = None  # per-sequence matrices


class ProblemModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: int = Field(ge=2, le=26)
    p: int = Field(ge=2)
    sequences: list[str] = Field(min_length=1)
    family: Literal["binary", "poisson"]
    theta: list[float]
    correlation: CorrelationModel
    true_correlation: CorrelationModel | None = None


class FixtureSelector(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    structure: int | None = Field(default=None, ge=1, le=6)
    rho: float | None = None
    true_structure: int | None = Field(default=None, ge=1, le=6)


class OptimizerModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    restarts: int = Field(default=8, ge=1)
    max_iters: int = Field(default=2000, ge=1)
    tol_obj: float = Field(default=1e-10, gt=0)
    tol_weight: float = Field(default=1e-8, gt=0)
    zero_clip: float = Field(default=1e-6, gt=0)
    seed: int = 0


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemModel | None = None
    fixture: FixtureSelector | None = None
    optimizer: OptimizerModel = Field(default_factory=OptimizerModel)


class DesignPoint(BaseModel):
    sequence: str
    weight: float


class OptimizeResponse(BaseModel):
    design: list[DesignPoint]
    objective: float
    log_det: float
    converged: bool
    iterations: int
    restarts: int
    restart_spread: float


class EfficiencyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemModel | None = None
    fixture: FixtureSelector | None = None
    assumed_theta: list[float] | None = None
    assumed_correlation: CorrelationModel | None = None
    optimizer: OptimizerModel = Field(default_factory=OptimizerModel)


class EfficiencyResponse(BaseModel):
    sensitivity: float
    relative_d_efficiency: float
    design_true: list[DesignPoint]
    design_assumed: list[DesignPoint]


class MisspecTableRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: int = Field(default=4, ge=2, le=26)
    p: int = Field(default=4, ge=2)
    sequences: list[str] | None = None
    family: Literal["binary", "poisson"] = "binary"
    theta1: list[float] | None = None
    theta2: list[float] | None = None
    scenario: Literal["two_treatment", "latin_square_4"] = "latin_square_4"
    structures: list[int] | None = None
    optimizer: OptimizerModel = Field(default_factory=OptimizerModel)


class MisspecRowModel(BaseModel):
    true_structure: int
    working_structure: int
    weights_theta1: list[float]
    weights_theta2: list[float]
    efficiency_theta1: float
    efficiency_theta2: float


class MisspecTableResponse(BaseModel):
    sequences: list[str]
    rows: list[MisspecRowModel]


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemModel | None = None
    fixture: FixtureSelector | None = None
    working_kind: Literal[
        "compound_symmetric", "ar1", "banded1",
        "seq_banded", "seq_ar1_symmetric", "seq_ar1",
    ] = "ar1"
    n_total: int = Field(default=400, ge=8)
    pilot_fraction: float = Field(default=0.3, gt=0, le=1)
    replications: int = Field(default=100, ge=1)
    seed: int = 0
    optimizer: OptimizerModel = Field(
        default_factory=lambda: OptimizerModel(restarts=3, max_iters=500)
    )


class ReplicationModel(BaseModel):
    index: int
    mse_uniform: float | None
    mse_optimal: float | None
    rho_hat_pilot: float | None
    pilot_converged: bool | None
    excluded: str | None


class SimulateResponse(BaseModel):
    mse_uniform: float
    mse_optimal: float
    mse_ratio: float
    n_replications: int
    n_excluded: int
    seed: int
    replications: list[ReplicationModel]


class DumpMatricesRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemModel | None = None
    fixture: FixtureSelector | None = None


class SequenceDump(BaseModel):
    sequence: str
    x: list[list[float]]
    x_full_indicator: list[list[float]]
    eta: list[float]
    mu: list[float]
    variance_diag: list[float]
    correlation: list[list[float]]
    w_inverse: list[list[float]]
    dmu_dtheta: list[list[float]]


class DumpMatricesResponse(BaseModel):
    theta_layout: str
    tau_selector: list[list[float]]
    sequences: list[SequenceDump]


class FixtureInfo(BaseModel):
    name: str
    description: str
    t: int
    p: int
    sequences: list[str]
    family: str
    theta: list[float]
    default_structure: int


class ErrorBody(BaseModel):
    error: str
    detail: str
