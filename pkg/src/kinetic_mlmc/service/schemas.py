"""Request and response models for the HTTP service and the CLI.

Requests reject unknown fields so that a typo in a config file or query
fails fast instead of silently running with defaults.  Responses echo the
experiment-defining parameters but never execution knobs like worker
counts, keeping output bytes identical across worker counts.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LevelStudyRequest(_Request):
    epsilon: float = Field(gt=0)
    t_star: float = Field(default=5.0, gt=0)
    dt0: float = Field(default=2.5, gt=0)
    max_levels: int = Field(default=8, ge=1)
    samples_per_level: int = Field(default=100_000, ge=2)
    M: int = Field(default=2, ge=2)
    qoi: str = "x2"
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    cost_ceiling: Optional[float] = Field(default=None, gt=0)


class LevelStudyRow(BaseModel):
    level: int
    dt: float
    n_samples: int
    mean_fine: float
    var_fine: float
    stderr_fine: float
    mean_diff: float
    abs_mean_diff: float
    var_diff: float
    stderr_diff: float


class LevelStudyResponse(BaseModel):
    epsilon: float
    t_star: float
    dt0: float
    M: int
    samples_per_level: int
    qoi: str
    seed: int
    rows: list[LevelStudyRow]


class MlmcRunRequest(_Request):
    epsilon: float = Field(gt=0)
    t_star: float = Field(default=0.5, gt=0)
    rmse: float = Field(gt=0)
    M: int = Field(default=2, ge=2)
    strategy: Literal["geometric", "coarse-horizon"] = "geometric"
    qoi: str = "x2"
    seed: int = Field(default=0, ge=0)
    max_levels: int = Field(default=30, ge=3)
    workers: int = Field(default=1, ge=1)
    cost_ceiling: Optional[float] = Field(default=None, gt=0)


class MlmcLevelRow(BaseModel):
    level: int
    dt: float
    n_samples: int
    var_fine: float
    mean_diff: float
    var_diff: float
    estimator_variance: float
    cost_per_sample: float
    level_cost: float


class ClassicalComparisonModel(BaseModel):
    samples: int
    cost: float
    speedup: float


class MlmcRunResponse(BaseModel):
    epsilon: float
    t_star: float
    rmse: float
    M: int
    strategy: str
    qoi: str
    seed: int
    rows: list[MlmcLevelRow]
    estimate: float
    variance_total: float
    variance_budget: float
    bias_estimate: Optional[float]
    two_term_bias: Optional[float]
    finest_mean_diff: float
    finest_bias_below_rmse_sq: bool
    converged: bool
    dt0_adjusted: bool
    total_cost: float
    total_steps: int
    classical: ClassicalComparisonModel


class CompareClassicalRequest(MlmcRunRequest):
    pass


class CompareClassicalResponse(BaseModel):
    rmse: float
    mlmc_cost: float
    classical_cost: float
    classical_samples: int
    speedup: float


class TrajectoryRequest(_Request):
    epsilon: float = Field(gt=0)
    dt_fine: float = Field(default=0.2, gt=0)
    dt_coarse: float = Field(default=1.0, gt=0)
    t_star: float = Field(default=10.0, gt=0)
    mode: Literal["full", "diffusion-only", "transport-only"] = "full"
    seed: int = Field(default=0, ge=0)


class TrajectoryRowModel(BaseModel):
    t: float
    x_fine: float
    sign_fine: int
    collided_fine: int
    x_coarse: float
    sign_coarse: int
    collided_coarse: int


class TrajectoryResponse(BaseModel):
    epsilon: float
    dt_fine: float
    dt_coarse: float
    t_star: float
    mode: str
    seed: int
    rows: list[TrajectoryRowModel]
