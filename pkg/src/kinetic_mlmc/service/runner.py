"""Bridges between request models and the core experiment drivers.

Each runner is a pure function of its request, so the HTTP layer and the
in-process CLI path produce identical responses for identical requests.
"""

from __future__ import annotations

from .. import experiments, mlmc
from . import schemas


def run_level_study(req: schemas.LevelStudyRequest) -> schemas.LevelStudyResponse:
    rows = experiments.level_study(
        experiments.LevelStudyConfig(
            epsilon=req.epsilon,
            t_star=req.t_star,
            dt0=req.dt0,
            n_levels=req.max_levels,
            samples_per_level=req.samples_per_level,
            refine=req.M,
            qoi=req.qoi,
            seed=req.seed,
            workers=req.workers,
            cost_ceiling=req.cost_ceiling,
        )
    )
    return schemas.LevelStudyResponse(
        epsilon=req.epsilon,
        t_star=req.t_star,
        dt0=req.dt0,
        M=req.M,
        samples_per_level=req.samples_per_level,
        qoi=req.qoi,
        seed=req.seed,
        rows=[schemas.LevelStudyRow(**row.__dict__) for row in rows],
    )


def _adaptive_config(req: schemas.MlmcRunRequest) -> mlmc.AdaptiveConfig:
    return mlmc.AdaptiveConfig(
        epsilon=req.epsilon,
        t_star=req.t_star,
        rmse=req.rmse,
        refine=req.M,
        strategy=req.strategy,
        qoi=req.qoi,
        seed=req.seed,
        max_levels=req.max_levels,
        workers=req.workers,
        cost_ceiling=req.cost_ceiling,
    )


def run_mlmc(req: schemas.MlmcRunRequest) -> schemas.MlmcRunResponse:
    report = mlmc.run_adaptive(_adaptive_config(req))
    comparison = mlmc.classical_equivalent(report)
    return schemas.MlmcRunResponse(
        epsilon=report.epsilon,
        t_star=report.t_star,
        rmse=report.rmse,
        M=report.refine,
        strategy=report.strategy,
        qoi=report.qoi,
        seed=report.seed,
        rows=[schemas.MlmcLevelRow(**row.__dict__) for row in report.rows],
        estimate=report.estimate,
        variance_total=report.variance_total,
        variance_budget=report.variance_budget,
        bias_estimate=report.bias_estimate,
        two_term_bias=report.two_term_bias,
        finest_mean_diff=report.finest_mean_diff,
        finest_bias_below_rmse_sq=report.finest_bias_below_rmse_sq,
        converged=report.converged,
        dt0_adjusted=report.dt0_adjusted,
        total_cost=report.total_cost,
        total_steps=report.total_steps,
        classical=schemas.ClassicalComparisonModel(**comparison.__dict__),
    )


def run_compare_classical(req: schemas.CompareClassicalRequest) -> schemas.CompareClassicalResponse:
    response = run_mlmc(req)
    return schemas.CompareClassicalResponse(
        rmse=response.rmse,
        mlmc_cost=response.total_cost,
        classical_cost=response.classical.cost,
        classical_samples=response.classical.samples,
        speedup=response.classical.speedup,
    )


def run_trajectory(req: schemas.TrajectoryRequest) -> schemas.TrajectoryResponse:
    rows = experiments.coupled_trajectory(
        experiments.TrajectoryConfig(
            epsilon=req.epsilon,
            dt_fine=req.dt_fine,
            dt_coarse=req.dt_coarse,
            t_star=req.t_star,
            mode=req.mode,
            seed=req.seed,
        )
    )
    return schemas.TrajectoryResponse(
        epsilon=req.epsilon,
        dt_fine=req.dt_fine,
        dt_coarse=req.dt_coarse,
        t_star=req.t_star,
        mode=req.mode,
        seed=req.seed,
        rows=[schemas.TrajectoryRowModel(**row.__dict__) for row in rows],
    )
