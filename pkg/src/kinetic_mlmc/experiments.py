"""Fixed-budget studies: per-level moment tables and coupled path traces.

``level_study`` measures mean and variance of the payoff and of the coupled
difference at every level of a dt0-anchored geometric hierarchy with a fixed
sample count per level, which is the data behind variance-decay and
pre-asymptotic-growth plots.  ``coupled_trajectory`` records one coupled
fine/coarse pair step by step for path visualisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng, sampling
from .coupling import (
    CoupledPair,
    CoupledStepRecord,
    coupled_coarse_window,
    refine_factor_for,
)
from .errors import BudgetError, ConfigError
from .mlmc import LevelStats
from .model import (
    ParticleState,
    ap_collision_step,
    ap_transport_diffusion_step,
    get_qoi,
    make_params,
)

TRAJECTORY_MODES = {
    "full": (True, True),
    "diffusion-only": (False, True),
    "transport-only": (True, False),
}


@dataclass(frozen=True)
class LevelStudyConfig:
    epsilon: float
    t_star: float = 5.0
    dt0: float = 2.5
    n_levels: int = 8
    samples_per_level: int = 100_000
    refine: int = 2
    qoi: str = "x2"
    seed: int = 0
    workers: int = 1
    chunk_size: int = sampling.DEFAULT_CHUNK
    cost_ceiling: float | None = None


@dataclass(frozen=True)
class LevelStudyRow:
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


def _validate_level_study(cfg: LevelStudyConfig) -> int:
    if not (math.isfinite(cfg.epsilon) and cfg.epsilon > 0):
        raise ConfigError(f"epsilon must be positive and finite, got {cfg.epsilon!r}")
    if not (math.isfinite(cfg.t_star) and cfg.t_star > 0):
        raise ConfigError(f"t_star must be positive and finite, got {cfg.t_star!r}")
    if not (math.isfinite(cfg.dt0) and cfg.dt0 > 0):
        raise ConfigError(f"dt0 must be positive and finite, got {cfg.dt0!r}")
    if cfg.n_levels < 1:
        raise ConfigError(f"n_levels must be at least 1, got {cfg.n_levels!r}")
    if cfg.samples_per_level < 2:
        raise ConfigError("samples_per_level must be at least 2 to estimate variances")
    if not (isinstance(cfg.refine, int) and cfg.refine >= 2):
        raise ConfigError(f"refine factor must be an integer >= 2, got {cfg.refine!r}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {cfg.seed!r}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {cfg.workers!r}")
    ratio = cfg.t_star / cfg.dt0
    n0 = round(ratio)
    if n0 < 1 or abs(ratio - n0) > 1e-9 * max(1.0, ratio):
        raise ConfigError(
            f"dt0 must divide t_star a whole number of times, got t_star/dt0 = {ratio!r}"
        )
    return n0


def level_study(cfg: LevelStudyConfig) -> list[LevelStudyRow]:
    """Per-level payoff and difference moments at a fixed sample count.

    The coarsest level is sampled uncoupled and its difference columns repeat
    the payoff columns, matching the telescoping convention that the level-0
    estimator is the payoff itself.
    """
    n0 = _validate_level_study(cfg)
    qoi_fn = get_qoi(cfg.qoi).fn
    steps = [n0 * cfg.refine**lvl for lvl in range(cfg.n_levels)]
    planned = cfg.samples_per_level * sum(
        n if lvl == 0 else n + steps[lvl - 1] for lvl, n in enumerate(steps)
    )
    if cfg.cost_ceiling is not None and planned > cfg.cost_ceiling:
        raise BudgetError(
            f"study needs {planned} particle steps, above the ceiling of {cfg.cost_ceiling:g}"
        )
    rows = []
    for lvl, n_steps in enumerate(steps):
        params = make_params(cfg.epsilon, cfg.t_star / n_steps)
        stats = LevelStats(lvl)
        if lvl == 0:
            sampling.accumulate_single_level(
                params, n_steps, qoi_fn, cfg.seed, lvl, 0, cfg.samples_per_level,
                stats.update, workers=cfg.workers, chunk_size=cfg.chunk_size,
            )
        else:
            params_coarse = make_params(cfg.epsilon, cfg.t_star / steps[lvl - 1])
            sampling.accumulate_coupled_level(
                params, params_coarse, cfg.refine, steps[lvl - 1], qoi_fn,
                cfg.seed, lvl, 0, cfg.samples_per_level,
                stats.update, workers=cfg.workers, chunk_size=cfg.chunk_size,
            )
        rows.append(
            LevelStudyRow(
                level=lvl,
                dt=cfg.t_star / n_steps,
                n_samples=stats.n_samples,
                mean_fine=stats.fine.mean,
                var_fine=stats.fine.variance,
                stderr_fine=stats.fine.stderr,
                mean_diff=stats.diff.mean,
                abs_mean_diff=abs(stats.diff.mean),
                var_diff=stats.diff.variance,
                stderr_diff=stats.diff.stderr,
            )
        )
    return rows


@dataclass(frozen=True)
class TrajectoryConfig:
    epsilon: float
    dt_fine: float = 0.2
    dt_coarse: float = 1.0
    t_star: float = 10.0
    mode: str = "full"
    seed: int = 0


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    x_fine: float
    sign_fine: int
    collided_fine: int
    x_coarse: float
    sign_coarse: int
    collided_coarse: int


def coupled_trajectory(cfg: TrajectoryConfig) -> list[TrajectoryRow]:
    """One coupled pair recorded at every fine step.

    Within a window the coarse columns repeat the state before the window's
    coarse update; the last row of each window carries the updated coarse
    state and its collision flag.
    """
    if cfg.mode not in TRAJECTORY_MODES:
        raise ConfigError(
            f"unknown mode {cfg.mode!r}, expected one of {sorted(TRAJECTORY_MODES)}"
        )
    if not (math.isfinite(cfg.epsilon) and cfg.epsilon > 0):
        raise ConfigError(f"epsilon must be positive and finite, got {cfg.epsilon!r}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {cfg.seed!r}")
    with_transport, with_diffusion = TRAJECTORY_MODES[cfg.mode]
    m_steps = refine_factor_for(cfg.dt_fine, cfg.dt_coarse)
    ratio = cfg.t_star / cfg.dt_coarse
    n_windows = round(ratio)
    if n_windows < 1 or abs(ratio - n_windows) > 1e-9 * max(1.0, ratio):
        raise ConfigError(
            f"dt_coarse must divide t_star a whole number of times, got {ratio!r}"
        )
    params_fine = make_params(cfg.epsilon, cfg.dt_fine)
    params_coarse = make_params(cfg.epsilon, cfg.dt_coarse)
    stream = rng.stream_for(rng.StreamKey(cfg.seed, 0, 0))
    s0 = stream.draw_sign()
    fine = ParticleState(0.0, s0)
    coarse = ParticleState(0.0, s0)
    rows = [TrajectoryRow(0.0, 0.0, s0, 0, 0.0, s0, 0)]
    for window in range(n_windows):
        xi = np.empty(m_steps, dtype=np.float64)
        alpha = np.empty(m_steps, dtype=np.float64)
        signs = np.empty(m_steps, dtype=np.int64)
        xi_total = 0.0
        alpha_max = 0.0
        fine_rows = []
        for k in range(m_steps):
            draw = stream.draw_normal()
            fine = ap_transport_diffusion_step(
                fine, params_fine, draw,
                with_transport=with_transport, with_diffusion=with_diffusion,
            )
            a = stream.draw_uniform()
            collided = a >= params_fine.p_no_collide
            if collided:
                fine = ap_collision_step(fine, params_fine, a, stream.draw_sign())
            xi[k] = draw
            alpha[k] = a
            signs[k] = fine.sign
            xi_total = xi_total + draw
            alpha_max = max(alpha_max, a)
            t = (window * m_steps + k + 1) * cfg.dt_fine
            fine_rows.append((t, fine.x, fine.sign, 1 if collided else 0))
        record = CoupledStepRecord(
            xi_fine=xi,
            alpha_fine=alpha,
            sign_fine=signs,
            xi_coarse=xi_total / math.sqrt(m_steps),
            alpha_coarse=float(np.float64(alpha_max) ** m_steps),
        )
        prev = coarse
        coarse = coupled_coarse_window(
            CoupledPair(fine, coarse, params_fine, params_coarse), record,
            with_transport=with_transport, with_diffusion=with_diffusion,
        )
        coarse_collided = 1 if record.alpha_coarse >= params_coarse.p_no_collide else 0
        for k, (t, x, sgn, hit) in enumerate(fine_rows):
            last = k == m_steps - 1
            rows.append(
                TrajectoryRow(
                    t=t,
                    x_fine=x,
                    sign_fine=sgn,
                    collided_fine=hit,
                    x_coarse=coarse.x if last else prev.x,
                    sign_coarse=coarse.sign if last else prev.sign,
                    collided_coarse=coarse_collided if last else 0,
                )
            )
    return rows
