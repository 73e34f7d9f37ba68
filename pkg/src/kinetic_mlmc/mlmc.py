"""Adaptive multilevel Monte Carlo over a hierarchy of time steps.

The estimator telescopes: a cheap coarse level is corrected by coupled
fine-minus-coarse differences whose variance shrinks as the time step
refines, so most samples land on cheap levels.  ``run_adaptive`` grows the
hierarchy one level at a time until the bias proxy drops below the RMSE
budget, re-allocating samples after every round.

Costs are expressed in units of one trajectory simulated with dt = eps**2
over the horizon, so a level-0 sample at dt = eps**2 costs exactly 1 and a
coupled pair counts both paths' steps.  The raw particle-step counter and
the optional step ceiling use unnormalised steps instead, since that is
what actually bounds the wall clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sampling
from .errors import BudgetError, ConfigError, ParameterError
from .model import get_qoi, make_params
from .stats import RunningMoments

STRATEGY_GEOMETRIC = "geometric"
STRATEGY_COARSE_HORIZON = "coarse-horizon"
STRATEGIES = (STRATEGY_GEOMETRIC, STRATEGY_COARSE_HORIZON)

WARM_UP_SAMPLES = 40


@dataclass(frozen=True)
class LevelSpec:
    """One resolution of the hierarchy.

    ``refine_factor`` is the integer step ratio to the next-coarser level
    and is None at the coarsest level, which is sampled uncoupled.
    """

    index: int
    dt: float
    n_steps: int
    refine_factor: int | None
    cost_per_sample: float


def _coarsest_steps(epsilon: float, t_star: float) -> tuple[int, bool]:
    """Steps for dt ~= eps**2 hitting the horizon exactly; flags real rounding."""
    target = t_star / (epsilon * epsilon)
    n = max(1, math.ceil(target - 1e-9))
    adjusted = abs(n - target) > 1e-9 * max(1.0, target)
    return n, adjusted


def _validate_hierarchy_args(strategy, epsilon, t_star, refine, n_levels) -> None:
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon!r}")
    if not (isinstance(t_star, (int, float)) and math.isfinite(t_star) and t_star > 0):
        raise ParameterError(f"t_star must be positive and finite, got {t_star!r}")
    if not (isinstance(refine, int) and refine >= 2):
        raise ParameterError(f"refine factor must be an integer >= 2, got {refine!r}")
    if not (isinstance(n_levels, int) and n_levels >= 1):
        raise ParameterError(f"n_levels must be a positive integer, got {n_levels!r}")


def build_hierarchy(
    strategy: str,
    epsilon: float,
    t_star: float,
    refine: int,
    n_levels: int,
) -> list[LevelSpec]:
    """Initial hierarchy of ``n_levels`` specs, coarsest first.

    ``geometric`` starts at dt_0 ~= eps**2 and divides by ``refine`` per
    level.  ``coarse-horizon`` prepends a single-step level at dt = t_star
    before the eps**2 level, so the bulk of the samples can land on a
    trajectory that costs one step.
    """
    _validate_hierarchy_args(strategy, epsilon, t_star, refine, n_levels)
    n_eps2, _ = _coarsest_steps(epsilon, t_star)
    steps: list[int] = []
    refines: list[int | None] = []
    if strategy == STRATEGY_GEOMETRIC:
        for lvl in range(n_levels):
            steps.append(n_eps2 * refine**lvl)
            refines.append(None if lvl == 0 else refine)
    else:
        steps.append(1)
        refines.append(None)
        for lvl in range(1, n_levels):
            steps.append(n_eps2 * refine ** (lvl - 1))
            refines.append(n_eps2 if lvl == 1 else refine)
    # the unit trajectory at dt ~= eps**2 takes n_eps2 steps after rounding,
    # so normalising by the integer keeps unit costs exact
    ref_steps = float(n_eps2)
    specs = []
    for i, (n, m) in enumerate(zip(steps, refines)):
        cost = n / ref_steps if i == 0 else (n + steps[i - 1]) / ref_steps
        specs.append(
            LevelSpec(index=i, dt=t_star / n, n_steps=n, refine_factor=m, cost_per_sample=cost)
        )
    return specs


def next_level(hierarchy: Sequence[LevelSpec], epsilon: float, t_star: float, refine: int) -> LevelSpec:
    """Spec one refinement finer than the current finest level."""
    if not hierarchy:
        raise ParameterError("hierarchy must not be empty")
    last = hierarchy[-1]
    n = last.n_steps * refine
    ref_steps = float(_coarsest_steps(epsilon, t_star)[0])
    return LevelSpec(
        index=last.index + 1,
        dt=t_star / n,
        n_steps=n,
        refine_factor=refine,
        cost_per_sample=(n + last.n_steps) / ref_steps,
    )


def cost_model(level: LevelSpec, hierarchy: Sequence[LevelSpec], epsilon: float, t_star: float) -> float:
    """Per-sample cost in units of one dt = eps**2 trajectory over the horizon."""
    if epsilon <= 0 or t_star <= 0:
        raise ParameterError("epsilon and t_star must be positive")
    ref_steps = float(_coarsest_steps(epsilon, t_star)[0])
    if level.index == 0:
        return level.n_steps / ref_steps
    prev = next((s for s in hierarchy if s.index == level.index - 1), None)
    if prev is None:
        raise ParameterError(f"hierarchy is missing level {level.index - 1}")
    return (level.n_steps + prev.n_steps) / ref_steps


def _raw_steps_per_sample(spec: LevelSpec) -> int:
    """Unnormalised particle steps one sample simulates (both paths if coupled)."""
    if spec.refine_factor is None:
        return spec.n_steps
    return spec.n_steps + spec.n_steps // spec.refine_factor


def allocate_samples(
    rmse: float,
    variances: Sequence[float],
    costs: Sequence[float],
    min_samples: int = WARM_UP_SAMPLES,
) -> list[int]:
    """Per-level sample counts splitting half the squared RMSE across levels.

    P_l = ceil(2 * E**-2 * sqrt(V_l / C_l) * sum_k sqrt(V_k * C_k)), floored
    at ``min_samples``; absent flooring the resulting estimator variance
    sum(V_l / P_l) is at most E**2 / 2.
    """
    if not (math.isfinite(rmse) and rmse > 0):
        raise ParameterError(f"rmse must be positive and finite, got {rmse!r}")
    if len(variances) != len(costs) or not variances:
        raise ParameterError("variances and costs must be non-empty and equal length")
    for v, c in zip(variances, costs):
        if v < 0 or not math.isfinite(v):
            raise ParameterError(f"variances must be finite and non-negative, got {v!r}")
        if c <= 0 or not math.isfinite(c):
            raise ParameterError(f"costs must be finite and positive, got {c!r}")
    total = math.fsum(math.sqrt(v * c) for v, c in zip(variances, costs))
    factor = 2.0 / (rmse * rmse) * total
    return [
        max(min_samples, math.ceil(factor * math.sqrt(v / c)))
        for v, c in zip(variances, costs)
    ]


def telescopic_combine(level_means: Sequence[float]) -> float:
    """Sum of per-level estimates; expectation matches the finest level alone."""
    if not len(level_means):
        raise ParameterError("level_means must not be empty")
    return math.fsum(level_means)


@dataclass
class LevelStats:
    """Streaming moments of the fine payoff and of the coupled difference.

    At the coarsest level there is no coarser pair, so the difference is
    the fine payoff itself and the telescoping sum starts from its mean.
    """

    level: int
    fine: RunningMoments = field(default_factory=RunningMoments)
    diff: RunningMoments = field(default_factory=RunningMoments)

    @property
    def n_samples(self) -> int:
        return self.fine.count

    def update(self, fine_payoffs, coarse_payoffs=None) -> None:
        fine = np.asarray(fine_payoffs, dtype=np.float64)
        self.fine.update(fine)
        if coarse_payoffs is None:
            self.diff.update(fine)
        else:
            coarse = np.asarray(coarse_payoffs, dtype=np.float64)
            if coarse.shape != fine.shape:
                raise ParameterError("fine and coarse payoff batches must match in shape")
            self.diff.update(fine - coarse)

    def merge(self, other: "LevelStats") -> None:
        if other.level != self.level:
            raise ParameterError(f"cannot merge level {other.level} into level {self.level}")
        self.fine.merge(other.fine)
        self.diff.merge(other.diff)


@dataclass(frozen=True)
class AdaptiveConfig:
    """Everything an adaptive run needs; reports are pure functions of this."""

    epsilon: float
    t_star: float
    rmse: float
    refine: int = 2
    strategy: str = STRATEGY_GEOMETRIC
    qoi: str = "x2"
    seed: int = 0
    max_levels: int = 30
    initial_levels: int = 3
    min_samples: int = WARM_UP_SAMPLES
    workers: int = 1
    chunk_size: int = sampling.DEFAULT_CHUNK
    cost_ceiling: float | None = None


@dataclass(frozen=True)
class LevelRow:
    """One hierarchy level of a finished run; the report table row."""

    level: int
    dt: float
    n_samples: int
    var_fine: float
    mean_diff: float
    var_diff: float
    estimator_variance: float
    cost_per_sample: float
    level_cost: float


@dataclass(frozen=True)
class ClassicalComparison:
    """Single-level classical run matching the MLMC bias and variance."""

    samples: int
    cost: float
    speedup: float


@dataclass(frozen=True)
class MlmcReport:
    epsilon: float
    t_star: float
    rmse: float
    strategy: str
    refine: int
    qoi: str
    seed: int
    rows: tuple[LevelRow, ...]
    estimate: float
    variance_total: float
    variance_budget: float
    bias_estimate: float | None
    two_term_bias: float | None
    finest_mean_diff: float
    finest_bias_below_rmse_sq: bool
    converged: bool
    dt0_adjusted: bool
    total_cost: float
    total_steps: int


def _validate_config(cfg: AdaptiveConfig) -> None:
    _validate_hierarchy_args(cfg.strategy, cfg.epsilon, cfg.t_star, cfg.refine, cfg.initial_levels)
    if not (math.isfinite(cfg.rmse) and cfg.rmse > 0):
        raise ConfigError(f"rmse must be positive and finite, got {cfg.rmse!r}")
    if cfg.max_levels < cfg.initial_levels:
        raise ConfigError(
            f"max_levels ({cfg.max_levels}) must be at least initial_levels ({cfg.initial_levels})"
        )
    if cfg.min_samples < 2:
        raise ConfigError("min_samples must be at least 2 to estimate variances")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {cfg.workers!r}")
    if cfg.chunk_size < 1:
        raise ConfigError(f"chunk_size must be at least 1, got {cfg.chunk_size!r}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {cfg.seed!r}")
    if cfg.cost_ceiling is not None and cfg.cost_ceiling <= 0:
        raise ConfigError(f"cost_ceiling must be positive, got {cfg.cost_ceiling!r}")


def run_adaptive(cfg: AdaptiveConfig) -> MlmcReport:
    """Grow levels and top up samples until the bias proxy meets the budget.

    Each round tops every level up to its allocation target, re-estimates
    variances, and re-allocates.  Once all targets are met, convergence is
    judged on the last three difference means: the hierarchy stops when
    max(|Y_{L-2}|, |Y_{L-1}|, |Y_L|) / (M - 1) <= E / sqrt(2), which guards
    against a single difference mean dipping early by chance.  The two-term
    variant max(|Y_{L-1}|/M, |Y_L|)/(M - 1) is reported as a diagnostic.
    """
    _validate_config(cfg)
    qoi_fn = get_qoi(cfg.qoi).fn
    levels = build_hierarchy(cfg.strategy, cfg.epsilon, cfg.t_star, cfg.refine, cfg.initial_levels)
    _, dt0_adjusted = _coarsest_steps(cfg.epsilon, cfg.t_star)
    params = [make_params(cfg.epsilon, s.dt) for s in levels]
    stats = [LevelStats(s.index) for s in levels]
    targets = [cfg.min_samples] * len(levels)
    total_steps = 0
    converged = False
    bias_estimate: float | None = None

    while True:
        shortfall = [max(0, t - st.n_samples) for t, st in zip(targets, stats)]
        planned = sum(extra * _raw_steps_per_sample(spec) for extra, spec in zip(shortfall, levels))
        if cfg.cost_ceiling is not None and total_steps + planned > cfg.cost_ceiling:
            raise BudgetError(
                f"planned {total_steps + planned} particle steps exceed the "
                f"ceiling of {cfg.cost_ceiling:g}"
            )
        for spec, st, extra in zip(levels, stats, shortfall):
            if extra == 0:
                continue
            consume = st.update
            if spec.refine_factor is None:
                sampling.accumulate_single_level(
                    params[spec.index], spec.n_steps, qoi_fn, cfg.seed, spec.index,
                    st.n_samples, extra, consume,
                    workers=cfg.workers, chunk_size=cfg.chunk_size,
                )
            else:
                sampling.accumulate_coupled_level(
                    params[spec.index], params[spec.index - 1], spec.refine_factor,
                    levels[spec.index - 1].n_steps, qoi_fn, cfg.seed, spec.index,
                    st.n_samples, extra, consume,
                    workers=cfg.workers, chunk_size=cfg.chunk_size,
                )
            total_steps += extra * _raw_steps_per_sample(spec)

        variances = [st.diff.variance for st in stats]
        costs = [spec.cost_per_sample for spec in levels]
        allocation = allocate_samples(cfg.rmse, variances, costs, cfg.min_samples)
        if any(target > st.n_samples for target, st in zip(allocation, stats)):
            targets = allocation
            continue
        targets = allocation

        diff_means = [st.diff.mean for st in stats[1:]]
        if len(diff_means) >= 3:
            m_finest = levels[-1].refine_factor
            bias_estimate = max(abs(y) for y in diff_means[-3:]) / (m_finest - 1)
            if bias_estimate <= cfg.rmse / math.sqrt(2.0):
                converged = True
                break
        if len(levels) >= cfg.max_levels:
            raise BudgetError(
                f"bias did not converge within max_levels={cfg.max_levels} "
                f"(last bias estimate {bias_estimate!r})"
            )
        spec = next_level(levels, cfg.epsilon, cfg.t_star, cfg.refine)
        levels.append(spec)
        params.append(make_params(cfg.epsilon, spec.dt))
        stats.append(LevelStats(spec.index))
        targets = targets + [cfg.min_samples]

    rows = tuple(
        LevelRow(
            level=spec.index,
            dt=spec.dt,
            n_samples=st.n_samples,
            var_fine=st.fine.variance,
            mean_diff=st.diff.mean,
            var_diff=st.diff.variance,
            estimator_variance=st.diff.variance / st.n_samples,
            cost_per_sample=spec.cost_per_sample,
            level_cost=st.n_samples * spec.cost_per_sample,
        )
        for spec, st in zip(levels, stats)
    )
    diff_means = [st.diff.mean for st in stats[1:]]
    two_term = None
    if len(diff_means) >= 2:
        m_finest = levels[-1].refine_factor
        two_term = max(abs(diff_means[-2]) / m_finest, abs(diff_means[-1])) / (m_finest - 1)
    finest_mean_diff = stats[-1].diff.mean
    return MlmcReport(
        epsilon=cfg.epsilon,
        t_star=cfg.t_star,
        rmse=cfg.rmse,
        strategy=cfg.strategy,
        refine=cfg.refine,
        qoi=cfg.qoi,
        seed=cfg.seed,
        rows=rows,
        estimate=telescopic_combine([st.diff.mean for st in stats]),
        variance_total=math.fsum(row.estimator_variance for row in rows),
        variance_budget=cfg.rmse * cfg.rmse / 2.0,
        bias_estimate=bias_estimate,
        two_term_bias=two_term,
        finest_mean_diff=finest_mean_diff,
        finest_bias_below_rmse_sq=abs(finest_mean_diff) < cfg.rmse * cfg.rmse,
        converged=converged,
        dt0_adjusted=dt0_adjusted,
        total_cost=math.fsum(row.level_cost for row in rows),
        total_steps=total_steps,
    )


def classical_equivalent(report: MlmcReport) -> ClassicalComparison:
    """Classical single-level run hitting the same bias and variance.

    Sample count is var_fine at the finest level over the multilevel
    estimator variance.  A classical kinetic step consumes two random
    numbers against the three of a transport-diffusion-collision step, so
    its per-step cost is weighted by 2/3.
    """
    if not report.rows:
        raise ParameterError("report has no levels")
    if report.variance_total <= 0:
        raise ParameterError("estimator variance must be positive to compare against")
    last = report.rows[-1]
    samples = max(1, math.ceil(last.var_fine / report.variance_total))
    cost = samples * (2.0 / 3.0) * last.cost_per_sample
    if report.total_cost <= 0:
        raise ParameterError("report total cost must be positive")
    return ClassicalComparison(samples=samples, cost=cost, speedup=cost / report.total_cost)
