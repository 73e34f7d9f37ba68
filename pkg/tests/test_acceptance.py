"""End-to-end acceptance checks, one test per criterion.

Each test prints one `criterion NN: PASS/FAIL` line with the measured
numbers before asserting, so a full run leaves a complete scorecard in the
captured output (visible with -rA).

Monte Carlo acceptance bands are checked at pinned seeds: the adaptive
driver's allocation shape is noisy at warm-up sample sizes, so the seeds
below were fixed once and the asserted quantities are bands, never exact
values.  Criterion 6 runs its stated procedure unchanged at seed 0; the
closed-form oracle shows the mean-difference ladder changes sign inside the
fitted window and the variance slope sits just below the band in this
regime, so the test reports the measured slopes and fails honestly.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy import stats as sps

from conftest import enumerated_second_moment
from kinetic_mlmc import cli, rng, sampling
from kinetic_mlmc.experiments import LevelStudyConfig, level_study
from kinetic_mlmc.mlmc import (
    AdaptiveConfig,
    LevelStats,
    classical_equivalent,
    run_adaptive,
)
from kinetic_mlmc.model import get_qoi, make_params
from kinetic_mlmc.oracle import MomentQuery, exact_second_moment

WORKERS = 8


def _line(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def run_rmse_point1():
    cfg = AdaptiveConfig(epsilon=0.1, t_star=0.5, rmse=0.1, seed=2, workers=WORKERS)
    return run_adaptive(cfg)


@pytest.fixture(scope="module")
def run_rmse_point01():
    cfg = AdaptiveConfig(epsilon=0.1, t_star=0.5, rmse=0.01, seed=7, workers=WORKERS)
    t0 = time.monotonic()
    report = run_adaptive(cfg)
    return report, time.monotonic() - t0


@pytest.fixture(scope="module")
def run_rmse_point01_coarse_horizon():
    cfg = AdaptiveConfig(
        epsilon=0.1, t_star=0.5, rmse=0.01, seed=7, workers=WORKERS,
        strategy="coarse-horizon",
    )
    return run_adaptive(cfg)


def test_criterion_01_oracle_reference_value():
    value = exact_second_moment(MomentQuery(0.1, 0.01, 50))
    ok = 0.860 <= value <= 0.870
    _line(1, ok, f"exact_second_moment(0.1, 0.01, 50) = {value:.6f}, band [0.860, 0.870]")
    assert ok


def test_criterion_02_monte_carlo_matches_oracle():
    t0 = time.monotonic()
    params = make_params(0.1, 0.01)
    stats = LevelStats(0)
    sampling.accumulate_single_level(
        params, 50, get_qoi("x2").fn, 0, 0, 0, 1_000_000, stats.update, workers=WORKERS
    )
    exact = exact_second_moment(MomentQuery(0.1, 0.01, 50))
    z = (stats.fine.mean - exact) / stats.fine.stderr
    elapsed = time.monotonic() - t0
    ok = abs(z) <= 3.0 and elapsed <= 60.0
    _line(
        2, ok,
        f"1e6 particles: mean {stats.fine.mean:.6f} vs exact {exact:.6f}, "
        f"z = {z:+.2f} (|z| <= 3), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_03_heat_limit():
    params = make_params(1e-3, 0.1)
    stats = LevelStats(0)
    sampling.accumulate_single_level(
        params, 5, get_qoi("x2").fn, 0, 0, 0, 100_000, stats.update, workers=WORKERS
    )
    z = (stats.fine.mean - 1.0) / stats.fine.stderr
    ok = abs(z) <= 3.0
    _line(3, ok, f"eps = 1e-3: mean {stats.fine.mean:.5f} vs heat limit 1.0, z = {z:+.2f}")
    assert ok


def test_criterion_04_coupling_safety_randomized():
    t0 = time.monotonic()
    gen = np.random.default_rng(0)
    total = sampling.WindowEvents()
    while total.windows < 1_000_000:
        eps = float(10 ** gen.uniform(-3, 1))
        dt_fine = float(10 ** gen.uniform(-4, 1))
        m = int(gen.integers(2, 9))
        n_windows = int(gen.integers(1, 9))
        count = 30_000 // n_windows + 1
        params_fine = make_params(eps, dt_fine)
        params_coarse = make_params(eps, m * dt_fine)
        _, _, events = sampling.coupled_terminals_with_events(
            params_fine, params_coarse, m, n_windows, 300, 0, 0, count
        )
        total = total + events
    elapsed = time.monotonic() - t0
    ok = (
        total.phantom_coarse == 0
        and total.fine_without_coarse > 0
        and elapsed <= 60.0
    )
    _line(
        4, ok,
        f"{total.windows} windows: phantom coarse {total.phantom_coarse} (= 0), "
        f"fine-without-coarse {total.fine_without_coarse} (> 0), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_05_marginal_preservation():
    t0 = time.monotonic()
    n = 100_000

    m = 4
    seeds = rng.stream_seed(100, 0, np.arange(n, dtype=np.uint64))
    raw = np.stack([rng.raw_draw(seeds, np.uint64(k)) for k in range(m)], axis=1)
    xi_coarse = rng.normal_from_raw(raw).sum(axis=1) / math.sqrt(m)
    p_norm = sps.kstest(xi_coarse, "norm").pvalue

    m_u = 7
    seeds_u = rng.stream_seed(101, 0, np.arange(n, dtype=np.uint64))
    raw_u = np.stack([rng.raw_draw(seeds_u, np.uint64(k)) for k in range(m_u)], axis=1)
    alpha_coarse = rng.uniform_from_raw(raw_u).max(axis=1) ** m_u
    p_unif = sps.kstest(alpha_coarse, "uniform").pvalue

    params_fine = make_params(0.5, 0.1)
    params_coarse = make_params(0.5, 0.5)
    _, coupled_coarse = sampling.coupled_terminals(
        params_fine, params_coarse, 5, 4, 200, 0, 0, n
    )
    independent = sampling.single_level_terminals(params_coarse, 4, 201, 0, 0, n)
    p_two = sps.ks_2samp(coupled_coarse, independent).pvalue

    elapsed = time.monotonic() - t0
    ok = min(p_norm, p_unif, p_two) > 0.01 and elapsed <= 60.0
    _line(
        5, ok,
        f"KS p-values: coarsened normals {p_norm:.3f}, coarsened uniforms "
        f"{p_unif:.3f}, two-sample terminals {p_two:.3f} (all > 0.01), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_06_regime_slopes():
    cfg = LevelStudyConfig(
        epsilon=1.0, t_star=5.0, dt0=1.0, n_levels=7,
        samples_per_level=100_000, seed=0, workers=WORKERS,
    )
    rows = level_study(cfg)
    dt = np.array([r.dt for r in rows[1:]])
    var_slope = float(np.polyfit(np.log(dt), np.log([r.var_diff for r in rows[1:]]), 1)[0])
    mean_slope = float(
        np.polyfit(np.log(dt), np.log([r.abs_mean_diff for r in rows[1:]]), 1)[0]
    )
    in_band = lambda s: 0.7 <= s <= 1.3  # noqa: E731
    ok = in_band(var_slope) and in_band(mean_slope)
    signs = "".join("+" if r.mean_diff > 0 else "-" for r in rows[1:])
    _line(
        6, ok,
        f"eps = 1: variance slope {var_slope:.3f}, |mean| slope {mean_slope:.3f}, "
        f"band [0.7, 1.3]; mean-difference signs across levels: {signs}",
    )
    assert ok, (
        "this regime is outside the O(dt) window at these levels: the exact "
        "mean-difference ladder changes sign inside the fit and the variance "
        "slope sits just below the band (closed-form slopes 0.26 and 0.695)"
    )


def test_criterion_07_preasymptotic_growth():
    cfg = LevelStudyConfig(
        epsilon=0.01, t_star=5.0, dt0=5.0, n_levels=5,
        samples_per_level=100_000, seed=1, workers=WORKERS,
    )
    rows = level_study(cfg)
    coarse = rows[1]  # coupled pair at dt = 2.5
    fine = rows[4]  # coupled pair at dt = 0.3125
    assert coarse.dt == pytest.approx(2.5)
    assert fine.dt == pytest.approx(0.3125)
    ok = fine.var_diff > coarse.var_diff
    _line(
        7, ok,
        f"eps = 0.01: V[diff] at dt 0.3125 = {fine.var_diff:.4f} > "
        f"V[diff] at dt 2.5 = {coarse.var_diff:.4f}",
    )
    assert ok


def test_criterion_08_adaptive_cost_bands(run_rmse_point1, run_rmse_point01):
    report_1 = run_rmse_point1
    report_01, elapsed = run_rmse_point01
    p_after_level0_1 = [row.n_samples for row in report_1.rows[1:]]
    p_after_level0_01 = [row.n_samples for row in report_01.rows[1:]]
    decreasing_1 = all(a > b for a, b in zip(p_after_level0_1, p_after_level0_1[1:]))
    decreasing_01 = all(a > b for a, b in zip(p_after_level0_01, p_after_level0_01[1:]))
    cost_ok_1 = 8_062 / 3 <= report_1.total_cost <= 8_062 * 3
    cost_ok_01 = 10_102_066 / 3 <= report_01.total_cost <= 10_102_066 * 3
    time_ok = elapsed <= 600.0
    ok = (
        report_1.converged and report_01.converged
        and cost_ok_1 and cost_ok_01
        and decreasing_1 and decreasing_01
        and time_ok
    )
    _line(
        8, ok,
        f"E=0.1: cost {report_1.total_cost:.0f} (band [2687, 24186]), "
        f"P decreasing {decreasing_1}; "
        f"E=0.01: cost {report_01.total_cost:.0f} (band [3367355, 30306198]), "
        f"P decreasing {decreasing_01}, {elapsed:.0f}s (<= 600)",
    )
    assert ok


def test_criterion_09_speedup_band(run_rmse_point01):
    report, _ = run_rmse_point01
    comparison = classical_equivalent(report)
    ok = 1.5 <= comparison.speedup <= 6.0
    _line(
        9, ok,
        f"E=0.01 classical-vs-multilevel speedup {comparison.speedup:.2f}, "
        f"band [1.5, 6.0] ({comparison.samples} classical samples)",
    )
    assert ok


def test_criterion_10_coarse_horizon_strategy_wins(
    run_rmse_point01, run_rmse_point01_coarse_horizon
):
    geometric, _ = run_rmse_point01
    coarse_horizon = run_rmse_point01_coarse_horizon
    ok = coarse_horizon.total_cost < geometric.total_cost
    _line(
        10, ok,
        f"same seed, E=0.01: coarse-horizon cost {coarse_horizon.total_cost:.0f} "
        f"< geometric cost {geometric.total_cost:.0f}",
    )
    assert ok


def test_criterion_11_determinism_across_worker_counts(tmp_path):
    t0 = time.monotonic()
    study_args = [
        "level-study", "--epsilon", "0.5", "--t-star", "1.0", "--dt0", "0.5",
        "--max-levels", "4", "--samples-per-level", "5000", "--seed", "3",
    ]
    run_args = [
        "mlmc-run", "--epsilon", "0.5", "--t-star", "0.5", "--rmse", "0.1",
        "--seed", "9",
    ]
    outputs = {}
    for workers in ("1", "8"):
        study_out = tmp_path / f"study_w{workers}.csv"
        run_out = tmp_path / f"run_w{workers}"
        assert cli.main(study_args + ["--workers", workers, "--out", str(study_out)]) == 0
        assert cli.main(run_args + ["--workers", workers, "--out", str(run_out)]) == 0
        outputs[workers] = (
            study_out.read_bytes(),
            (tmp_path / f"run_w{workers}.csv").read_bytes(),
            (tmp_path / f"run_w{workers}.json").read_bytes(),
        )
    elapsed = time.monotonic() - t0
    identical = outputs["1"] == outputs["8"]
    ok = identical and elapsed <= 60.0
    _line(
        11, ok,
        f"level-study CSV and mlmc-run CSV+JSON byte-identical at workers 1 vs 8: "
        f"{identical}, {elapsed:.1f}s",
    )
    assert ok
    # The JSON carries the knob-free result; sanity check it parses.
    body = json.loads(outputs["1"][2])
    assert "workers" not in body


def test_criterion_12_small_instance_brute_force():
    worst = 0.0
    cases = 0
    for eps in (0.05, 0.3, 1.0, 2.0):
        for dt in (0.01, 0.3, 1.0, 4.0):
            for n in range(0, 7):
                exact = exact_second_moment(MomentQuery(eps, dt, n))
                brute = enumerated_second_moment(eps, dt, n)
                scale = max(abs(brute), 1e-300)
                worst = max(worst, abs(exact - brute) / scale)
                cases += 1
    ok = worst <= 1e-10
    _line(
        12, ok,
        f"{cases} enumerated cases (N <= 6): worst relative error {worst:.2e} (<= 1e-10)",
    )
    assert ok


@pytest.mark.skipif(
    not os.environ.get("KINETIC_MLMC_LONG_TESTS"),
    reason="set KINETIC_MLMC_LONG_TESTS=1 to run the E=0.001 study (tens of minutes)",
)
def test_criterion_08_long_rmse_point001():
    t0 = time.monotonic()
    # larger chunks amortise the per-step dispatch over ~1e10 particle steps
    cfg = AdaptiveConfig(
        epsilon=0.1, t_star=0.5, rmse=0.001, seed=7, workers=WORKERS,
        chunk_size=131_072,
    )
    report = run_adaptive(cfg)
    comparison = classical_equivalent(report)
    elapsed = time.monotonic() - t0
    cost_ok = 1.74e9 / 3 <= report.total_cost <= 1.74e9 * 3
    speed_ok = 7.0 <= comparison.speedup <= 30.0
    ok = report.converged and cost_ok and speed_ok
    _line(
        8, ok,
        f"[long] E=0.001: cost {report.total_cost:.3e} (band [5.8e8, 5.2e9]), "
        f"speedup {comparison.speedup:.1f} (band [7, 30]), {elapsed:.0f}s",
    )
    assert ok
