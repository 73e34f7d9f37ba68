"""Vectorised batch simulation of single-level and coupled trajectories.

The kernels below replay, across whole batches of samples at once, exactly
the draw sequence of :func:`kinetic_mlmc.model.simulate_path` and
:func:`kinetic_mlmc.coupling.coupled_path_pair`: draw 0 of each sample's
stream is the initial sign, then each fine step consumes (xi, alpha) plus a
sign draw only when the sample collides.  Tests pin the kernels to the
scalar implementations sample by sample, bit for bit.

Samples are processed in fixed-size chunks in sample-index order.  Each
chunk is a pure function of (master_seed, level, index range), so running
chunks on any number of worker threads and folding the results in chunk
order yields byte-identical statistics for any worker count.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from . import rng
from .errors import ParameterError
from .model import SchemeParams

DEFAULT_CHUNK = 16384

_ONE = np.uint64(1)


def _initial_signs(seeds: np.ndarray, counters: np.ndarray) -> np.ndarray:
    raw = rng.raw_draw(seeds, counters)
    counters += _ONE
    return np.where(rng.signbit_from_raw(raw) == 0, 1.0, -1.0)


def single_level_terminals(
    params: SchemeParams,
    n_steps: int,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> np.ndarray:
    """Terminal positions of samples [start, start + count) at one level."""
    if count < 0 or start < 0 or n_steps < 0:
        raise ParameterError("start, count and n_steps must be non-negative")
    if count == 0:
        return np.empty(0, dtype=np.float64)
    idx = np.arange(start, start + count, dtype=np.uint64)
    seeds = rng.stream_seed(master_seed, level, idx)
    ctr = np.zeros(count, dtype=np.uint64)
    s = _initial_signs(seeds, ctr)
    x = np.zeros(count, dtype=np.float64)
    drift = params.drift_step if with_transport else 0.0
    noise = params.noise_step if with_diffusion else 0.0
    p_nc = params.p_no_collide
    for _ in range(n_steps):
        raw = rng.raw_draw(seeds, ctr)
        ctr += _ONE
        xi = rng.normal_from_raw(raw)
        x = x + s * drift + noise * xi
        raw = rng.raw_draw(seeds, ctr)
        ctr += _ONE
        alpha = rng.uniform_from_raw(raw)
        collide = alpha >= p_nc
        raw = rng.raw_draw(seeds, ctr)
        ctr += collide
        new_sign = np.where(rng.signbit_from_raw(raw) == 0, 1.0, -1.0)
        s = np.where(collide, new_sign, s)
    return x


@dataclass(frozen=True)
class WindowEvents:
    """Collision bookkeeping aggregated over coupled windows."""

    windows: int = 0
    fine_collision_windows: int = 0
    coarse_collisions: int = 0
    fine_without_coarse: int = 0
    phantom_coarse: int = 0

    def __add__(self, other: "WindowEvents") -> "WindowEvents":
        return WindowEvents(
            self.windows + other.windows,
            self.fine_collision_windows + other.fine_collision_windows,
            self.coarse_collisions + other.coarse_collisions,
            self.fine_without_coarse + other.fine_without_coarse,
            self.phantom_coarse + other.phantom_coarse,
        )


def _coupled_kernel(
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    refine_factor: int,
    n_coarse_steps: int,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    with_transport: bool,
    with_diffusion: bool,
    collect_events: bool,
):
    if refine_factor < 1:
        raise ParameterError(f"refine_factor must be at least 1, got {refine_factor!r}")
    if count < 0 or start < 0 or n_coarse_steps < 0:
        raise ParameterError("start, count and n_coarse_steps must be non-negative")
    m_steps = int(refine_factor)
    if count == 0:
        empty = np.empty(0, dtype=np.float64)
        return empty, empty, WindowEvents() if collect_events else None
    idx = np.arange(start, start + count, dtype=np.uint64)
    seeds = rng.stream_seed(master_seed, level, idx)
    ctr = np.zeros(count, dtype=np.uint64)
    s0 = _initial_signs(seeds, ctr)
    s_f = s0
    s_c = s0.copy()
    x_f = np.zeros(count, dtype=np.float64)
    x_c = np.zeros(count, dtype=np.float64)
    drift_f = params_fine.drift_step if with_transport else 0.0
    noise_f = params_fine.noise_step if with_diffusion else 0.0
    drift_c = params_coarse.drift_step if with_transport else 0.0
    noise_c = params_coarse.noise_step if with_diffusion else 0.0
    p_nc_f = params_fine.p_no_collide
    p_nc_c = params_coarse.p_no_collide
    sqrt_m = math.sqrt(m_steps)
    events = WindowEvents() if collect_events else None
    for _ in range(n_coarse_steps):
        xi_total = np.zeros(count, dtype=np.float64)
        alpha_max = np.zeros(count, dtype=np.float64)
        pending_sign = np.zeros(count, dtype=np.float64)
        fine_any = np.zeros(count, dtype=bool)
        for _ in range(m_steps):
            raw = rng.raw_draw(seeds, ctr)
            ctr += _ONE
            xi = rng.normal_from_raw(raw)
            x_f = x_f + s_f * drift_f + noise_f * xi
            raw = rng.raw_draw(seeds, ctr)
            ctr += _ONE
            alpha = rng.uniform_from_raw(raw)
            collide = alpha >= p_nc_f
            raw = rng.raw_draw(seeds, ctr)
            ctr += collide
            new_sign = np.where(rng.signbit_from_raw(raw) == 0, 1.0, -1.0)
            s_f = np.where(collide, new_sign, s_f)
            xi_total = xi_total + xi
            alpha_max = np.maximum(alpha_max, alpha)
            pending_sign = np.where(collide, s_f, pending_sign)
            fine_any |= collide
        xi_c = xi_total / sqrt_m
        alpha_c = alpha_max ** m_steps
        x_c = x_c + s_c * drift_c + noise_c * xi_c
        collide_c = alpha_c >= p_nc_c
        phantom = collide_c & ~fine_any
        if collect_events:
            events = events + WindowEvents(
                windows=count,
                fine_collision_windows=int(fine_any.sum()),
                coarse_collisions=int(collide_c.sum()),
                fine_without_coarse=int((fine_any & ~collide_c).sum()),
                phantom_coarse=int(phantom.sum()),
            )
        if phantom.any():
            raise RuntimeError(
                "internal defect: coarse collision in a window with no fine collision"
            )
        s_c = np.where(collide_c, pending_sign, s_c)
    return x_f, x_c, events


def coupled_terminals(
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    refine_factor: int,
    n_coarse_steps: int,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Terminal positions (fine, coarse) of coupled samples [start, start + count)."""
    x_f, x_c, _ = _coupled_kernel(
        params_fine,
        params_coarse,
        refine_factor,
        n_coarse_steps,
        master_seed,
        level,
        start,
        count,
        with_transport,
        with_diffusion,
        collect_events=False,
    )
    return x_f, x_c


def coupled_terminals_with_events(
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    refine_factor: int,
    n_coarse_steps: int,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> tuple[np.ndarray, np.ndarray, WindowEvents]:
    """Like :func:`coupled_terminals` but also reports collision bookkeeping."""
    x_f, x_c, events = _coupled_kernel(
        params_fine,
        params_coarse,
        refine_factor,
        n_coarse_steps,
        master_seed,
        level,
        start,
        count,
        with_transport,
        with_diffusion,
        collect_events=True,
    )
    return x_f, x_c, events


def _chunk_ranges(start: int, count: int, chunk_size: int) -> Iterator[tuple[int, int]]:
    offset = start
    remaining = count
    while remaining > 0:
        step = min(chunk_size, remaining)
        yield offset, step
        offset += step
        remaining -= step


def _ordered_map(fn: Callable, items: Iterable, workers: int) -> Iterator:
    """Map with worker threads, yielding results in input order, bounded memory."""
    if workers <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        it = iter(items)
        for item in itertools.islice(it, 2 * workers):
            pending.append(pool.submit(fn, item))
        while pending:
            result = pending.popleft().result()
            for item in itertools.islice(it, 1):
                pending.append(pool.submit(fn, item))
            yield result


def accumulate_single_level(
    params: SchemeParams,
    n_steps: int,
    qoi_fn: Callable,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    consume: Callable,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> None:
    """Feed ``consume(fine_payoffs, None)`` chunk by chunk in index order."""

    def job(span: tuple[int, int]) -> np.ndarray:
        lo, n = span
        x = single_level_terminals(params, n_steps, master_seed, level, lo, n)
        return np.asarray(qoi_fn(x), dtype=np.float64)

    for payoff in _ordered_map(job, _chunk_ranges(start, count, chunk_size), workers):
        consume(payoff, None)


def accumulate_coupled_level(
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    refine_factor: int,
    n_coarse_steps: int,
    qoi_fn: Callable,
    master_seed: int,
    level: int,
    start: int,
    count: int,
    consume: Callable,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> None:
    """Feed ``consume(fine_payoffs, coarse_payoffs)`` chunk by chunk in index order."""

    def job(span: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        lo, n = span
        x_f, x_c = coupled_terminals(
            params_fine, params_coarse, refine_factor, n_coarse_steps,
            master_seed, level, lo, n,
        )
        return (
            np.asarray(qoi_fn(x_f), dtype=np.float64),
            np.asarray(qoi_fn(x_c), dtype=np.float64),
        )

    for fine, coarse in _ordered_map(job, _chunk_ranges(start, count, chunk_size), workers):
        consume(fine, coarse)
