"""Coupled fine/coarse stepping that shares randomness across levels.

One coarse step of size M*dt_fine reuses the draws of the M fine sub-steps
it spans:

* coarse normal increment: sum of the fine increments divided by sqrt(M),
  so it is again standard normal;
* coarse collision uniform: the maximum of the fine collision uniforms
  raised to the power M, which maps the maximum back to a uniform;
* on a coarse collision, the new coarse sign copies the post-collision sign
  of the LAST fine sub-step that collided.

Because the fine no-collision probability satisfies p_nc_fine^M <= p_nc_coarse,
a coarse collision implies at least one fine collision; the converse can
fail, which is what decorrelates the levels gently.  A coarse collision with
no colliding fine sub-step is mathematically impossible and is treated as an
internal defect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ParameterError
from .model import ParticleState, SchemeParams, ap_collision_step, ap_transport_diffusion_step


@dataclass
class CoupledStepRecord:
    """Draws of one fine window together with their coarsened values.

    ``sign_fine[m]`` is the velocity direction after sub-step m's collision
    stage, which is exactly the draw a coarse collision copies.
    """

    xi_fine: np.ndarray
    alpha_fine: np.ndarray
    sign_fine: np.ndarray
    xi_coarse: float
    alpha_coarse: float


@dataclass
class CoupledPair:
    """Fine and coarse particle advancing through a shared window."""

    fine: ParticleState
    coarse: ParticleState
    params_fine: SchemeParams
    params_coarse: SchemeParams

    @property
    def refine_factor(self) -> int:
        """Integer ratio of the coarse step to the fine step."""
        return refine_factor_for(self.params_fine.dt, self.params_coarse.dt)


def refine_factor_for(dt_fine: float, dt_coarse: float) -> int:
    """Validate that dt_coarse is an integer multiple of dt_fine and return it."""
    if dt_fine <= 0.0 or dt_coarse <= 0.0:
        raise ParameterError("step sizes must be positive")
    ratio = dt_coarse / dt_fine
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, abs(ratio)):
        raise ParameterError(
            f"dt_coarse must be an integer multiple of dt_fine (ratio {ratio!r})"
        )
    return m


def coarsen_xi(xi_fine) -> float:
    """Coarse normal increment from the fine increments of one window.

    Accumulates in sub-step order, matching the batch kernels bit for bit.
    """
    arr = np.asarray(xi_fine, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParameterError("cannot coarsen an empty window")
    total = 0.0
    for v in arr:
        total = total + float(v)
    return total / math.sqrt(arr.size)


def coarsen_alpha(alpha_fine) -> float:
    """Coarse collision uniform from the fine uniforms of one window."""
    arr = np.asarray(alpha_fine, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParameterError("cannot coarsen an empty window")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ParameterError("collision uniforms must lie in [0, 1]")
    return float(np.float64(arr.max()) ** arr.size)


def fine_window(
    state: ParticleState,
    params_fine: SchemeParams,
    refine_factor: int,
    stream: rng.RngStream,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> tuple[ParticleState, CoupledStepRecord]:
    """Advance the fine particle M sub-steps and record what the coarse reuses."""
    if refine_factor < 1:
        raise ParameterError(f"refine_factor must be at least 1, got {refine_factor!r}")
    m_steps = int(refine_factor)
    xi = np.empty(m_steps, dtype=np.float64)
    alpha = np.empty(m_steps, dtype=np.float64)
    signs = np.empty(m_steps, dtype=np.int64)
    xi_total = 0.0
    alpha_max = 0.0
    for m in range(m_steps):
        x = stream.draw_normal()
        state = ap_transport_diffusion_step(
            state, params_fine, x, with_transport=with_transport, with_diffusion=with_diffusion
        )
        a = stream.draw_uniform()
        if a >= params_fine.p_no_collide:
            state = ap_collision_step(state, params_fine, a, stream.draw_sign())
        xi[m] = x
        alpha[m] = a
        signs[m] = state.sign
        xi_total = xi_total + x
        alpha_max = max(alpha_max, a)
    record = CoupledStepRecord(
        xi_fine=xi,
        alpha_fine=alpha,
        sign_fine=signs,
        xi_coarse=xi_total / math.sqrt(m_steps),
        alpha_coarse=float(np.float64(alpha_max) ** m_steps),
    )
    return state, record


def coupled_coarse_window(
    pair: CoupledPair,
    record: CoupledStepRecord,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> ParticleState:
    """Advance the coarse particle one step by reusing the fine window draws."""
    state = ap_transport_diffusion_step(
        pair.coarse,
        pair.params_coarse,
        record.xi_coarse,
        with_transport=with_transport,
        with_diffusion=with_diffusion,
    )
    if record.alpha_coarse >= pair.params_coarse.p_no_collide:
        colliding = np.nonzero(record.alpha_fine >= pair.params_fine.p_no_collide)[0]
        if colliding.size == 0:
            raise RuntimeError(
                "internal defect: coarse collision in a window with no fine collision"
            )
        state = ParticleState(state.x, int(record.sign_fine[colliding[-1]]))
    return state


def coupled_path_pair(
    initial: ParticleState,
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    n_coarse_steps: int,
    stream: rng.RngStream,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> tuple[ParticleState, ParticleState]:
    """Advance a coupled pair from a shared initial state over a full horizon.

    The fine particle moves first within each window; the coarse particle
    then consumes the recorded draws.  With a refine factor of 1 the two
    trajectories are identical bit for bit.
    """
    if n_coarse_steps < 0:
        raise ParameterError(f"n_coarse_steps must be non-negative, got {n_coarse_steps!r}")
    m = refine_factor_for(params_fine.dt, params_coarse.dt)
    fine = ParticleState(initial.x, initial.sign)
    coarse = ParticleState(initial.x, initial.sign)
    for _ in range(n_coarse_steps):
        fine, record = fine_window(
            fine,
            params_fine,
            m,
            stream,
            with_transport=with_transport,
            with_diffusion=with_diffusion,
        )
        coarse = coupled_coarse_window(
            CoupledPair(fine, coarse, params_fine, params_coarse),
            record,
            with_transport=with_transport,
            with_diffusion=with_diffusion,
        )
    return fine, coarse
