"""Two-speed kinetic transport model and its particle schemes.

A particle carries a position and a velocity direction (+1 or -1).  In the
diffusive scaling the model has one stiffness parameter ``epsilon``.  The
asymptotic-preserving (AP) step below stays well defined for any time step:
it splits into a transport-diffusion update

    x' = x + sign * v_mag * dt + sqrt(2 * dt * diff_coef) * xi

followed by a collision that redraws the sign with probability ``p_collide``.
As ``epsilon -> 0`` the step degenerates to a pure random walk with unit
diffusion coefficient, and as ``dt -> 0`` it recovers the classical kinetic
scheme, which is also provided for cost comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import rng
from .errors import ParameterError, StabilityError


@dataclass(frozen=True)
class SchemeParams:
    """Coefficients of one AP time step.

    ``p_collide + p_no_collide == 1`` exactly, and ``diff_coef`` equals
    ``p_collide`` by construction.  Instances are cheap value objects;
    validation lives in :func:`make_params`.
    """

    epsilon: float
    dt: float
    v_mag: float
    diff_coef: float
    p_collide: float
    p_no_collide: float

    @property
    def drift_step(self) -> float:
        """Magnitude of the transport displacement per step."""
        return self.v_mag * self.dt

    @property
    def noise_step(self) -> float:
        """Scale multiplying the normal increment per step."""
        return math.sqrt(2.0 * self.dt) * math.sqrt(self.diff_coef)


@dataclass
class ParticleState:
    """Position and velocity direction of one particle."""

    x: float
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (-1, 1):
            raise ParameterError(f"sign must be -1 or +1, got {self.sign!r}")


def make_params(epsilon: float, dt: float) -> SchemeParams:
    """Derive AP step coefficients from the stiffness parameter and step size.

    ``dt == 0`` is permitted so the kinetic limit (v_mag = 1/epsilon, no
    diffusion, no collisions) can be inspected directly.
    """
    if not math.isfinite(epsilon) or epsilon <= 0.0:
        raise ParameterError(f"epsilon must be a positive finite number, got {epsilon!r}")
    if not math.isfinite(dt) or dt < 0.0:
        raise ParameterError(f"dt must be a non-negative finite number, got {dt!r}")
    denom = epsilon * epsilon + dt
    p_collide = dt / denom
    return SchemeParams(
        epsilon=epsilon,
        dt=dt,
        v_mag=epsilon / denom,
        diff_coef=p_collide,
        p_collide=p_collide,
        p_no_collide=1.0 - p_collide,
    )


def ap_transport_diffusion_step(
    state: ParticleState,
    params: SchemeParams,
    xi: float,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> ParticleState:
    """Move the particle one step; the sign is untouched.

    The keyword switches zero out either displacement term.  They exist for
    trajectory demonstrations that show the transport and diffusion parts of
    the coupling in isolation.
    """
    drift = state.sign * params.drift_step if with_transport else 0.0
    noise = params.noise_step * xi if with_diffusion else 0.0
    return ParticleState(state.x + drift + noise, state.sign)


def ap_collision_step(
    state: ParticleState, params: SchemeParams, alpha: float, sign_draw: int
) -> ParticleState:
    """Redraw the sign when ``alpha >= p_no_collide``, else keep the state.

    ``alpha`` is the collision uniform; ``sign_draw`` is the replacement sign
    and is only consulted when the collision actually happens.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    if alpha >= params.p_no_collide:
        return ParticleState(state.x, sign_draw)
    return ParticleState(state.x, state.sign)


def classical_step(
    state: ParticleState, epsilon: float, dt: float, alpha: float, sign_draw: int
) -> ParticleState:
    """One step of the classical kinetic scheme (velocity +-1/epsilon).

    Requires ``dt <= epsilon**2``; the collision probability dt/epsilon**2
    would leave [0, 1] otherwise and the scheme is unstable there.
    """
    if not math.isfinite(epsilon) or epsilon <= 0.0:
        raise ParameterError(f"epsilon must be a positive finite number, got {epsilon!r}")
    if not math.isfinite(dt) or dt < 0.0:
        raise ParameterError(f"dt must be a non-negative finite number, got {dt!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    eps_sq = epsilon * epsilon
    if dt > eps_sq:
        raise StabilityError(
            f"classical scheme requires dt <= epsilon**2 ({dt!r} > {eps_sq!r})"
        )
    x = state.x + state.sign * (dt / epsilon)
    p_no_collide = 1.0 - dt / eps_sq
    sign = sign_draw if alpha >= p_no_collide else state.sign
    return ParticleState(x, sign)


def simulate_path(
    initial: ParticleState,
    params: SchemeParams,
    n_steps: int,
    stream: rng.RngStream,
    *,
    with_transport: bool = True,
    with_diffusion: bool = True,
) -> ParticleState:
    """Run ``n_steps`` AP steps from ``initial`` using draws from ``stream``.

    Per step the stream is consumed in the order (xi, alpha, sign), where the
    sign draw happens only when the collision fires.  The initial state is
    supplied by the caller; samplers draw the customary fair initial sign as
    draw 0 of the same stream before calling this.
    """
    if n_steps < 0:
        raise ParameterError(f"n_steps must be non-negative, got {n_steps!r}")
    state = initial
    for _ in range(n_steps):
        xi = stream.draw_normal()
        state = ap_transport_diffusion_step(
            state, params, xi, with_transport=with_transport, with_diffusion=with_diffusion
        )
        alpha = stream.draw_uniform()
        if alpha >= params.p_no_collide:
            state = ap_collision_step(state, params, alpha, stream.draw_sign())
    return state


@dataclass(frozen=True)
class QoiSpec:
    """A named payoff evaluated on terminal positions.

    ``fn`` must accept both floats and numpy arrays (elementwise).
    """

    name: str
    fn: Callable


_QOI_REGISTRY: dict[str, QoiSpec] = {}


def register_qoi(name: str, fn: Callable) -> QoiSpec:
    """Register a payoff under ``name`` and return its spec."""
    spec = QoiSpec(name, fn)
    _QOI_REGISTRY[name] = spec
    return spec


def get_qoi(name: str) -> QoiSpec:
    """Look up a registered payoff; unknown names are parameter errors."""
    try:
        return _QOI_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_QOI_REGISTRY))
        raise ParameterError(f"unknown qoi {name!r} (registered: {known})") from None


register_qoi("x2", lambda x: x * x)
register_qoi("x", lambda x: x)
