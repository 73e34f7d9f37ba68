"""Closed-form reference values for the AP scheme.

The second moment of the scheme after N steps separates into the diffusion
contribution and the transport contribution driven by the sign chain:

    E[X_N^2] = N * 2*dt*D + (v_mag*dt)^2 * (N + 2 * sum_{k=1}^{N-1} (N-k) q^k)

with q = 1 - p_collide, because the signs form a stationary chain with
autocorrelation q^k and the normal increments are independent of it.  The
geometric sum is evaluated in closed form with expm1/log1p so it stays
accurate when p_collide is tiny (dt far below epsilon**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .model import make_params


@dataclass(frozen=True)
class MomentQuery:
    """Scheme configuration whose exact second moment is requested."""

    epsilon: float
    dt: float
    n_steps: int


def _tail_weighted_geometric_sum(n: int, p: float) -> float:
    """sum_{k=1}^{n-1} (n-k) * (1-p)^k, stable across the whole range of p.

    Closed form: q * (n*p - (1 - q^n)) / p^2 with q = 1 - p.  For n*p below
    1e-5 the subtraction cancels, so a three-term series in p (exact limit
    n*(n-1)/2 at p = 0) is used instead; its truncation error is O((n*p)^3)
    relative.
    """
    if n <= 1:
        return 0.0
    q = 1.0 - p
    if p == 0.0:
        return 0.5 * n * (n - 1.0)
    if p == 1.0:
        # q = 0 kills every term; log1p(-p) would blow up below.
        return 0.0
    n_p = n * p
    if n_p < 1e-5:
        c2 = 0.5 * n * (n - 1.0)
        c3 = c2 * (n - 2.0) / 3.0
        c4 = c3 * (n - 3.0) / 4.0
        return q * (c2 - c3 * p + c4 * p * p)
    one_minus_qn = -math.expm1(n * math.log1p(-p))
    return q * (n_p - one_minus_qn) / (p * p)


def exact_second_moment(query: MomentQuery) -> float:
    """Exact E[X_N^2] for particles started at x = 0 with a fair sign."""
    if query.n_steps < 0:
        raise ParameterError(f"n_steps must be non-negative, got {query.n_steps!r}")
    params = make_params(query.epsilon, query.dt)
    n = int(query.n_steps)
    if n == 0:
        return 0.0
    diffusion_part = n * 2.0 * params.dt * params.diff_coef
    drift = params.v_mag * params.dt
    tail = _tail_weighted_geometric_sum(n, params.p_collide)
    return diffusion_part + drift * drift * (n + 2.0 * tail)


def heat_limit_moment(t_star: float) -> float:
    """Second moment of the limiting heat equation profile at time t_star."""
    if not math.isfinite(t_star) or t_star < 0.0:
        raise ParameterError(f"t_star must be non-negative and finite, got {t_star!r}")
    return 2.0 * t_star


def sign_autocorrelation(p_collide: float, k: int) -> float:
    """E[sign_n * sign_{n+k}] for the stationary fair sign chain."""
    if not 0.0 <= p_collide <= 1.0:
        raise ParameterError(f"p_collide must lie in [0, 1], got {p_collide!r}")
    if k < 0:
        raise ParameterError(f"lag must be non-negative, got {k!r}")
    return (1.0 - p_collide) ** k
