"""Shared test helpers."""

from itertools import product

from kinetic_mlmc.model import make_params


def enumerated_second_moment(epsilon: float, dt: float, n_steps: int) -> float:
    """E[X_N^2] by summing over all 2^N sign chains.

    The normal increments are independent of the signs, so conditional on a
    sign path s_0..s_{N-1} the second moment is

        N * noise_step**2 + drift_step**2 * (sum_k s_k)**2.

    Each initial sign has weight 1/2; each later step keeps the sign with
    probability 1 - p + p/2 (no collision, or collision redrawing the same
    sign) and flips it with probability p/2.
    """
    params = make_params(epsilon, dt)
    p = params.p_collide
    keep, flip = 1.0 - 0.5 * p, 0.5 * p
    drift, noise = params.drift_step, params.noise_step
    total = 0.0
    for signs in product((1, -1), repeat=n_steps):
        weight = 0.5
        for prev, cur in zip(signs, signs[1:]):
            weight *= keep if cur == prev else flip
        displacement = drift * sum(signs)
        total += weight * (n_steps * noise * noise + displacement * displacement)
    return total
