"""Cubic bistable kinetics and the FitzHugh-Nagumo recovery variable."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ReactionParams:
    """``f(u) = u(1-u)(u-alpha)``, plus ``g(u, v) = epsilon (u - gamma v)`` for FHN.

    ``enabled=False`` switches every reaction substep to the identity, which
    is how the splitting schemes are checked against their linear part.
    """

    alpha: float
    epsilon: Optional[float] = None
    gamma: Optional[float] = None
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if (self.epsilon is None) != (self.gamma is None):
            raise ValueError("epsilon and gamma must be given together")
        if self.epsilon is not None and not (self.epsilon > 0 and self.gamma > 0):
            raise ValueError("epsilon and gamma must be positive")

    @property
    def is_fhn(self) -> bool:
        return self.epsilon is not None

    @property
    def model(self) -> str:
        return "fhn" if self.is_fhn else "ac"


def f_cubic(u, alpha):
    return u * (1.0 - u) * (u - alpha)


def f_cubic_prime(u, alpha):
    return -3.0 * u * u + 2.0 * (1.0 + alpha) * u - alpha


def f0_shift(alpha) -> float:
    """``(f'(0) + f'(1)) / 2``, which is ``-1/2`` for the cubic."""
    return 0.5 * (f_cubic_prime(0.0, alpha) + f_cubic_prime(1.0, alpha))


def rk2(F, rate, dt):
    """Midpoint Runge-Kutta substep ``F + dt * rate(F + dt/2 * rate(F))``."""
    return F + dt * rate(F + 0.5 * dt * rate(F))


def react_u(u, v, reaction: ReactionParams, dt):
    """Advance ``u' = f(u[, v])`` with ``v`` frozen."""
    if not reaction.enabled:
        return u
    alpha = reaction.alpha
    if v is None:
        return rk2(u, lambda w: f_cubic(w, alpha), dt)
    return rk2(u, lambda w: f_cubic(w, alpha) - v, dt)


def react_v(u, v, reaction: ReactionParams, dt):
    """Advance ``v' = epsilon (u - gamma v)`` with ``u`` frozen."""
    if not reaction.enabled:
        return v
    eps, gam = reaction.epsilon, reaction.gamma
    return rk2(v, lambda w: eps * (u - gam * w), dt)
