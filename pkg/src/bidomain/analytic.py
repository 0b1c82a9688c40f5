"""Closed-form planar fronts, small-wavenumber eigenvalue coefficients and planar pulses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .symbols import ConductivityParams, normal_multiplier

SQRT2 = np.sqrt(2.0)


def front_profile(xi):
    """Normalised front ``1 / (1 + exp(xi / sqrt 2))``, overflow-safe."""
    xi = np.asarray(xi, dtype=float)
    return 0.5 * (1.0 - np.tanh(xi / (2.0 * SQRT2)))


def front_profile_prime(xi):
    xi = np.asarray(xi, dtype=float)
    t = np.tanh(xi / (2.0 * SQRT2))
    return -(1.0 - t * t) / (4.0 * SQRT2)


def front_speed(alpha: float) -> float:
    """Speed of the normalised front, ``sqrt(2) (1/2 - alpha)``."""
    return SQRT2 * (0.5 - alpha)


@dataclass(frozen=True)
class PlanarFront:
    profile: Callable
    derivative: Callable
    speed: float
    theta: Optional[float] = None
    scale: float = 1.0


def normalized_front(alpha: float) -> PlanarFront:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return PlanarFront(front_profile, front_profile_prime, front_speed(alpha))


def directional_front(params: ConductivityParams, theta: float, alpha: float) -> PlanarFront:
    """Front travelling along ``n^theta``: stretched by ``sqrt(Q(n^theta))``."""
    s = float(np.sqrt(normal_multiplier(params, theta)))
    return PlanarFront(
        profile=lambda xi: front_profile(np.asarray(xi) / s),
        derivative=lambda xi: front_profile_prime(np.asarray(xi) / s) / s,
        speed=s * front_speed(alpha),
        theta=theta,
        scale=s,
    )


def thm21_coefficients(params: ConductivityParams, theta: float):
    """``(alpha0, alpha1)`` in ``lambda_l = i alpha1 c_f l - alpha0 l^2 + O(l^3)``."""
    a, b = params.a, params.b
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    p = b + a * c2
    denom = 1.0 - p * p
    alpha0 = (0.5 + 0.5 * (3 * a * a * c2 * c2 + 2 * a * b * c2 - 4 * a * a * s2 * s2 - b * b)
              - 2 * a * a * s2 * s2 * p * p / denom)
    alpha1 = 2 * a * s2 * p / denom
    return float(alpha0), float(alpha1)


@dataclass
class NormalizedPulse:
    """Travelling pulse of ``u_t = u_xx + f(u) - v``, ``v_t = eps (u - gamma v)``.

    Profiles live on the finite nodes of a compactified 1D mesh and are
    centred so the leading-edge crossing sits at ``xi = 0``.
    ``exists`` is ``False`` when the excitation died out during marching.
    """

    xi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    speed: float
    exists: bool = True
    converged: bool = True
    t: float = 0.0
    kmap: float = 100.0
    n_xi: int = 0

    def profile(self, x):
        """Cubic interpolation of ``(u, v)`` at arbitrary ``x``; zero outside the mesh."""
        from scipy.interpolate import CubicSpline
        x = np.asarray(x, dtype=float)
        out = []
        for y in (self.u, self.v):
            cs = CubicSpline(self.xi, y)
            out.append(np.where((x >= self.xi[0]) & (x <= self.xi[-1]), cs(np.clip(x, self.xi[0], self.xi[-1])), 0.0))
        return out[0], out[1]


def normalized_pulse(reaction, n_xi: int = 2999, kmap: float = 100.0, dt: float = 0.1,
                     check_every: float = 20.0, tol: float = 1e-8, t_max: float = 30000.0,
                     initial_width: float = 20.0, speed_window: float = 100.0) -> NormalizedPulse:
    """March the 1D FHN pulse in its own frame until the shape is steady.

    Starting from a plateau of width ``initial_width`` with ``v = 0``, the
    zero-mode strip machinery with unit diffusion is stepped and regridded on
    the leading edge. The shape is converged when successive checks, spaced
    ``check_every`` apart, differ by less than ``tol`` in L-infinity. If
    ``max u`` drops below ``alpha`` first, the result has ``exists=False``.
    """
    from .reaction import ReactionParams
    from .strip import BidomainCN, FrontLost, StripField, StripGrid, regrid, strang_step_strip
    from .symbols import DirectionalMatrices

    if not isinstance(reaction, ReactionParams) or not reaction.is_fhn:
        raise ValueError("normalized_pulse needs FitzHugh-Nagumo parameters")
    grid = StripGrid(1.0, 2, n_xi, kmap)
    mats = DirectionalMatrices.scalar_diffusion(1.0)
    xi = grid.xi_interior
    u0 = front_profile(xi) * front_profile(-xi - initial_width)
    u0 = np.repeat(u0[:, None], 2, axis=1)
    fld = StripField(u=u0, u_minus=0.0, u_plus=0.0, v=np.zeros_like(u0))
    stepper = BidomainCN(grid, mats, dt)
    every = max(1, int(round(check_every / dt)))
    keep = max(2, int(round(speed_window / dt)))
    ts, pos = [], []
    prev = None
    exists, converged = True, False
    n = 0
    while n * dt < t_max:
        n += 1
        fld = strang_step_strip(fld, grid, mats, reaction, dt, stepper)
        if fld.u.max() < reaction.alpha:
            exists = False
            break
        try:
            fld = regrid(fld, grid)
        except FrontLost:
            exists = False
            break
        ts.append(fld.t)
        pos.append(fld.front_offset)
        if len(ts) > keep:
            del ts[0], pos[0]
        if n % every == 0:
            cur = np.concatenate([fld.u[:, 0], fld.v[:, 0]])
            if prev is not None and np.abs(cur - prev).max() < tol:
                converged = True
                break
            prev = cur
    speed = float(np.polyfit(ts, pos, 1)[0]) if len(ts) > 2 else float("nan")
    return NormalizedPulse(xi.copy(), fld.u[:, 0].copy(), fld.v[:, 0].copy(), speed,
                           exists=exists, converged=converged and exists, t=fld.t,
                           kmap=kmap, n_xi=n_xi)


def directional_pulse(params: ConductivityParams, theta: float, pulse: NormalizedPulse, xi=None):
    """Pulse along ``n^theta``: profiles stretched by ``s = sqrt(Q(n^theta))``, speed times ``s``.

    Returns ``(u, v, c)`` sampled at ``xi`` (default: the pulse mesh stretched
    by ``s``, which is the mesh of a strip grid with ``kmap`` scaled by ``s``).
    """
    s = float(np.sqrt(normal_multiplier(params, theta)))
    if xi is None:
        return pulse.u.copy(), pulse.v.copy(), s * pulse.speed
    u, v = pulse.profile(np.asarray(xi) / s)
    return u, v, s * pulse.speed
