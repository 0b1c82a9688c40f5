"""Steady (possibly rotating zigzag) fronts as fixed points, without time stepping.

A front travelling at ``c_xi`` and rotating at ``c_eta`` solves::

    c_xi u_xi + c_eta u_eta + div(A_i grad u_i) + f(u) = 0
    div((A_i + A_e) grad u_i) = div(A_e grad u)

with ``u -> 1, 0`` at ``xi -> -inf, +inf``. Subtracting ``f0 u`` on both
sides with ``f0 = (f'(0) + f'(1)) / 2 < 0`` gives a linear problem per
transverse mode, solved with the right-hand side frozen at the previous
iterate; the speeds are then refreshed from the new profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .analytic import front_profile
from .banded import Tridiag
from .blocktri import BlockTridiagLU
from .reaction import f0_shift, f_cubic
from .strip import StripField, StripGrid, front_position, shift_values
from .symbols import ConductivityParams, directional_matrices

log = logging.getLogger(__name__)


class Diverged(RuntimeError):
    """The fixed-point loop did not settle within the iteration budget."""


class PlanarCollapse(Diverged):
    """A zigzag seed relaxed to the planar front: no zigzag at these parameters."""


@dataclass
class FrontSolution:
    grid: StripGrid
    u: np.ndarray  # interior nodes x eta samples
    c_xi: float
    c_eta: float
    params: ConductivityParams
    theta: float
    alpha: float
    iterations: int = 0
    residual: float = np.nan

    @property
    def d(self) -> float:
        return self.grid.d

    def field(self) -> StripField:
        return StripField(u=self.u.copy())

    def eta_variation(self) -> float:
        """Largest deviation of ``u`` from its eta-mean (0 for a planar front)."""
        return float(np.abs(self.u - self.u.mean(axis=1, keepdims=True)).max())


class _Operators:
    """Per-mode stencils of one ``(grid, params, theta)`` setting."""

    def __init__(self, grid: StripGrid, params: ConductivityParams, theta: float):
        self.grid = grid
        self.params, self.theta = params, theta
        self.mats = directional_matrices(params, theta)
        self.Li, self.Le = [], []
        for l in range(grid.n_modes):
            Li, Le = grid.mode_operators(self.mats, l)
            self.Li.append(Li)
            self.Le.append(Le)
        self.w = grid.wavenumbers.copy()
        self.nyq = grid.n_eta // 2
        self._stack = {}

    def stacked(self, name):
        if name not in self._stack:
            ops = getattr(self, name)
            self._stack[name] = tuple(np.stack([np.asarray(getattr(L, k), dtype=complex) for L in ops], axis=1)
                                      for k in ("lo", "di", "up"))
        return self._stack[name]

    def apply(self, name, X, left0=0.0):
        """Apply the per-mode stencils to mode data ``X`` (n_xi x n_modes); mode 0 left limit ``left0``."""
        lo, di, up = self.stacked(name)
        out = di * X
        out[1:] += lo[1:] * X[:-1]
        out[:-1] += up[:-1] * X[1:]
        out[0, 0] += lo[0, 0] * left0
        return out

    def elliptic_lu(self):
        if "ell" not in self._stack:
            eye = Tridiag.identity(self.grid.n_xi)
            zero = eye * 0.0
            self._stack["ell"] = BlockTridiagLU(
                [(eye, zero, zero, Li + Le) for Li, Le in zip(self.Li, self.Le)], label="(elliptic)")
        return self._stack["ell"]

    def solve_ui(self, U):
        """``u_i`` modes from ``u`` modes via the elliptic row, ``u_i = 0`` at both ends."""
        rhs = self.apply("Le", U, 1.0)
        return self.elliptic_lu().solve(np.zeros_like(U), rhs)[:, :, 1]


def _eta_derivative(ops: _Operators, U):
    D = 1j * ops.w[None, :] * U
    D[:, ops.nyq] = 0.0
    return D


def shifted_linear_solve(rhs: np.ndarray, grid: StripGrid, params: ConductivityParams, theta: float,
                         c_xi: float, c_eta: float, f0: float = -0.5, ops: Optional[_Operators] = None):
    """Solve ``c_xi u' + i c_eta w u + L_i u_i + f0 u = rhs`` with the elliptic row, per mode.

    ``rhs`` is the mode data ``(n_xi, n_modes)`` of the first row. The
    limits are ``u = 1`` at ``-inf`` for mode 0 and zero otherwise; ``u_i``
    is pinned to zero at both ends. Returns the ``(u, u_i)`` mode arrays.
    """
    if f0 >= 0:
        raise ValueError("f0 must be negative")
    ops = ops or _Operators(grid, params, theta)
    systems = []
    for l in range(grid.n_modes):
        w = ops.w[l] if l != ops.nyq else 0.0
        P = (grid.D1 * c_xi).shift_diag(1j * c_eta * w + f0)
        systems.append((P, ops.Li[l], -ops.Le[l], ops.Li[l] + ops.Le[l]))
    lu = BlockTridiagLU(systems, label=f"(c_xi={c_xi:g}, c_eta={c_eta:g})")
    r0 = np.array(rhs, dtype=complex)
    r1 = np.zeros_like(r0)
    # move the known limit u(-inf)=1 of mode 0 to the right-hand side
    r0[0, 0] -= c_xi * grid.D1.lo[0]
    r1[0, 0] += ops.Le[0].lo[0]
    x = lu.solve(r0, r1)
    return x[:, :, 0], x[:, :, 1]


def update_c_xi(u: np.ndarray, grid: StripGrid, alpha: float, ops: Optional[_Operators] = None,
                Ui: Optional[np.ndarray] = None) -> float:
    """``c_xi`` from integrating the front equation over the strip.

    In the continuum ``c_xi = int f(u) dxi`` (eta-mean). With ``ops`` and
    the ``u_i`` modes the discrete identity is used instead: the mode-0 row
    summed with the quadrature weights, solved for ``c_xi``. It differs from
    the plain quadrature by ``O(dz^2)`` but makes the discrete fixed point
    exactly steady, so the front does not creep.
    """
    w = grid.weights
    fint = float(np.dot(w, f_cubic(u, alpha).mean(axis=1)))
    if ops is None or Ui is None:
        return fint
    u0 = u.mean(axis=1)
    ux = grid.D1.apply(u0, 1.0, 0.0)
    diff = ops.Li[0].apply(Ui[:, 0].real, 0.0, 0.0)
    return float(-(fint + np.dot(w, diff)) / np.dot(w, ux))


def _residual_modes(ops: _Operators, U, Ui, c_xi, c_eta, alpha):
    """Mode data of ``c_xi u_xi + c_eta u_eta + div(A_i grad u_i) + f(u)``."""
    g = ops.grid
    Ux = g.D1.apply(U, 0.0, 0.0)
    Ux[0, 0] += g.D1.lo[0] * 1.0
    r = c_xi * Ux + c_eta * _eta_derivative(ops, U) + ops.apply("Li", Ui)
    r += g.to_modes(f_cubic(g.from_modes(U), alpha))
    return r


def _inner(grid, A, B):
    """Discrete L2 inner product of mode data (Parseval with the rfft half-spectrum)."""
    wt = np.full(grid.n_modes, 2.0)
    wt[0] = 1.0
    if grid.n_eta % 2 == 0:
        wt[-1] = 1.0
    return float(np.real(np.einsum("j,jl,jl,l->", grid.weights, A, np.conj(B), wt)) * grid.d)


def update_c_eta(U, Ui, grid: StripGrid, ops: _Operators, c_xi: float, alpha: float) -> float:
    """Least-squares rotation speed with ``u_i`` held fixed; 0 for eta-independent ``u``."""
    D = _eta_derivative(ops, U)
    nrm = _inner(grid, D, D)
    if nrm < 1e-24:
        return 0.0
    r0 = _residual_modes(ops, U, Ui, c_xi, 0.0, alpha)
    return -_inner(grid, D, r0) / nrm


def front_residual(sol: FrontSolution) -> float:
    """L2 norm of the travelling-front equation, with ``u_i`` re-solved from ``u``."""
    ops = _Operators(sol.grid, sol.params, sol.theta)
    U = sol.grid.to_modes(sol.u)
    Ui = ops.solve_ui(U)
    r = _residual_modes(ops, U, Ui, sol.c_xi, sol.c_eta, sol.alpha)
    return float(np.sqrt(max(_inner(sol.grid, r, r), 0.0)))


def _level_phase(u, grid) -> Optional[float]:
    """Eta-shift placing the first harmonic of the 1/2 level set's peak at ``d/2``."""
    from .diagnostics import extract_level_set
    try:
        ls = extract_level_set(StripField(u=u), grid)
    except ValueError:
        return None
    y = np.nan_to_num(ls.xi_half - np.nanmean(ls.xi_half))
    c1 = np.fft.rfft(y)[1]
    if abs(c1) < 1e-8 * grid.n_eta:
        return None
    # peak of the first harmonic at eta_p = -arg(c1) d / (2 pi)
    eta_p = np.mod(-np.angle(c1) * grid.d / (2 * np.pi), grid.d)
    return float(0.5 * grid.d - eta_p)


def _shift_eta(U, ops: _Operators, delta: float):
    ph = np.exp(-1j * ops.w * delta)
    ph[ops.nyq] = np.cos(ops.w[ops.nyq] * delta)
    return U * ph[None, :]


def _sweep(u, c_xi, c_eta, grid, ops, alpha, f0, zigzag, recentre):
    """One fixed-point sweep with the gauges applied; returns ``(u, U, Ui, c_xi, c_eta)``."""
    rhs = grid.to_modes(f0 * u - f_cubic(u, alpha))
    U, Ui = shifted_linear_solve(rhs, grid, ops.params, ops.theta, c_xi, c_eta, f0, ops)
    u_new = grid.from_modes(U)
    if not np.isfinite(u_new).all():
        raise Diverged("non-finite iterate")
    if zigzag:
        delta = _level_phase(u_new, grid)
        if delta is not None and abs(delta) > 1e-14:
            U = _shift_eta(U, ops, delta)
            Ui = _shift_eta(Ui, ops, delta)
            u_new = grid.from_modes(U)
    xc = front_position(grid, StripField(u=u_new))
    if abs(xc) > recentre:
        full = np.vstack([np.ones(grid.n_eta), u_new, np.zeros(grid.n_eta)])
        u_new = shift_values(grid, full, xc)
        U = grid.to_modes(u_new)
        Ui = ops.solve_ui(U)
    c_xi_new = update_c_xi(u_new, grid, alpha, ops, Ui)
    c_eta_new = update_c_eta(U, Ui, grid, ops, c_xi_new, alpha) if zigzag else 0.0
    return u_new, U, Ui, c_xi_new, c_eta_new


class _Anderson:
    """Type-II Anderson mixing of a fixed-point map with restart on growth."""

    def __init__(self, depth: int, growth: float = 10.0):
        self.depth = depth
        self.growth = growth
        self.reset()

    def reset(self):
        self.dG, self.dR = [], []
        self.prev = None
        self.best = np.inf

    def __call__(self, x, gx):
        r = gx - x
        rn = np.linalg.norm(r)
        if rn > self.growth * self.best:
            self.reset()
        self.best = min(self.best, rn)
        if self.prev is not None:
            g0, r0 = self.prev
            self.dG.append(gx - g0)
            self.dR.append(r - r0)
            if len(self.dG) > self.depth:
                self.dG.pop(0)
                self.dR.pop(0)
        self.prev = (gx, r)
        if not self.dR:
            return gx
        R = np.stack(self.dR, axis=1)
        gamma = np.linalg.lstsq(R, r, rcond=None)[0]
        return gx - np.stack(self.dG, axis=1) @ gamma


def iterate_front(initial: FrontSolution, tol: float = 1e-8, max_iters: int = 5000,
                  zigzag: Optional[bool] = None, recentre: float = 0.5,
                  collapse_tol: float = 1e-6, log_every: int = 0,
                  anderson: int = 0) -> FrontSolution:
    """Fixed-point iteration for ``(u, c_xi, c_eta)`` from a seed.

    Each sweep solves the shifted linear problem, refreshes ``c_xi`` and
    ``c_eta``, then fixes the gauges: the eta-phase of the level set is pinned
    every sweep and the front is moved back to ``xi = 0`` once it has drifted
    by more than ``recentre``. With ``anderson > 0`` the sweeps are combined
    by Anderson mixing of that depth; the converged state is still an exact
    fixed point of a single sweep.

    Raises
    ------
    PlanarCollapse
        A zigzag seed (``zigzag=True``; default: seed not eta-uniform) lost
        its eta-variation below ``collapse_tol``.
    Diverged
        ``max_iters`` sweeps without convergence, or non-finite iterates.
    """
    grid, params, theta, alpha = initial.grid, initial.params, initial.theta, initial.alpha
    ops = _Operators(grid, params, theta)
    f0 = f0_shift(alpha)
    if zigzag is None:
        zigzag = initial.eta_variation() > 10 * collapse_tol
    mix = _Anderson(anderson) if anderson > 0 else None
    u = initial.u.copy()
    c_xi, c_eta = initial.c_xi, initial.c_eta
    change = np.inf
    for it in range(1, max_iters + 1):
        try:
            gu, _, _, gc, ge = _sweep(u, c_xi, c_eta, grid, ops, alpha, f0, zigzag, recentre)
        except Diverged as exc:
            raise Diverged(f"{exc} at sweep {it}") from None
        change = np.abs(gu - u).max() + abs(gc - c_xi) + abs(ge - c_eta)
        if log_every and it % log_every == 0:
            log.info("sweep %d change %.3e c_xi %.8f c_eta %.3e", it, change, gc, ge)
        if zigzag:
            var = float(np.abs(gu - gu.mean(axis=1, keepdims=True)).max())
            if var < collapse_tol:
                raise PlanarCollapse(f"eta-variation {var:.2e} after {it} sweeps")
        if change < tol:
            if zigzag and var < 100 * collapse_tol:
                # converged onto a front that is planar up to the slow last digits
                raise PlanarCollapse(f"converged with eta-variation {var:.2e} after {it} sweeps")
            sol = FrontSolution(grid, gu, gc, ge, params, theta, alpha, it)
            sol.residual = front_residual(sol)
            return sol
        if mix is None:
            u, c_xi, c_eta = gu, gc, ge
        else:
            x = np.concatenate([u.ravel(), [c_xi, c_eta]])
            gx = np.concatenate([gu.ravel(), [gc, ge]])
            y = mix(x, gx)
            u, c_xi, c_eta = y[:-2].reshape(u.shape), float(y[-2]), float(y[-1])
    raise Diverged(f"no convergence in {max_iters} sweeps (last change {change:.2e})")


def planar_seed(grid: StripGrid, params: ConductivityParams, theta: float, alpha: float) -> FrontSolution:
    from .analytic import directional_front
    fr = directional_front(params, theta, alpha)
    u = np.repeat(fr.profile(grid.xi_interior)[:, None], grid.n_eta, axis=1)
    return FrontSolution(grid, u, fr.speed, 0.0, params, theta, alpha)


def zigzag_seed(grid: StripGrid, params: ConductivityParams, theta: float, alpha: float,
                theta_lo: Optional[float] = None, theta_hi: Optional[float] = None,
                corner: float = 2.0) -> FrontSolution:
    """Single-peak zigzag built from the flank geometry.

    The 1/2 level set is the polyline with flank normals along ``theta_lo``
    and ``theta_hi`` (default: the hull contact angles around ``theta``),
    smoothed over ``corner``; across it ``u`` follows the planar profile of
    the local flank direction.
    """
    from .diagnostics import synthetic_zigzag
    from .frank import contact_set, frank_plot, zigzag_velocity
    from .symbols import normal_multiplier
    from scipy.ndimage import gaussian_filter1d

    if theta_lo is None or theta_hi is None:
        arc = contact_set(frank_plot(params)).arc_containing(theta)
        if arc is None:
            raise ValueError("theta is not inside a nonconvex arc; no zigzag geometry")
        theta_lo, theta_hi = arc
    th_m, th_p = theta - theta_lo, theta_hi - theta
    ls = synthetic_zigzag(grid.d, grid.n_eta, th_m, th_p, eta_peak=0.5 * grid.d)
    h = grid.d / grid.n_eta
    zeta = gaussian_filter1d(ls.xi_half, corner / h, mode="wrap")
    zeta -= zeta.mean()
    slope = np.gradient(zeta, h)
    # local flank normal angle relative to xi: positive slope -> theta + arctan(slope)
    phi = np.arctan(slope)
    s = np.sqrt(normal_multiplier(params, theta + phi))
    dist = (grid.xi_interior[:, None] - zeta[None, :]) * np.cos(phi)[None, :]
    u = front_profile(dist / s[None, :])
    c_xi, c_eta = zigzag_velocity(params, theta, th_m, th_p, alpha)
    return FrontSolution(grid, u, c_xi, c_eta, params, theta, alpha)


def continue_theta(sol: FrontSolution, theta_new: float, **kw) -> FrontSolution:
    """Re-solve at ``theta_new`` seeded with ``sol`` (the previous angle's front)."""
    seed = replace(sol, theta=theta_new, iterations=0, residual=np.nan)
    return iterate_front(seed, **kw)


@dataclass
class ExistenceBoundary:
    theta_exists: float  # last angle with a converged zigzag
    theta_fails: Optional[float]  # first angle where it collapsed/diverged (None: never)
    path: list  # (theta, c_xi, c_eta) along the continuation

    @property
    def bracket(self) -> float:
        return np.inf if self.theta_fails is None else abs(self.theta_fails - self.theta_exists)


def trace_existence_boundary(sol: FrontSolution, theta_stop: float, step: float = 0.02,
                             min_step: float = 5e-4, **kw) -> ExistenceBoundary:
    """Continue a converged zigzag in theta toward ``theta_stop`` until it ceases to exist.

    On failure the step is halved (restarting from the last good front) until
    it falls below ``min_step``; the boundary is bracketed by the last good
    and the first failing angle. A front counts as gone once its eta-variation
    drops below ``collapse_tol`` (default ``1e-5``) during the sweeps, or
    below ``100 * collapse_tol`` at convergence.
    """
    kw.setdefault("collapse_tol", 1e-5)
    direction = np.sign(theta_stop - sol.theta)
    path = [(sol.theta, sol.c_xi, sol.c_eta)]
    good = sol
    h = step
    fail = None
    while h >= min_step:
        t_new = good.theta + direction * h
        if direction * (t_new - theta_stop) > 0:
            break
        try:
            nxt = continue_theta(good, t_new, zigzag=True, **kw)
        except Diverged as exc:
            log.info("continuation failed at theta=%.5f: %s", t_new, exc)
            fail = t_new
            h *= 0.5
            continue
        good = nxt
        path.append((good.theta, good.c_xi, good.c_eta))
    return ExistenceBoundary(good.theta, fail, path)
