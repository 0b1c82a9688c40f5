"""Fronts and pulses on the strip R x S^1_d.

The unbounded direction ``xi`` is compactified by ``xi = K tan(pi z / 2)``
on a uniform ``z`` mesh whose two end nodes sit at ``xi = -inf`` and
``xi = +inf`` and carry the limit values. The periodic direction ``eta`` is
spectral. One time step is Strang splitting: half a midpoint-RK2 reaction
step, a trapezoidal (Crank-Nicolson) step of the bidomain operator solved
mode by mode, another half reaction step; FHN then advances ``v``.
After each step the frame is recentred on the front (regridding).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numba as nb
import numpy as np
from scipy.optimize import brentq

from .banded import Tridiag
from .blocktri import BlockTridiagLU
from .reaction import ReactionParams, react_u, react_v
from .symbols import DirectionalMatrices

log = logging.getLogger(__name__)


class FrontLost(RuntimeError):
    """No 1/2-crossing left to track; for FHN runs this is pulse death."""


@dataclass(frozen=True)
class StripGrid:
    """Compactified ``xi`` mesh times ``n_eta`` equispaced ``eta`` samples."""

    d: float
    n_eta: int
    n_xi: int
    kmap: float = 10.0

    def __post_init__(self):
        if self.n_xi < 3:
            raise ValueError("n_xi must be at least 3")
        if self.n_eta < 2 or self.n_eta % 2:
            raise ValueError("n_eta must be even and at least 2")
        if not (self.kmap > 0 and self.d > 0):
            raise ValueError("kmap and d must be positive")
        N = self.n_xi
        dz = 2.0 / (N + 1)
        z = -1.0 + dz * np.arange(N + 2)
        z[-1] = 1.0
        zhat = -1.0 + dz * (np.arange(1, N + 2) - 0.5)
        xi = np.empty(N + 2)
        xi[1:-1] = self.g(z[1:-1])
        xi[0], xi[-1] = -np.inf, np.inf
        cache = self.__dict__
        cache["dz"] = dz
        cache["z"] = z
        cache["zhat"] = zhat
        cache["xi"] = xi
        cache["gp"] = self.gprime(z[1:-1])
        cache["gph"] = self.gprime(zhat)
        h = 1.0 / (cache["gph"] * dz)
        hm, hp = h[:-1], h[1:]
        cache["D1"] = Tridiag(-0.5 * hm, 0.5 * (hm - hp), 0.5 * hp)
        e = 1.0 / (cache["gp"] * dz)
        cache["D2"] = Tridiag(e * hm, -e * (hm + hp), e * hp)

    # the map and its derivative
    def g(self, z):
        return self.kmap * np.tan(0.5 * np.pi * np.asarray(z))

    def gprime(self, z):
        return self.kmap * 0.5 * np.pi / np.cos(0.5 * np.pi * np.asarray(z)) ** 2

    def ginv(self, xi):
        return (2.0 / np.pi) * np.arctan(np.asarray(xi) / self.kmap)

    @property
    def xi_interior(self) -> np.ndarray:
        return self.xi[1:-1]

    @property
    def eta(self) -> np.ndarray:
        return self.d * np.arange(self.n_eta) / self.n_eta

    @property
    def n_modes(self) -> int:
        return self.n_eta // 2 + 1

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_modes) / self.d

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights ``g'(z^j) dz``; the end nodes carry no weight."""
        return self.gp * self.dz

    def mode_operator(self, a: float, b: float, c: float, w: float, odd: bool = True) -> Tridiag:
        """Stencil of ``a d^2/dxi^2 + 2 i b w d/dxi - c w^2`` for one mode.

        ``odd=False`` drops the first-derivative cross term (Nyquist mode).
        """
        op = self.D2 * a
        if odd and b != 0.0 and w != 0.0:
            op = op + self.D1 * (2j * b * w)
        if w != 0.0:
            op = op.shift_diag(-c * w * w)
        return op

    def mode_operators(self, m: DirectionalMatrices, l: int):
        """``(L_i, L_e)`` stencils for rfft mode ``l``."""
        w = self.wavenumbers[l]
        odd = not (l == self.n_eta // 2)
        Li = self.mode_operator(m.a_i, m.b_i, m.c_i, w, odd)
        Le = self.mode_operator(m.a_e, m.b_e, m.c_e, w, odd)
        return Li, Le

    # spectral transforms in eta; mode 0 is the eta-mean
    def to_modes(self, u: np.ndarray) -> np.ndarray:
        return np.fft.rfft(u, axis=-1) / self.n_eta

    def from_modes(self, uh: np.ndarray) -> np.ndarray:
        return np.fft.irfft(uh * self.n_eta, n=self.n_eta, axis=-1)


def fd_first(grid: StripGrid, F: np.ndarray) -> np.ndarray:
    """Averaged one-sided first difference at interior nodes.

    ``F`` holds all ``n_xi + 2`` node values, the end entries being the
    limits at minus and plus infinity.
    """
    F = np.asarray(F)
    return grid.D1.apply(F[1:-1], F[0], F[-1])


def fd_second(grid: StripGrid, F: np.ndarray) -> np.ndarray:
    """Flux-form second difference at interior nodes (exact on constants)."""
    F = np.asarray(F)
    return grid.D2.apply(F[1:-1], F[0], F[-1])


@dataclass
class StripField:
    """State on the strip in value space: ``u[j, n]`` on interior nodes."""

    u: np.ndarray
    u_minus: float = 1.0
    u_plus: float = 0.0
    v: Optional[np.ndarray] = None
    v_minus: float = 0.0
    v_plus: float = 0.0
    front_offset: float = 0.0
    t: float = 0.0

    def copy(self) -> "StripField":
        return replace(self, u=self.u.copy(), v=None if self.v is None else self.v.copy())

    def full_u(self) -> np.ndarray:
        """``u`` with the two limit rows attached (shape ``(n_xi + 2, n_eta)``)."""
        n = self.u.shape[1]
        return np.vstack([np.full(n, self.u_minus), self.u, np.full(n, self.u_plus)])

    def full_v(self) -> np.ndarray:
        n = self.v.shape[1]
        return np.vstack([np.full(n, self.v_minus), self.v, np.full(n, self.v_plus)])


class BidomainCN:
    """Trapezoidal step of ``u_t = div(A_i grad u_i)``, ``div((A_i+A_e) grad u_i) = div(A_e grad u)``.

    With ``s = u_i^{n+1} + u_i^n`` the two rows per node read::

        u^{n+1} - dt/2 L_i s          = u^n
        -L_e u^{n+1} + (L_i + L_e) s = L_e u^n

    so a single banded solve per mode advances the step. ``u_i`` is pinned
    to zero at both infinite nodes for every mode.
    """

    def __init__(self, grid: StripGrid, mats: DirectionalMatrices, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid, self.mats, self.dt = grid, mats, dt
        n = grid.n_xi
        eye = Tridiag.identity(n)
        systems, les = [], []
        for l in range(grid.n_modes):
            Li, Le = grid.mode_operators(mats, l)
            systems.append((eye, Li * (-0.5 * dt), -Le, Li + Le))
            les.append(Le)
        self._lu = BlockTridiagLU(systems, label=f"(dt={dt:g})")
        self._le_lo = np.stack([np.asarray(L.lo, dtype=complex) for L in les], axis=1)
        self._le_di = np.stack([np.asarray(L.di, dtype=complex) for L in les], axis=1)
        self._le_up = np.stack([np.asarray(L.up, dtype=complex) for L in les], axis=1)

    def step_modes(self, uh: np.ndarray, u_minus: float, u_plus: float) -> np.ndarray:
        """Advance all modes; only mode 0 carries the limits ``u_minus, u_plus``."""
        r1 = self._le_di * uh
        r1[1:] += self._le_lo[1:] * uh[:-1]
        r1[:-1] += self._le_up[:-1] * uh[1:]
        r1[0, 0] += 2 * self._le_lo[0, 0] * u_minus
        r1[-1, 0] += 2 * self._le_up[-1, 0] * u_plus
        return self._lu.solve(uh, r1)[:, :, 0]

    def step(self, u: np.ndarray, u_minus: float = 1.0, u_plus: float = 0.0) -> np.ndarray:
        g = self.grid
        return g.from_modes(self.step_modes(g.to_modes(u), u_minus, u_plus))


def bidomain_cn_step(field: StripField, grid: StripGrid, mats: DirectionalMatrices, dt: float,
                     stepper: Optional[BidomainCN] = None) -> StripField:
    """One trapezoidal step of the linear bidomain part, returning a new field."""
    stepper = stepper or BidomainCN(grid, mats, dt)
    out = field.copy()
    out.u = stepper.step(field.u, field.u_minus, field.u_plus)
    return out


def strang_step_strip(field: StripField, grid: StripGrid, mats: DirectionalMatrices,
                      reaction: ReactionParams, dt: float,
                      stepper: Optional[BidomainCN] = None) -> StripField:
    """Reaction half step, CN step, reaction half step; then ``v`` for FHN."""
    stepper = stepper or BidomainCN(grid, mats, dt)
    out = field.copy()
    u = react_u(out.u, out.v, reaction, 0.5 * dt)
    u = stepper.step(u, out.u_minus, out.u_plus)
    u = react_u(u, out.v, reaction, 0.5 * dt)
    if reaction.is_fhn:
        out.v = react_v(u, out.v, reaction, dt)
    out.u = u
    out.t = field.t + dt
    return out


def _cubic_crossing(xs, ys, level, lo, hi):
    poly = np.polynomial.polynomial.Polynomial.fit(xs, ys, 3, domain=[xs[0], xs[-1]], window=[-1, 1])
    fun = lambda x: poly(x) - level  # noqa: E731
    if fun(lo) * fun(hi) > 0:
        return None
    return brentq(fun, lo, hi, xtol=1e-14, rtol=1e-15)


def crossing_index(profile: np.ndarray, level: float) -> Optional[int]:
    """Index ``k`` of the leading (largest-xi) falling crossing ``p[k] >= level > p[k+1]``."""
    hit = np.nonzero((profile[:-1] >= level) & (profile[1:] < level))[0]
    return int(hit[-1]) if hit.size else None


def front_position(grid: StripGrid, field: StripField, level: float = 0.5) -> float:
    """Position of the ``level`` crossing of the eta-mean of ``u``.

    The crossing is bracketed on the node mesh and refined by inverse
    interpolation with the cubic through the four surrounding finite nodes.
    """
    prof = field.full_u().mean(axis=1)
    if field.v is not None:
        # a pulse may be too oblique for its eta-mean to reach 1/2
        if field.u.max() < 0.5:
            raise FrontLost("max u < 1/2: pulse lost")
        level = min(level, 0.5 * prof.max())
    k = crossing_index(prof, level)
    if k is None:
        raise FrontLost("no 1/2-crossing of the eta-mean profile")
    xi = grid.xi
    N = grid.n_xi
    if k == 0 or k == N:
        # bracket touches an infinite node; the crossing is pinned to the finite end
        return float(xi[1] if k == 0 else xi[N])
    lo_idx = min(max(k - 1, 1), N - 3)
    idx = np.arange(lo_idx, lo_idx + 4)
    root = _cubic_crossing(xi[idx], prof[idx], level, xi[k], xi[k + 1])
    if root is None:
        t = (prof[k] - level) / (prof[k] - prof[k + 1])
        root = xi[k] + t * (xi[k + 1] - xi[k])
    return float(root)


def _shift_stencil(grid: StripGrid, shift: float):
    N = grid.n_xi
    zt = grid.ginv(grid.xi_interior + shift)
    s = (zt + 1.0) / grid.dz
    m = np.clip(np.rint(s).astype(np.int64), 1, N)
    return m, s - m


@nb.njit(cache=True)
def _lagrange3(full, m, t, out):
    for j in range(m.size):
        tj = t[j]
        wm, w0, wp = 0.5 * tj * (tj - 1.0), 1.0 - tj * tj, 0.5 * tj * (tj + 1.0)
        k = m[j]
        for c in range(full.shape[1]):
            out[j, c] = wm * full[k - 1, c] + w0 * full[k, c] + wp * full[k + 1, c]


def shift_values(grid: StripGrid, full: np.ndarray, shift: float, stencil=None) -> np.ndarray:
    """Values at ``xi^j + shift`` for interior ``j`` by 3-point Lagrange in ``z``.

    Interpolating in the computational coordinate keeps the infinite end
    nodes (which hold the limits) usable as stencil points.
    """
    m, t = stencil if stencil is not None else _shift_stencil(grid, shift)
    full = np.ascontiguousarray(full, dtype=float)
    out = np.empty((grid.n_xi, full.shape[1]))
    _lagrange3(full, m, t, out)
    return out


def regrid(field: StripField, grid: StripGrid, level: float = 0.5) -> StripField:
    """Recentre the frame so the tracked crossing sits at ``xi = 0``."""
    xc = front_position(grid, field, level)
    out = field.copy()
    if xc == 0.0:
        return out
    st = _shift_stencil(grid, xc)
    out.u = shift_values(grid, field.full_u(), xc, st)
    if field.v is not None:
        out.v = shift_values(grid, field.full_v(), xc, st)
    out.front_offset = field.front_offset + xc
    return out


# ---------------------------------------------------------------- initial data

def planar_front_field(grid: StripGrid, mats: DirectionalMatrices, perturb: float = 0.0,
                       seed: int = 0, modes: Optional[list] = None) -> StripField:
    """Planar profile ``u_f^*(xi / sqrt(Q(n^theta)))`` with optional mode-wise noise.

    ``modes`` restricts the noise to the listed rfft modes (default: all
    nonzero modes); the noise is added to the eta-dependence of ``u`` in
    a narrow band around the front and keeps the limits intact.
    """
    from .analytic import front_profile

    xi = grid.xi_interior
    prof = front_profile(xi / np.sqrt(mats.normal_coefficient))
    u = np.repeat(prof[:, None], grid.n_eta, axis=1)
    if perturb > 0:
        u = u + perturbation(grid, perturb, seed, modes) * (4 * prof * (1 - prof))[:, None]
    return StripField(u=u, u_minus=1.0, u_plus=0.0)


def pulse_field(grid: StripGrid, pulse, scale: float = 1.0, displace: float = 0.0,
                seed: int = 0, modes: Optional[list] = None) -> StripField:
    """Planar pulse ``(u, v)(xi / scale)`` with an optional eta-dependent shift.

    ``displace`` is the largest shift in ``xi`` (physical length); the shift
    pattern is :func:`perturbation` with the same seed and modes.
    """
    xi = grid.xi_interior
    shift = perturbation(grid, displace, seed, modes) if displace > 0 else np.zeros(grid.n_eta)
    X = (xi[:, None] - shift[None, :]) / scale
    u, v = pulse.profile(X.ravel())
    u, v = u.reshape(X.shape), v.reshape(X.shape)
    return StripField(u=u, u_minus=0.0, u_plus=0.0, v=v)


def perturbation(grid: StripGrid, amplitude: float, seed: int = 0, modes=None) -> np.ndarray:
    """Eta-dependent noise with unit-amplitude random phases on selected modes."""
    rng = np.random.default_rng(seed)
    nm = grid.n_modes
    ls = list(range(1, nm - 1)) if modes is None else list(modes)
    coef = np.zeros(nm, dtype=complex)
    for l in ls:
        coef[l] = np.exp(2j * np.pi * rng.random())
    prof = np.fft.irfft(coef * grid.n_eta, n=grid.n_eta)
    peak = np.abs(prof).max()
    return amplitude * prof / (peak if peak > 0 else 1.0)


# ------------------------------------------------------------------ run loop

@dataclass
class StripRun:
    """Probe time series, level-set snapshots and the terminal event."""

    t: list = field(default_factory=list)
    front_offset: list = field(default_factory=list)
    speed_est: list = field(default_factory=list)
    n_peaks: list = field(default_factory=list)
    max_u: list = field(default_factory=list)
    eta_amplitude: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: Optional[StripField] = None
    event: Optional[str] = None
    event_time: Optional[float] = None

    def probes(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in
                ("t", "front_offset", "speed_est", "n_peaks", "max_u", "eta_amplitude")}


def run_strip(initial: StripField, grid: StripGrid, mats: DirectionalMatrices,
              reaction: ReactionParams, dt: float, t_end: float,
              probe_every: int = 1, snapshot_times=(), prominence: float = 0.5,
              callback=None) -> StripRun:
    """Step, regrid and probe until ``t_end`` or until the front is lost."""
    from .diagnostics import count_peaks, extract_level_set

    stepper = BidomainCN(grid, mats, dt)
    run = StripRun()
    fld = initial.copy()
    n_steps = int(round((t_end - initial.t) / dt))
    pending = sorted(snapshot_times)
    prev = fld.front_offset

    def record(f, speed):
        run.t.append(f.t)
        run.front_offset.append(f.front_offset)
        run.speed_est.append(speed)
        run.max_u.append(float(f.u.max()))
        try:
            ls = extract_level_set(f, grid)
            pk = count_peaks(ls, prominence).n_peaks
            amp = float(np.nanmax(ls.xi_half) - np.nanmin(ls.xi_half))
        except ValueError:
            pk, amp = 0, np.nan
        run.n_peaks.append(pk)
        run.eta_amplitude.append(amp)

    record(fld, np.nan)
    for n in range(1, n_steps + 1):
        fld = strang_step_strip(fld, grid, mats, reaction, dt, stepper)
        try:
            fld = regrid(fld, grid)
        except FrontLost as exc:
            run.event, run.event_time = str(exc), fld.t
            log.info("front lost at t=%.3f", fld.t)
            break
        if not np.isfinite(fld.u).all():
            raise FloatingPointError(f"non-finite values at step {n}")
        if n % probe_every == 0 or n == n_steps:
            record(fld, (fld.front_offset - prev) / (dt * probe_every))
            prev = fld.front_offset
        while pending and fld.t >= pending[0] - 0.5 * dt:
            run.snapshots.append((pending.pop(0), fld.copy()))
        if callback is not None:
            callback(n, fld)
    run.final = fld
    return run
