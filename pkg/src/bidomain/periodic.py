"""Bidomain Allen-Cahn / FitzHugh-Nagumo on a doubly periodic box.

The linear part is integrated exactly in Fourier space with
``exp(-Q(k) dt)``; reaction substeps use midpoint RK2 and the two are
combined by Strang splitting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import fft

from .reaction import ReactionParams, react_u, react_v
from .symbols import ConductivityParams, multiplier

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusGrid:
    d1: float
    d2: float
    n1: int
    n2: int

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 4 or n % 2:
                raise ValueError("sample counts must be even and at least 4")
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("periods must be positive")

    @property
    def h(self):
        return self.d1 / self.n1, self.d2 / self.n2

    def coords(self):
        """Meshgrid ``(x, y)`` with ``x`` along the first axis."""
        x = np.arange(self.n1) * self.d1 / self.n1
        y = np.arange(self.n2) * self.d2 / self.n2
        return np.meshgrid(x, y, indexing="ij")

    def wavevectors(self):
        k = 2 * np.pi * np.fft.fftfreq(self.n1, self.d1 / self.n1)
        l = 2 * np.pi * np.fft.rfftfreq(self.n2, self.d2 / self.n2)
        return np.meshgrid(k, l, indexing="ij")

    def symbol(self, params: ConductivityParams) -> np.ndarray:
        K, L = self.wavevectors()
        return multiplier(params, np.stack([K, L], axis=-1))


@dataclass
class TorusField:
    u: np.ndarray
    v: Optional[np.ndarray] = None
    t: float = 0.0

    def copy(self) -> "TorusField":
        return TorusField(self.u.copy(), None if self.v is None else self.v.copy(), self.t)


def linear_step(u: np.ndarray, grid: TorusGrid, params: ConductivityParams, dt: float,
                _cache: dict = {}) -> np.ndarray:
    """Exact bidomain diffusion over ``dt``.

    The propagator table is cached per ``(grid, params, dt)``; there is no
    other state.
    """
    key = (grid, params, float(dt))
    E = _cache.get(key)
    if E is None:
        if len(_cache) > 16:
            _cache.clear()
        E = _cache[key] = np.exp(-grid.symbol(params) * dt)
    return fft.irfft2(fft.rfft2(u) * E, s=u.shape)


def reaction_step_ac(u: np.ndarray, alpha: float, dt: float) -> np.ndarray:
    return react_u(u, None, ReactionParams(alpha), dt)


def strang_step(f: TorusField, grid: TorusGrid, params: ConductivityParams,
                reaction: ReactionParams, dt: float) -> TorusField:
    """One step ``phi_f(dt/2) o psi(dt) o phi_f(dt/2)``, then ``phi_g(dt)`` on ``v`` for FHN."""
    if reaction.is_fhn and f.v is None:
        raise ValueError("FHN stepping needs a v field")
    v = f.v
    u = react_u(f.u, v, reaction, 0.5 * dt)
    u = linear_step(u, grid, params, dt)
    u = react_u(u, v, reaction, 0.5 * dt)
    if reaction.is_fhn:
        v = react_v(u, v, reaction, dt)
    return TorusField(u, v, f.t + dt)


class BlowUp(ArithmeticError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite values at step {step} (t={t:g})")
        self.step = step
        self.t = t


def run_spreading(initial: TorusField, grid: TorusGrid, params: ConductivityParams,
                  reaction: ReactionParams, dt: float, t_end: float,
                  snapshot_times=None, snapshot_every: Optional[float] = None
                  ) -> Iterator[TorusField]:
    """Yield snapshots at the requested times (and the final state).

    Raises
    ------
    BlowUp
        When a non-finite value appears.
    """
    times = set()
    n_end = int(round(t_end / dt))
    if snapshot_times is not None:
        times |= {int(round(t / dt)) for t in snapshot_times}
    if snapshot_every:
        k = int(round(snapshot_every / dt))
        times |= set(range(k, n_end + 1, k))
    times.add(n_end)
    f = initial.copy()
    t0 = f.t
    for n in range(1, n_end + 1):
        f = strang_step(f, grid, params, reaction, dt)
        if n % 50 == 0 or n in times:
            if not np.isfinite(f.u).all():
                raise BlowUp(n, f.t)
        if n in times:
            f.t = t0 + n * dt
            yield f.copy()


# initial data

def disc(grid: TorusGrid, radius: float, center=None, width: float = 1.0) -> np.ndarray:
    """Smoothed indicator of a disc, 1 inside."""
    x, y = grid.coords()
    cx, cy = center if center is not None else (grid.d1 / 2, grid.d2 / 2)
    r = np.hypot(x - cx, y - cy)
    return 0.5 * (1.0 - np.tanh((r - radius) / width))


def annulus(grid: TorusGrid, r1: float, r2: float, center=None) -> np.ndarray:
    return disc(grid, r2, center) - disc(grid, r1, center)


def level_contours(u: np.ndarray, grid: TorusGrid, level: float = 0.5):
    """``level`` polylines in physical coordinates, longest first.

    Contours are not continued across the box edge; keep fronts away from it.
    """
    from skimage import measure
    cs = measure.find_contours(u, level)
    h1, h2 = grid.h
    out = [np.c_[c[:, 0] * h1, c[:, 1] * h2] for c in cs]
    out.sort(key=len, reverse=True)
    return out


# snapshot I/O

def write_pgm(path, u: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> None:
    """8-bit binary graymap, row 0 at the top, first array axis horizontal."""
    img = np.clip((u.T[::-1] - lo) / (hi - lo), 0, 1)
    img = np.round(255 * img).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def write_field(path, u: np.ndarray, grid: TorusGrid) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {grid.n1},{grid.n2},{grid.d1!r},{grid.d2!r}\n")
        np.savetxt(fh, u, delimiter=",", fmt="%.17g")


def read_field(path):
    """Inverse of :func:`write_field`; returns ``(u, grid)``."""
    with open(path) as fh:
        head = fh.readline().lstrip("#").split(",")
    n1, n2 = int(head[0]), int(head[1])
    grid = TorusGrid(float(head[2]), float(head[3]), n1, n2)
    u = np.loadtxt(path, delimiter=",", comments="#").reshape(n1, n2)
    return u, grid
