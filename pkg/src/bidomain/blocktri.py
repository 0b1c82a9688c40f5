"""Block-tridiagonal (2x2 blocks) LU for many independent systems at once.

Each strip mode gives a system whose unknowns per node are the pair
``(u, u_i)``. Factorising once and sweeping all modes in one compiled loop
is much cheaper than a general banded solve per mode. No pivoting is done;
the tests compare against LAPACK's pivoted band solver.
"""

from __future__ import annotations

import numpy as np
import numba as nb

from .banded import Tridiag


@nb.njit(cache=True)
def _inv2(a, b, c, d):
    det = a * d - b * c
    return d / det, -b / det, -c / det, a / det, det


@nb.njit(cache=True)
def _factor(lo, di, up, M, Binv):
    # lo/di/up: (m, n, 2, 2) block coefficients; fills M (sub multipliers) and Binv
    m, n = di.shape[0], di.shape[1]
    worst = np.inf
    for k in range(m):
        b00, b01, b10, b11 = di[k, 0, 0, 0], di[k, 0, 0, 1], di[k, 0, 1, 0], di[k, 0, 1, 1]
        i00, i01, i10, i11, det = _inv2(b00, b01, b10, b11)
        worst = min(worst, abs(det) / (abs(b00) * abs(b11) + abs(b01) * abs(b10) + 1e-300))
        Binv[k, 0, 0, 0], Binv[k, 0, 0, 1], Binv[k, 0, 1, 0], Binv[k, 0, 1, 1] = i00, i01, i10, i11
        for j in range(1, n):
            a00, a01, a10, a11 = lo[k, j, 0, 0], lo[k, j, 0, 1], lo[k, j, 1, 0], lo[k, j, 1, 1]
            # M_j = A_j Binv_{j-1}
            m00 = a00 * i00 + a01 * i10
            m01 = a00 * i01 + a01 * i11
            m10 = a10 * i00 + a11 * i10
            m11 = a10 * i01 + a11 * i11
            M[k, j, 0, 0], M[k, j, 0, 1], M[k, j, 1, 0], M[k, j, 1, 1] = m00, m01, m10, m11
            c00, c01, c10, c11 = up[k, j - 1, 0, 0], up[k, j - 1, 0, 1], up[k, j - 1, 1, 0], up[k, j - 1, 1, 1]
            b00 = di[k, j, 0, 0] - (m00 * c00 + m01 * c10)
            b01 = di[k, j, 0, 1] - (m00 * c01 + m01 * c11)
            b10 = di[k, j, 1, 0] - (m10 * c00 + m11 * c10)
            b11 = di[k, j, 1, 1] - (m10 * c01 + m11 * c11)
            i00, i01, i10, i11, det = _inv2(b00, b01, b10, b11)
            worst = min(worst, abs(det) / (abs(b00) * abs(b11) + abs(b01) * abs(b10) + 1e-300))
            Binv[k, j, 0, 0], Binv[k, j, 0, 1], Binv[k, j, 1, 0], Binv[k, j, 1, 1] = i00, i01, i10, i11
    return worst


@nb.njit(cache=True)
def _solve(M, Binv, up, r, x):
    # r, x: (m, n, 2)
    m, n = r.shape[0], r.shape[1]
    for k in range(m):
        y0, y1 = r[k, 0, 0], r[k, 0, 1]
        x[k, 0, 0], x[k, 0, 1] = y0, y1
        for j in range(1, n):
            p0, p1 = y0, y1
            y0 = r[k, j, 0] - (M[k, j, 0, 0] * p0 + M[k, j, 0, 1] * p1)
            y1 = r[k, j, 1] - (M[k, j, 1, 0] * p0 + M[k, j, 1, 1] * p1)
            x[k, j, 0], x[k, j, 1] = y0, y1
        # back substitution
        j = n - 1
        z0 = Binv[k, j, 0, 0] * x[k, j, 0] + Binv[k, j, 0, 1] * x[k, j, 1]
        z1 = Binv[k, j, 1, 0] * x[k, j, 0] + Binv[k, j, 1, 1] * x[k, j, 1]
        x[k, j, 0], x[k, j, 1] = z0, z1
        for j in range(n - 2, -1, -1):
            t0 = x[k, j, 0] - (up[k, j, 0, 0] * z0 + up[k, j, 0, 1] * z1)
            t1 = x[k, j, 1] - (up[k, j, 1, 0] * z0 + up[k, j, 1, 1] * z1)
            z0 = Binv[k, j, 0, 0] * t0 + Binv[k, j, 0, 1] * t1
            z1 = Binv[k, j, 1, 0] * t0 + Binv[k, j, 1, 1] * t1
            x[k, j, 0], x[k, j, 1] = z0, z1


def _blocks(P: Tridiag, R: Tridiag, S: Tridiag, T: Tridiag):
    n = len(P.di)
    out = []
    for key in ("lo", "di", "up"):
        B = np.empty((n, 2, 2), dtype=complex)
        B[:, 0, 0] = getattr(P, key)
        B[:, 0, 1] = getattr(R, key)
        B[:, 1, 0] = getattr(S, key)
        B[:, 1, 1] = getattr(T, key)
        out.append(B)
    return out


class BlockTridiagLU:
    """Factorisation of ``m`` systems ``[[P, R], [S, T]]`` with tridiagonal blocks."""

    def __init__(self, systems, label: str = "", pivot_floor: float = 1e-12):
        lo, di, up = (np.stack(x) for x in zip(*(_blocks(*s) for s in systems)))
        self.m, self.n = di.shape[0], di.shape[1]
        self.M = np.zeros_like(di)
        self.Binv = np.zeros_like(di)
        self.up = up
        try:
            worst = _factor(lo, di, up, self.M, self.Binv)
        except ZeroDivisionError:
            worst = 0.0
        if not np.isfinite(self.Binv).all() or worst < pivot_floor:
            raise np.linalg.LinAlgError(f"(near) singular block system {label}")

    def solve(self, r0: np.ndarray, r1: np.ndarray) -> np.ndarray:
        """Solve all systems; ``r0, r1`` of shape ``(n, m)`` are the two row families.

        Returns the ``(n, m, 2)`` solution, first component per node in ``[..., 0]``.
        """
        r = np.empty((self.m, self.n, 2), dtype=complex)
        r[:, :, 0] = r0.T
        r[:, :, 1] = r1.T
        x = np.empty_like(r)
        _solve(self.M, self.Binv, self.up, r, x)
        return x.transpose(1, 0, 2)
