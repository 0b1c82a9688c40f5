"""Tridiagonal stencils and interleaved 2x2-block banded systems.

Every per-mode problem on the compactified grid couples a transmembrane
unknown ``v`` and an intracellular unknown ``v_i`` through three-point
stencils. Interleaving ``(v^1, v_i^1, v^2, v_i^2, ...)`` turns the block
tridiagonal system into a band matrix with three sub- and super-diagonals,
which is factored once with LAPACK ``?gbtrf`` and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

KL = KU = 3


@dataclass
class Tridiag:
    """Three-point stencil on interior nodes ``j = 1..N``.

    ``lo[k]`` multiplies ``F^{k}`` (the left neighbour of node ``k+1``),
    ``up[k]`` multiplies the right neighbour; ``lo[0]`` and ``up[-1]`` hit
    the boundary values.
    """

    lo: np.ndarray
    di: np.ndarray
    up: np.ndarray

    def __add__(self, other: "Tridiag") -> "Tridiag":
        return Tridiag(self.lo + other.lo, self.di + other.di, self.up + other.up)

    def __sub__(self, other: "Tridiag") -> "Tridiag":
        return Tridiag(self.lo - other.lo, self.di - other.di, self.up - other.up)

    def __mul__(self, s) -> "Tridiag":
        return Tridiag(self.lo * s, self.di * s, self.up * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Tridiag":
        return self * -1

    @classmethod
    def identity(cls, n: int) -> "Tridiag":
        z = np.zeros(n)
        return cls(z, np.ones(n), z.copy())

    def shift_diag(self, s) -> "Tridiag":
        return Tridiag(self.lo, self.di + s, self.up)

    def apply(self, F: np.ndarray, left=0.0, right=0.0) -> np.ndarray:
        """Apply to interior values ``F`` (first axis) with boundary values."""
        F = np.asarray(F)
        shape = (-1,) + (1,) * (F.ndim - 1)
        out = self.di.reshape(shape) * F
        out[1:] += self.lo[1:].reshape(shape) * F[:-1]
        out[:-1] += self.up[:-1].reshape(shape) * F[1:]
        out[0] += self.lo[0] * np.asarray(left)
        out[-1] += self.up[-1] * np.asarray(right)
        return out

    def boundary(self, left=0.0, right=0.0, n=None) -> np.ndarray:
        """Contribution of the boundary values alone."""
        n = len(self.di) if n is None else n
        out = np.zeros(n, dtype=np.result_type(self.di, left, right))
        out[0] += self.lo[0] * left
        out[-1] += self.up[-1] * right
        return out

    def dense(self) -> np.ndarray:
        n = len(self.di)
        M = np.diag(self.di.astype(complex) if np.iscomplexobj(self.di) else self.di)
        M = M.astype(np.result_type(self.lo, self.di, self.up))
        M[np.arange(1, n), np.arange(n - 1)] = self.lo[1:]
        M[np.arange(n - 1), np.arange(1, n)] = self.up[:-1]
        return M


def block_band(P: Tridiag, R: Tridiag, S: Tridiag, T: Tridiag, extra_rows: bool = True) -> np.ndarray:
    """Band storage of the interleaved system ``[[P, R], [S, T]]``.

    With ``extra_rows`` the layout is the one ``?gbtrf`` expects
    (``2*KL + KU + 1`` rows); otherwise ``KL + KU + 1`` rows as used by
    ``scipy.linalg.solve_banded``.
    """
    n = len(P.di)
    dtype = np.result_type(*(x.di for x in (P, R, S, T)), *(x.lo for x in (P, R, S, T)))
    off = KL + KU if extra_rows else KU
    ab = np.zeros((off + KL + 1, 2 * n), dtype=dtype)
    rows = np.arange(n)

    def put(r, c, vals):
        ok = (c >= 0) & (c < 2 * n)
        ab[off + r[ok] - c[ok], c[ok]] = vals[ok]

    for o, key in ((-1, "lo"), (0, "di"), (1, "up")):
        cnode = rows + o
        for blk, dr, dc in ((P, 0, 0), (R, 0, 1), (S, 1, 0), (T, 1, 1)):
            put(2 * rows + dr, 2 * cnode + dc, getattr(blk, key))
    return ab


def block_dense(P: Tridiag, R: Tridiag, S: Tridiag, T: Tridiag) -> np.ndarray:
    """Dense interleaved matrix; used by tests and small eigen solves."""
    n = len(P.di)
    M = np.zeros((2 * n, 2 * n), dtype=np.result_type(P.di, R.di, S.di, T.di, P.lo, R.lo))
    for blk, dr, dc in ((P, 0, 0), (R, 0, 1), (S, 1, 0), (T, 1, 1)):
        M[dr::2, dc::2] = blk.dense()
    return M


def interleave(v: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = np.empty((2 * v.shape[0],) + v.shape[1:], dtype=np.result_type(v, s))
    out[0::2] = v
    out[1::2] = s
    return out


class BandedLU:
    """LU factorisation of one interleaved band matrix, reusable across solves."""

    def __init__(self, ab: np.ndarray, label: str = ""):
        if np.iscomplexobj(ab):
            self._trf, self._trs = lapack.zgbtrf, lapack.zgbtrs
        else:
            self._trf, self._trs = lapack.dgbtrf, lapack.dgbtrs
        self.complex = np.iscomplexobj(ab)
        lu, piv, info = self._trf(ab, KL, KU)
        if info != 0:
            raise np.linalg.LinAlgError(f"singular banded system {label} (info={info})")
        self.lu, self.piv = lu, piv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self.complex and np.iscomplexobj(rhs):
            re = self._trs(self.lu, KL, KU, np.ascontiguousarray(rhs.real), self.piv)[0]
            im = self._trs(self.lu, KL, KU, np.ascontiguousarray(rhs.imag), self.piv)[0]
            return re + 1j * im
        x, info = self._trs(self.lu, KL, KU, rhs, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x
