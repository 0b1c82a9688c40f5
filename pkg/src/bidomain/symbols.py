"""Conductivity matrices and the bidomain Fourier multiplier.

The conductivities are always taken in standard form, parametrised by the
anisotropy pair ``(a, b)``::

    A_i = diag(1 + b + a, 1 + b - a)
    A_e = diag(1 - b - a, 1 - b + a)

The bidomain operator acts in Fourier space as multiplication by
``Q(k) = Q_i(k) Q_e(k) / (Q_i(k) + Q_e(k))`` with ``Q_x(k) = k^T A_x k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rotation(theta: float) -> np.ndarray:
    """Counter-clockwise rotation matrix ``R^theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def unit_vector(theta):
    """``n^theta = (cos theta, sin theta)``; vectorised over ``theta``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class ConductivityParams:
    """Anisotropy pair of the standard-form conductivities."""

    a: float
    b: float = 0.0

    def __post_init__(self):
        if not (abs(self.a + self.b) < 1 and abs(self.a - self.b) < 1):
            raise ValueError(f"need |a+b| < 1 and |a-b| < 1, got a={self.a}, b={self.b}")

    @property
    def A_i(self) -> np.ndarray:
        return np.diag([1 + self.b + self.a, 1 + self.b - self.a])

    @property
    def A_e(self) -> np.ndarray:
        return np.diag([1 - self.b - self.a, 1 - self.b + self.a])


@dataclass(frozen=True)
class DirectionalMatrices:
    """Entries of the symmetric matrices ``A_i^theta`` and ``A_e^theta``.

    Each matrix is ``[[a, b], [b, c]]``. The strip solvers only ever see
    this object, so a monodomain (scalar diffusion) problem can be posed
    by handing in ``A_i = A_e = 2 D I``, whose multiplier is ``D |k|^2``.
    """

    a_i: float
    b_i: float
    c_i: float
    a_e: float
    b_e: float
    c_e: float

    @classmethod
    def scalar_diffusion(cls, D: float) -> "DirectionalMatrices":
        return cls(2 * D, 0.0, 2 * D, 2 * D, 0.0, 2 * D)

    @property
    def A_i(self) -> np.ndarray:
        return np.array([[self.a_i, self.b_i], [self.b_i, self.c_i]])

    @property
    def A_e(self) -> np.ndarray:
        return np.array([[self.a_e, self.b_e], [self.b_e, self.c_e]])

    @property
    def normal_coefficient(self) -> float:
        """Multiplier at ``k = (1, 0)``: the diffusivity felt by planar fronts."""
        return self.a_i * self.a_e / (self.a_i + self.a_e)


def _qform(A: np.ndarray, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return np.einsum("...i,ij,...j->...", k, A, k)


def quadratic_forms(params: ConductivityParams, k):
    """Return ``(Q_i(k), Q_e(k))``; ``k`` may carry leading batch axes."""
    return _qform(params.A_i, k), _qform(params.A_e, k)


def _harmonic(qi, qe):
    qi, qe = np.asarray(qi, dtype=float), np.asarray(qe, dtype=float)
    s = qi + qe
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(s > 0, qi * qe / np.where(s > 0, s, 1.0), 0.0)
    return q if q.ndim else float(q)


def multiplier(params: ConductivityParams, k):
    """Bidomain symbol ``Q(k)``, with ``Q(0) = 0`` by continuity."""
    return _harmonic(*quadratic_forms(params, k))


def directional_matrices(params: ConductivityParams, theta: float) -> DirectionalMatrices:
    """Entries of ``A_x^theta = R^theta A_x R^{-theta}`` for ``x = i, e``."""
    R = rotation(theta)
    Ai = R @ params.A_i @ R.T
    Ae = R @ params.A_e @ R.T
    return DirectionalMatrices(Ai[0, 0], Ai[0, 1], Ai[1, 1], Ae[0, 0], Ae[0, 1], Ae[1, 1])


def directional_multiplier(params: ConductivityParams, theta: float, k):
    """Symbol ``Q^theta(k)`` in the rotated ``(xi, eta)`` frame.

    Equal to ``Q(R^{-theta} k)``; in particular ``Q^theta((1, 0)) = Q(n^theta)``
    because the standard-form matrices are diagonal.
    """
    m = directional_matrices(params, theta)
    return _harmonic(_qform(m.A_i, k), _qform(m.A_e, k))


def normal_multiplier(params: ConductivityParams, theta):
    """``Q(n^theta) = (1 - (b + a cos 2 theta)^2) / 2``, vectorised over ``theta``."""
    p = params.b + params.a * np.cos(2 * np.asarray(theta, dtype=float))
    return 0.5 * (1.0 - p * p)
