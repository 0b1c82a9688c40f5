"""Principal eigenvalue of the linearisation about a planar front.

For a transverse wavenumber ``w`` the discrete problem on the compactified
grid is the pencil ``A(w) x = lambda B x`` over ``x = (v, v_i)``::

    lambda v = c_f dxi v + L_i(w) v_i + f'(u_f) v
          0 = (L_i + L_e)(w) v_i - L_e(w) v

with ``v = v_i = 0`` at both infinite nodes. The branch through the
translation mode ``(lambda, v) = (0, -u_f')`` at ``w = 0`` is followed by
Newton's method on the bordered system while ``w`` increases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analytic import directional_front
from .banded import KL, KU, block_band
from .reaction import f_cubic_prime
from .strip import StripGrid
from .symbols import ConductivityParams, directional_matrices

log = logging.getLogger(__name__)


def _band_to_csc(ab: np.ndarray) -> sp.csc_matrix:
    n = ab.shape[1]
    diags, offs = [], []
    for k in range(-KL, KU + 1):
        row = ab[KU - k]
        if k >= 0:
            diags.append(row[k:])
        else:
            diags.append(row[: n + k])
        offs.append(k)
    return sp.diags(diags, offs, shape=(n, n), format="csc")


@dataclass
class EigSystem:
    """Pencil of one transverse wavenumber; ``A`` is sparse, ``B`` selects ``v`` rows."""

    A: sp.csc_matrix
    w: float
    n: int

    @property
    def B(self) -> sp.csc_matrix:
        d = np.zeros(2 * self.n)
        d[0::2] = 1.0
        return sp.diags(d, format="csc")

    def residual(self, v: np.ndarray, vi: np.ndarray, lam: complex) -> np.ndarray:
        """Stacked residual of both equation families plus the normalisation row."""
        x = np.empty(2 * self.n, dtype=complex)
        x[0::2], x[1::2] = v, vi
        r = self.A @ x
        r[0::2] -= lam * v
        return np.concatenate([r, [np.vdot(v, v).real - 1.0]])


def assemble_eig_system(grid: StripGrid, params: ConductivityParams, theta: float,
                        alpha: float, w: float) -> EigSystem:
    """Pencil for wavenumber ``w`` around the analytic planar front."""
    m = directional_matrices(params, theta)
    front = directional_front(params, theta, alpha)
    xi = grid.xi_interior
    fp = f_cubic_prime(front.profile(xi), alpha)
    Li = grid.mode_operator(m.a_i, m.b_i, m.c_i, w)
    Le = grid.mode_operator(m.a_e, m.b_e, m.c_e, w)
    P = (grid.D1 * front.speed).shift_diag(fp)
    ab = block_band(P, Li, -Le, Li + Le, extra_rows=False)
    return EigSystem(_band_to_csc(ab.astype(complex)), w, grid.n_xi)


def translation_mode(grid: StripGrid, params: ConductivityParams, theta: float, alpha: float):
    """Normalised ``-u_f'`` and the matching ``v_i`` (elliptic solve at ``w = 0``)."""
    m = directional_matrices(params, theta)
    front = directional_front(params, theta, alpha)
    v = -front.derivative(grid.xi_interior).astype(complex)
    v /= np.linalg.norm(v)
    Li, Le = grid.mode_operator(m.a_i, 0, 0, 0.0), grid.mode_operator(m.a_e, 0, 0, 0.0)
    T = Li + Le
    T = sp.diags([T.lo[1:], T.di, T.up[:-1]], [-1, 0, 1], format="csc")
    vi = spla.spsolve(T.astype(complex), Le.apply(v))
    return v, vi


@dataclass
class EigEntry:
    w: float
    lam: complex
    v: np.ndarray
    vi: np.ndarray
    iters: int


@dataclass
class EigenBranch:
    params: ConductivityParams
    theta: float
    alpha: float
    entries: list = field(default_factory=list)
    truncated: bool = False

    @property
    def w(self) -> np.ndarray:
        return np.array([e.w for e in self.entries])

    @property
    def lam(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries])


def _newton(sys: EigSystem, v, vi, lam, ref, tol=1e-10, max_iter=50):
    """Newton on ``(A - lam B) x = 0`` bordered by ``ref^H v = 1``."""
    n = sys.n
    x = np.empty(2 * n, dtype=complex)
    x[0::2], x[1::2] = v, vi
    x = x / np.vdot(ref, x[0::2])
    B = sys.B
    border = np.zeros(2 * n, dtype=complex)
    border[0::2] = ref.conj()
    for it in range(1, max_iter + 1):
        Bx = B @ x
        F = sys.A @ x - lam * Bx
        J = sp.bmat([[sys.A - lam * B, sp.csc_matrix(-Bx[:, None])],
                     [sp.csr_matrix(border[None, :]), None]], format="csc")
        rhs = -np.concatenate([F, [np.dot(border, x) - 1.0]])
        step = spla.spsolve(J, rhs)
        x = x + step[:-1]
        lam = lam + step[-1]
        if abs(step[-1]) > 1e-8:
            continue
        v = x[0::2]
        phase = np.vdot(ref, v)
        phase = phase / abs(phase) if abs(phase) > 0 else 1.0
        xn = x / (np.linalg.norm(v) * phase)
        if np.abs(sys.A @ xn - lam * (B @ xn)).max() < tol:
            return xn[0::2], xn[1::2], complex(lam), it
    raise ArithmeticError("Newton did not converge")


def newton_continue(grid: StripGrid, params: ConductivityParams, theta: float, alpha: float,
                    w_values, dw_min: float = 1e-4, tol: float = 1e-10) -> EigenBranch:
    """Follow the principal branch through ascending wavenumbers ``w_values``.

    Each target is reached from the previous converged entry; on Newton
    failure the step is halved down to ``dw_min`` before the branch is
    truncated (flagged, not raised).
    """
    branch = EigenBranch(params, theta, alpha)
    v, vi = translation_mode(grid, params, theta, alpha)
    sys0 = assemble_eig_system(grid, params, theta, alpha, 0.0)
    v, vi, lam, it = _newton(sys0, v, vi, 0.0, v, tol)
    branch.entries.append(EigEntry(0.0, lam, v, vi, it))
    w_prev = 0.0
    for w_target in w_values:
        if w_target <= w_prev:
            if w_target == 0.0:
                continue
            raise ValueError("w_values must be ascending and positive")
        w = w_target
        while True:
            e = branch.entries[-1]
            try:
                sys_ = assemble_eig_system(grid, params, theta, alpha, w)
                v, vi, lam, it = _newton(sys_, e.v, e.vi, e.lam, e.v, tol)
            except (ArithmeticError, RuntimeError):
                dw = 0.5 * (w - w_prev)
                if dw < dw_min:
                    branch.truncated = True
                    log.warning("eigen branch truncated at w=%g", w_prev)
                    return branch
                w = w_prev + dw
                continue
            branch.entries.append(EigEntry(w, lam, v, vi, it))
            w_prev = w
            if w >= w_target:
                break
            w = w_target
    return branch


def principal_eigenvalue(grid, params, theta, alpha, w, dw: float = 0.005):
    """``lambda`` at wavenumber ``w`` by continuation from ``w = 0``."""
    ws = [x for x in np.arange(dw, w, dw) if x < w - 0.5 * dw] + [w]
    br = newton_continue(grid, params, theta, alpha, ws)
    if br.truncated:
        raise ArithmeticError(f"continuation stopped before w={w}")
    return br.entries[-1].lam


def eigs_near(grid, params, theta, alpha, w, sigma, k=1):
    """Independent check: shift-invert ARPACK eigenvalues of the pencil closest to ``sigma``."""
    s = assemble_eig_system(grid, params, theta, alpha, w)
    vals = spla.eigs(s.A, k=k, M=s.B, sigma=sigma, return_eigenvectors=False)
    return vals[np.argsort(np.abs(vals - sigma))]


def fit_small_l(branch: EigenBranch, l_min: float = 0.01, l_max: float = 0.05):
    """Leading small-``l`` coefficients ``(-alpha0, alpha1 * c_f)`` of the branch.

    ``Re lambda - lambda_0`` is fitted on ``{l^2, l^3, l^4}`` and ``Im lambda``
    on ``{l, l^2, l^3}``. The odd power in the real part is needed: the
    bidomain symbol is not smooth at ``k = 0`` and the branch carries an
    ``|l|^3`` correction that biases a pure even fit by several percent.
    """
    w, lam = branch.w, branch.lam
    m = (w >= l_min - 1e-12) & (w <= l_max + 1e-12)
    if m.sum() < 4:
        raise ValueError("need at least four branch points in the fit window")
    wm = w[m]
    re = lam.real[m] - lam[0].real
    c2 = np.linalg.lstsq(np.c_[wm**2, wm**3, wm**4], re, rcond=None)[0][0]
    c1 = np.linalg.lstsq(np.c_[wm, wm**2, wm**3], lam.imag[m], rcond=None)[0][0]
    return float(c2), float(c1)


@dataclass
class WidthScan:
    d: np.ndarray
    re_lambda: np.ndarray  # Re lambda(2 pi / d) - Re lambda(0)
    d_star: float | None


def stability_scan_width(grid: StripGrid, params: ConductivityParams, theta: float,
                         alpha: float, d_values, dl: float = 0.005,
                         bisect_tol: float = 1e-6) -> WidthScan:
    """Sign of ``Re lambda`` at the first strip mode ``w = 2 pi / d`` per width.

    One continuation up to the largest wavenumber serves all widths. The
    onset width ``d*`` (largest ``w`` with a sign change, i.e. the smallest
    unstable width) is located by bisection on ``w``, each probe restarted
    from the nearest branch entry below it. Signs are taken relative to the
    discrete translation eigenvalue at ``w = 0`` (zero in the continuum,
    ``O(dz^2)`` on the mesh), so a tiny positive bias there cannot fake an
    onset at very large widths.
    """
    d_values = np.asarray(d_values, dtype=float)
    if np.any(d_values <= 0):
        raise ValueError("widths must be positive")
    targets = np.sort(2 * np.pi / d_values)
    grid_w = np.arange(dl, targets[-1], dl)
    ws = np.unique(np.concatenate([grid_w, targets]))
    br = newton_continue(grid, params, theta, alpha, ws)
    if br.truncated:
        raise ArithmeticError(f"continuation stopped at w={br.w[-1]:.4g}")
    bw = br.w
    ref = br.lam[0].real
    bl = br.lam.real - ref
    re = np.array([bl[np.argmin(np.abs(bw - 2 * np.pi / d))] for d in d_values])

    d_star = None
    sign_change = np.nonzero((bl[1:-1] > 0) & (bl[2:] <= 0))[0]
    if sign_change.size:
        k = sign_change[-1] + 1
        lo, hi = k, k + 1
        e_lo = br.entries[lo]
        w_lo, w_hi = bw[lo], bw[hi]
        while w_hi - w_lo > bisect_tol:
            wm = 0.5 * (w_lo + w_hi)
            s = assemble_eig_system(grid, params, theta, alpha, wm)
            v, vi, lam, _ = _newton(s, e_lo.v, e_lo.vi, e_lo.lam, e_lo.v)
            if lam.real - ref > 0:
                w_lo, e_lo = wm, EigEntry(wm, lam, v, vi, 0)
            else:
                w_hi = wm
        d_star = 2 * np.pi / (0.5 * (w_lo + w_hi))
    return WidthScan(d_values, re, d_star)
