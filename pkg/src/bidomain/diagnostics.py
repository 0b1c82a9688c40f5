"""Measurements on simulated fields: level sets, peaks, flank angles, speeds, Wulff distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks


@dataclass
class LevelSet:
    """``xi_half[n]``: physical position of the level crossing at ``eta[n]`` (NaN if missing)."""

    eta: np.ndarray
    xi_half: np.ndarray
    d: float


@dataclass
class PeakStats:
    n_peaks: int
    positions: np.ndarray
    prominences: np.ndarray


def extract_level_set(field, grid, level: float = 0.5) -> LevelSet:
    """Leading (largest-xi) falling crossing of ``level`` in every eta column.

    Linear interpolation between the bracketing nodes; the returned
    positions include the frame's accumulated ``front_offset``.
    """
    full = field.full_u()
    xi = grid.xi
    above = full >= level
    falls = above[:-1] & ~above[1:]
    has = falls.any(axis=0)
    if not has.any():
        raise ValueError("level not crossed anywhere")
    k = full.shape[0] - 2 - np.argmax(falls[::-1], axis=0)
    cols = np.arange(full.shape[1])
    k = np.clip(k, 1, grid.n_xi - 1)
    u0, u1 = full[k, cols], full[k + 1, cols]
    t = (u0 - level) / np.where(u0 != u1, u0 - u1, 1.0)
    pos = xi[k] + t * (xi[k + 1] - xi[k])
    pos = np.where(has, pos + field.front_offset, np.nan)
    return LevelSet(grid.eta.copy(), pos, grid.d)


def count_peaks(ls: LevelSet, prominence: float) -> PeakStats:
    """Cyclic local maxima of ``xi_half(eta)`` with prominence at least ``prominence``."""
    if prominence <= 0:
        raise ValueError("prominence must be positive")
    y = np.asarray(ls.xi_half, dtype=float)
    if np.isnan(y).all():
        return PeakStats(0, np.array([]), np.array([]))
    y = np.where(np.isnan(y), np.nanmin(y), y)
    n = len(y)
    if np.ptp(y) < prominence:
        return PeakStats(0, np.array([]), np.array([]))
    # unroll so the global minimum sits at both ends; every cyclic peak is then interior
    start = int(np.argmin(y))
    rolled = np.concatenate([y[start:], y[:start], y[start:start + 1]])
    idx, props = find_peaks(rolled, prominence=prominence)
    pos = ls.eta[(idx + start) % n]
    return PeakStats(len(idx), pos, props["prominences"])


def _single_peak_frame(ls: LevelSet, prominence: float):
    """Level set rolled to start at its trough, plus the peak index in that frame."""
    y = np.asarray(ls.xi_half, dtype=float)
    if np.isnan(y).any():
        raise ValueError("level set has missing columns")
    stats = count_peaks(ls, prominence)
    if stats.n_peaks != 1:
        raise ValueError(f"not in single-peak regime ({stats.n_peaks} peaks)")
    n = y.size
    h = ls.d / n
    j0 = int(np.argmin(y))
    y = np.roll(y, -j0)
    eta = (np.arange(n + 1)) * h
    y = np.append(y, y[0])
    jp = int(np.argmax(y))
    return eta, y, jp, j0


def _middle_fit(x, y, keep: float):
    return np.polyfit(*_flank(x, y, keep), 1)[0]


def measure_angles(ls: LevelSet, prominence: float = 0.5, keep: float = 0.6):
    """Flank angles ``(theta_m, theta_p)`` of a single-peak zigzag.

    A line is fitted to the central ``keep`` fraction of each flank. The
    rising flank (trough to peak in increasing eta) gives
    ``theta_p = arctan(slope)``, the falling one ``theta_m = arctan(-slope)``;
    the flank normals then point along ``theta + theta_p`` and
    ``theta - theta_m``.
    """
    eta, y, jp, _ = _single_peak_frame(ls, prominence)
    s_left = _middle_fit(eta[: jp + 1], y[: jp + 1], keep)
    s_right = _middle_fit(eta[jp:], y[jp:], keep)
    return float(np.arctan(-s_right)), float(np.arctan(s_left))


def peak_position(ls: LevelSet, prominence: float = 0.5) -> float:
    """Eta of the single peak, refined by intersecting the two flank lines."""
    eta, y, jp, j0 = _single_peak_frame(ls, prominence)
    pl = np.polyfit(*_flank(eta[: jp + 1], y[: jp + 1]), 1)
    pr = np.polyfit(*_flank(eta[jp:], y[jp:]), 1)
    if abs(pl[0] - pr[0]) < 1e-12:
        e = eta[jp]
    else:
        e = (pr[1] - pl[1]) / (pl[0] - pr[0])
    return float(np.mod(e + ls.eta[j0], ls.d))


def _flank(x, y, keep=0.6):
    n = x.size
    cut = int(np.floor(0.5 * (1 - keep) * n))
    sl = slice(cut, n - cut) if n - 2 * cut >= 3 else slice(0, n)
    return x[sl], y[sl]


def synthetic_zigzag(d: float, n_eta: int, theta_m: float, theta_p: float,
                     xi0: float = 0.0, eta_peak: float = 0.0) -> LevelSet:
    """Exact single-peak piecewise-linear level set with the given flank angles."""
    tp, tm = np.tan(theta_p), np.tan(theta_m)
    L_left = d * tm / (tp + tm)  # rising run
    eta = np.arange(n_eta) * d / n_eta
    s = np.mod(eta - eta_peak, d)  # distance past the peak
    xi = np.where(s <= d - L_left, -tm * s, -tm * (d - L_left) + tp * (s - (d - L_left)))
    return LevelSet(eta, xi + xi0, d)


def fit_speeds(t, front_offset, peak_eta=None, d: float | None = None):
    """Least-squares slopes: ``c_xi`` from the front position, ``c_eta`` from the peak.

    ``peak_eta`` is unwrapped modulo ``d`` before fitting. Without peak data
    ``c_eta`` is returned as 0.
    """
    t = np.asarray(t, dtype=float)
    if t.size < 10:
        raise ValueError("window too short: need at least 10 samples")
    c_xi = np.polyfit(t, np.asarray(front_offset, dtype=float), 1)[0]
    c_eta = 0.0
    if peak_eta is not None:
        p = np.asarray(peak_eta, dtype=float)
        if d is None:
            raise ValueError("strip width needed to unwrap peak positions")
        p = np.unwrap(p * (2 * np.pi / d)) * (d / (2 * np.pi))
        c_eta = np.polyfit(t, p, 1)[0]
    return float(c_xi), float(c_eta)


def wulff_distance(polygon: np.ndarray, wulff) -> float:
    """Scale- and translation-free Hausdorff distance to the Wulff polygon.

    The Wulff shape is scaled to the polygon's area and moved onto its
    centroid; the Hausdorff distance between the two boundaries is divided
    by the scaled Wulff diameter.
    """
    import shapely
    from shapely.affinity import scale, translate
    from shapely.geometry import Polygon

    polygon = np.asarray(polygon, dtype=float)
    if polygon.shape[0] < 4 or not np.allclose(polygon[0], polygon[-1]):
        raise ValueError("level-set polygon is not closed")
    P = Polygon(polygon)
    W = Polygon(wulff.vertices)
    s = np.sqrt(P.area / W.area)
    W = scale(W, s, s, origin=(0, 0))
    W = translate(W, P.centroid.x - W.centroid.x, P.centroid.y - W.centroid.y)
    v = np.asarray(W.exterior.coords)
    diam = np.max(np.linalg.norm(v[:, None] - v[None], axis=-1))
    return float(shapely.hausdorff_distance(P.exterior, W.exterior, densify=0.01) / diam)
