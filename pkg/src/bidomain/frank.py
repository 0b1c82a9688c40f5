"""Frank plot, its convex hull, curvature sign, the Wulff shape and the
geometric zigzag velocity.

With ``K(theta) = sqrt(Q(n^theta))`` the Frank plot is the polar curve
``r = 1/K``. Where it is not convex the planar front in that direction is
transversally unstable; the hull contact angles bounding such an arc are the
predicted flank directions of a zigzag front.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .analytic import front_speed
from .symbols import ConductivityParams, normal_multiplier

log = logging.getLogger(__name__)


def _q_derivs(params: ConductivityParams, theta):
    """``Q(n^theta)`` and its first two theta-derivatives."""
    a, b = params.a, params.b
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    p = b + a * c2
    q = 0.5 * (1.0 - p * p)
    q1 = 2.0 * a * p * s2
    q2 = -4.0 * a * a * s2 * s2 + 4.0 * a * p * c2
    return q, q1, q2


def _r_derivs(params, theta):
    q, q1, q2 = _q_derivs(params, theta)
    r = q ** -0.5
    r1 = -0.5 * q ** -1.5 * q1
    r2 = 0.75 * q ** -2.5 * q1 * q1 - 0.5 * q ** -1.5 * q2
    return r, r1, r2


def support(params: ConductivityParams, theta):
    """``K(theta) = sqrt(Q(n^theta))``."""
    return np.sqrt(normal_multiplier(params, theta))


@dataclass(frozen=True)
class FrankPlot:
    params: ConductivityParams
    theta: np.ndarray
    r: np.ndarray

    @property
    def resolution(self) -> int:
        return self.theta.size

    @property
    def points(self) -> np.ndarray:
        return np.c_[self.r * np.cos(self.theta), self.r * np.sin(self.theta)]

    def to_csv(self, path) -> None:
        kappa = convexity_indicator(self.params, self.theta)
        np.savetxt(path, np.c_[self.theta, self.r, self.points, kappa], delimiter=",",
                   header="theta,r,x,y,kappa", comments="", fmt="%.17g")


def frank_plot(params: ConductivityParams, resolution: int = 2 ** 14) -> FrankPlot:
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    theta = 2 * np.pi * np.arange(resolution) / resolution
    return FrankPlot(params, theta, 1.0 / support(params, theta))


def convexity_indicator(params: ConductivityParams, theta):
    """Signed curvature of the polar curve ``r(theta)``; positive where locally convex.

    Uses closed-form derivatives of ``Q(n^theta)``, so its zeros are smooth
    functions of the parameters.
    """
    r, r1, r2 = _r_derivs(params, np.asarray(theta, dtype=float))
    return (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5


def curvature_zeros(params: ConductivityParams, lo: float = 0.0, hi: float = 2 * np.pi,
                    samples: int = 4096) -> np.ndarray:
    """Angles in ``[lo, hi)`` where the Frank plot's curvature changes sign."""
    t = np.linspace(lo, hi, samples + 1)
    k = convexity_indicator(params, t)
    f = lambda x: float(convexity_indicator(params, x))
    idx = np.nonzero(np.sign(k[:-1]) * np.sign(k[1:]) < 0)[0]
    return np.array([brentq(f, t[i], t[i + 1], xtol=1e-14) for i in idx])


def _point(params, t):
    r = 1.0 / support(params, t)
    return np.array([r * np.cos(t), r * np.sin(t)])


def _tangent(params, t):
    r, r1, _ = _r_derivs(params, t)
    return np.array([r1 * np.cos(t) - r * np.sin(t), r1 * np.sin(t) + r * np.cos(t)])


def _contact_near(params, phi, t, half):
    """Zero of ``<p'(theta), n_phi>`` in ``[t - half, t + half]`` closest to ``t``."""
    n = np.array([np.cos(phi), np.sin(phi)])
    g = lambda x: float(_tangent(params, x) @ n)
    xs = np.linspace(t - half, t + half, 65)
    gs = np.array([g(x) for x in xs])
    k = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) <= 0)[0]
    if k.size == 0:
        raise ValueError("no tangency in window")
    k = k[np.argmin(np.abs(xs[k] - t))]
    if gs[k] == 0.0:
        return float(xs[k])
    return brentq(g, xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15)


def _refine_bitangent(params, t0, t1, half: float = 0.02):
    """Contact angles of the hull edge spanning ``(t0, t1)``.

    For a trial edge normal ``phi`` each contact is the nearby point where the
    curve's tangent is orthogonal to ``n_phi``; ``phi`` is then fixed by
    bisection on the gap of the two support values. Falls back to the
    sampled angles if no consistent bracket is found.
    """
    def contacts(phi):
        return _contact_near(params, phi, t0, half), _contact_near(params, phi, t1, half)

    def gap(phi):
        c0, c1 = contacts(phi)
        n = np.array([np.cos(phi), np.sin(phi)])
        return float((_point(params, c0) - _point(params, c1)) @ n)

    d = _point(params, t1) - _point(params, t0)
    phi0 = np.arctan2(-d[0], d[1])  # outward normal of the chord (curve runs counter-clockwise)
    try:
        for w in (1e-3, 1e-2, 5e-2):
            lo, hi = phi0 - w, phi0 + w
            if gap(lo) * gap(hi) <= 0:
                phi = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15)
                return contacts(phi)
    except ValueError:
        pass
    log.warning("bitangent refinement failed near (%.6f, %.6f)", t0, t1)
    return float(t0), float(t1)


@dataclass(frozen=True)
class ContactSet:
    plot: FrankPlot
    on_hull: np.ndarray
    arcs: tuple  # ((theta_lo, theta_hi), ...) with theta_lo < theta_hi, theta_lo in [0, 2 pi)

    def arc_containing(self, theta: float):
        """The nonconvex arc whose interior contains ``theta`` (mod 2 pi), or ``None``."""
        for lo, hi in self.arcs:
            t = lo + np.mod(theta - lo, 2 * np.pi)
            if lo < t < hi:
                return lo, hi
        return None

    def contact_angles(self) -> np.ndarray:
        return np.array([t for arc in self.arcs for t in arc])


def contact_set(plot: FrankPlot, tol: float = 1e-9, refine: bool = True) -> ContactSet:
    """Flag samples lying on the convex hull of the plot and collect off-hull arcs.

    A sample is on the hull when its distance to the hull boundary is at most
    ``tol * max r``. Arc endpoints are then refined to the exact bitangent
    contact angles when ``refine`` is set.
    """
    pts = plot.points
    try:
        hull = ConvexHull(pts)
    except Exception as exc:  # qhull raises its own error type
        raise ValueError("degenerate Frank plot: hull cannot be formed") from exc
    # the plot is star-shaped about 0 and sampled in angle, so every sample lies
    # between two angularly consecutive hull vertices; measure to that edge
    v = np.sort(hull.vertices)
    n_pts = len(pts)
    k = np.searchsorted(v, np.arange(n_pts), side="right") - 1  # -1 wraps to the last vertex
    p0, p1 = pts[v[k]], pts[v[(k + 1) % len(v)]]
    e = p1 - p0
    dist = np.abs(e[:, 0] * (pts[:, 1] - p0[:, 1]) - e[:, 1] * (pts[:, 0] - p0[:, 0]))
    dist /= np.maximum(np.hypot(e[:, 0], e[:, 1]), 1e-300)
    on = dist <= tol * plot.r.max()
    on[hull.vertices] = True

    arcs = []
    n = on.size
    if not on.all():
        start = int(np.argmax(on))  # roll so the sequence starts on the hull
        flags = np.roll(on, -start)
        idx = np.roll(np.arange(n), -start)
        j = 0
        while j < n:
            if flags[j]:
                j += 1
                continue
            k = j
            while k < n and not flags[k]:
                k += 1
            lo = plot.theta[idx[j - 1]]
            hi = plot.theta[idx[k % n]]
            if hi <= lo:
                hi += 2 * np.pi
            if refine:
                lo, hi = _refine_bitangent(plot.params, lo, hi)
            arcs.append((float(np.mod(lo, 2 * np.pi)), float(np.mod(lo, 2 * np.pi) + hi - lo)))
            j = k
    arcs.sort()
    return ContactSet(plot, on, tuple(arcs))


@dataclass(frozen=True)
class WulffShape:
    vertices: np.ndarray  # counter-clockwise

    def support(self, theta):
        theta = np.atleast_1d(theta)
        return (self.vertices @ np.c_[np.cos(theta), np.sin(theta)].T).max(axis=0)

    def radial_distance(self, theta):
        """Distance from the origin to the boundary along ``n^theta``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        e = w - v
        out = np.empty(theta.size)
        for m, t in enumerate(theta):
            d = np.array([np.cos(t), np.sin(t)])
            den = d[0] * e[:, 1] - d[1] * e[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (v[:, 0] * e[:, 1] - v[:, 1] * e[:, 0]) / den
                u = (v[:, 0] * d[1] - v[:, 1] * d[0]) / den
            ok = (s > 0) & (u >= -1e-12) & (u <= 1 + 1e-12)
            out[m] = s[ok].min()
        return out


def _halfspace_polygon(theta, K) -> np.ndarray:
    hs = np.c_[np.cos(theta), np.sin(theta), -K]
    v = HalfspaceIntersection(hs, np.zeros(2)).intersections
    hull = ConvexHull(v)
    return v[hull.vertices]


def wulff_shape(params: ConductivityParams, resolution: int = 2 ** 14,
                contact_only: bool = False, tol: float = 1e-9) -> WulffShape:
    """Intersection of half-planes ``x . n^theta <= K(theta)``.

    With ``contact_only`` only directions whose Frank point lies on the hull
    enter; the two polygons coincide up to sampling error.
    """
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    plot = frank_plot(params, resolution)
    theta = plot.theta
    if contact_only:
        theta = theta[contact_set(plot, tol, refine=False).on_hull]
    return WulffShape(_halfspace_polygon(theta, support(params, theta)))


def hausdorff(p: np.ndarray, q: np.ndarray) -> float:
    from scipy.spatial.distance import directed_hausdorff
    return max(directed_hausdorff(p, q)[0], directed_hausdorff(q, p)[0])


def zigzag_velocity(params: ConductivityParams, theta: float, theta_m: float,
                    theta_p: float, alpha: float):
    """Velocity ``(v_xi, v_eta)`` of the corner between two planar flanks.

    The flanks point along ``theta - theta_m`` and ``theta + theta_p`` and each
    moves normally at its own planar speed.
    """
    s = np.sin(theta_m + theta_p)
    if abs(s) < 1e-14:
        raise ValueError("flank directions are parallel")
    c0 = front_speed(alpha)
    cp = support(params, theta + theta_p) * c0
    cm = support(params, theta - theta_m) * c0
    v_xi = (cp * np.sin(theta_m) + cm * np.sin(theta_p)) / s
    v_eta = (-cp * np.cos(theta_m) + cm * np.cos(theta_p)) / s
    return float(v_xi), float(v_eta)
