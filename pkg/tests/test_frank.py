import numpy as np
import pytest
from hypothesis import given, strategies as st

from bidomain.frank import (contact_set, convexity_indicator, frank_plot, hausdorff, support,
                            wulff_shape, zigzag_velocity)
from bidomain.symbols import ConductivityParams


def finite_difference_curvature(p, th, h=1e-4):
    r = lambda t: 1.0 / support(p, t)
    r0, rp, rm = r(th), r(th + h), r(th - h)
    r1, r2 = (rp - rm) / (2 * h), (rp - 2 * r0 + rm) / h ** 2
    return (r0 ** 2 + 2 * r1 ** 2 - r0 * r2) / (r0 ** 2 + r1 ** 2) ** 1.5


@pytest.mark.parametrize("a,b", [(0.9, 0.0), (0.6, 0.2), (0.3, -0.4)])
def test_curvature_matches_finite_differences(a, b):
    p = ConductivityParams(a, b)
    th = np.linspace(0.01, 3.1, 40)
    np.testing.assert_allclose(convexity_indicator(p, th), finite_difference_curvature(p, th),
                               rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("a,b", [(0.9, 0.0), (0.7, 0.0), (0.6, 0.1), (0.55, 0.0)])
def test_sign_consistency(a, b):
    # strict negative curvature forces the sample off the hull, and every arc
    # contains a concave stretch; near its ends an arc is locally convex
    p = ConductivityParams(a, b)
    plot = frank_plot(p, 2 ** 12)
    cs = contact_set(plot)
    kappa = convexity_indicator(p, plot.theta)
    band = np.abs(kappa) > 1e-6
    assert not np.any(cs.on_hull & (kappa < 0) & band)
    for lo, hi in cs.arcs:
        t = np.linspace(lo, hi, 2001)[1:-1]
        assert convexity_indicator(p, t).min() < 0
        assert cs.arc_containing(0.5 * (lo + hi)) == (lo, hi)


@pytest.mark.parametrize("a", [0.55, 0.7, 0.9])
def test_nonconvex_for_large_a(a):
    assert len(contact_set(frank_plot(ConductivityParams(a, 0.0), 2 ** 12)).arcs) >= 1


@pytest.mark.parametrize("a", [0.0, 0.3, 0.5])
def test_convex_for_small_a(a):
    p = ConductivityParams(a, 0.0)
    assert contact_set(frank_plot(p, 2 ** 12)).arcs == ()
    assert convexity_indicator(p, np.linspace(0, 2 * np.pi, 1000)).min() >= -1e-12


def test_contact_angles_resolution_independent_and_symmetric():
    p = ConductivityParams(0.9, 0.0)
    arcs = [contact_set(frank_plot(p, r)).arcs[0] for r in (512, 4096, 2 ** 14)]
    for lo, hi in arcs:
        assert lo == pytest.approx(arcs[-1][0], abs=1e-10)
        assert hi == pytest.approx(arcs[-1][1], abs=1e-10)
        assert lo + hi == pytest.approx(np.pi / 2, abs=1e-12)  # b = 0 mirror symmetry about pi/4


def test_contact_points_are_bitangent():
    p = ConductivityParams(0.8, 0.1)
    lo, hi = contact_set(frank_plot(p, 2 ** 12)).arcs[0]
    pt = lambda t: np.array([np.cos(t), np.sin(t)]) / support(p, t)
    d = pt(hi) - pt(lo)
    n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    # every Frank point lies on one side of the chord through the contacts
    th = np.linspace(0, 2 * np.pi, 20000)
    proj = (np.c_[np.cos(th), np.sin(th)] / support(p, th)[:, None] - pt(lo)) @ n
    assert (proj.max() < 1e-12) or (proj.min() > -1e-12)


@pytest.mark.parametrize("a,b", [(0.9, 0.0), (0.6, 0.2)])
def test_wulff_duality(a, b):
    p = ConductivityParams(a, b)
    res = 2 ** 12
    plot = frank_plot(p, res)
    cs = contact_set(plot)
    W = wulff_shape(p, res)
    h = W.support(plot.theta)
    K = support(p, plot.theta)
    on = cs.on_hull
    assert np.max(np.abs(h[on] - K[on])) <= 2 * np.pi / res
    # strictly inside the arcs (away from the contacts) the support is below K
    inner = np.zeros_like(on)
    for lo, hi in cs.arcs:
        t = plot.theta[(np.mod(plot.theta - lo, 2 * np.pi) > 0.05) & (np.mod(plot.theta - lo, 2 * np.pi) < hi - lo - 0.05)]
        assert np.all(W.support(t) < support(p, t))
        inner |= np.isin(plot.theta, t)
    assert inner.any()


def test_wulff_contact_only_same_polygon():
    p = ConductivityParams(0.9, 0.0)
    W1 = wulff_shape(p, 2 ** 12)
    W2 = wulff_shape(p, 2 ** 12, contact_only=True)
    assert hausdorff(W1.vertices, W2.vertices) < 1e-3


def test_isotropic_wulff_is_circle():
    W = wulff_shape(ConductivityParams(0.0, 0.0), 2 ** 10)
    r = np.linalg.norm(W.vertices, axis=1)
    np.testing.assert_allclose(r, np.sqrt(0.5), rtol=1e-4)
    np.testing.assert_allclose(W.radial_distance([0.1, 2.0]), np.sqrt(0.5), rtol=1e-4)


def test_zigzag_velocity_closed_form():
    p = ConductivityParams(0.9, 0.0)
    lo, hi = contact_set(frank_plot(p)).arcs[0]
    th = np.pi / 4
    v = zigzag_velocity(p, th, th - lo, hi - th, 0.4)
    assert v[0] == pytest.approx(0.06, rel=1e-9) and abs(v[1]) < 1e-12
    # equal contact speeds reduce the formula to the b = 0 form
    tm, tp = 0.3, 0.5
    ct = support(p, th + tp) * np.sqrt(2) * 0.1
    v = zigzag_velocity(p, th, tm, tp, 0.4)
    if abs(support(p, th + tp) - support(p, th - tm)) < 1e-14:
        assert v[0] == pytest.approx(ct * (np.sin(tm) + np.sin(tp)) / np.sin(tm + tp))


@given(st.floats(0.05, 1.4), st.floats(0.05, 1.4), st.floats(-1.5, 1.5), st.floats(0.0, 0.95))
def test_zigzag_velocity_reflection(tm, tp, th, a):
    p = ConductivityParams(a, 0.0)
    v = zigzag_velocity(p, th, tm, tp, 0.4)
    w = zigzag_velocity(p, -th, tp, tm, 0.4)
    assert w[0] == pytest.approx(v[0], rel=1e-12, abs=1e-15)
    assert w[1] == pytest.approx(-v[1], rel=1e-12, abs=1e-15)


def test_zigzag_velocity_parallel_flanks():
    with pytest.raises(ValueError):
        zigzag_velocity(ConductivityParams(0.5), 0.3, 0.0, 0.0, 0.4)


def test_frank_csv(tmp_path):
    plot = frank_plot(ConductivityParams(0.9), 128)
    plot.to_csv(tmp_path / "f.csv")
    data = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert data.shape == (128, 5)
