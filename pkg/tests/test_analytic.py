import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bidomain.analytic import (directional_front, directional_pulse, front_profile, front_profile_prime,
                               front_speed, normalized_front, normalized_pulse, thm21_coefficients)
from bidomain.frank import convexity_indicator, support
from bidomain.reaction import ReactionParams, f_cubic, f0_shift
from bidomain.symbols import ConductivityParams
from oracles import coefficients_mp


def test_front_closed_form():
    assert front_speed(0.5) == 0.0
    assert front_speed(0.4) == pytest.approx(0.1414213562373095, rel=1e-15)
    assert front_profile(0.0) == 0.5
    fr = normalized_front(0.3)
    assert fr.theta is None and fr.speed == front_speed(0.3)
    with pytest.raises(ValueError):
        normalized_front(1.2)


def test_front_ode_residual():
    alpha = 0.37
    xi = np.linspace(-40, 40, 4001)
    u = front_profile(xi)
    up = front_profile_prime(xi)
    # second derivative of the logistic profile in closed form
    upp = -up * (1 - 2 * u) / math.sqrt(2)
    res = front_speed(alpha) * up + upp + f_cubic(u, alpha)
    assert np.abs(res).max() < 1e-12
    assert np.all(np.diff(u) <= 0) and u[0] > 1 - 1e-6 and u[-1] < 1e-6


def test_directional_front_values():
    p9 = ConductivityParams(0.9, 0.0)
    assert directional_front(p9, math.pi / 4, 0.4).speed == pytest.approx(0.1, rel=1e-14)
    assert directional_front(p9, 0.0, 0.4).speed == pytest.approx(math.sqrt(0.095) * math.sqrt(2) * 0.1, rel=1e-14)
    assert directional_front(ConductivityParams(0, 0), 1.234, 0.4).speed == pytest.approx(0.1, rel=1e-14)
    fr = directional_front(p9, 0.3, 0.4)
    s = support(p9, 0.3)
    assert fr.profile(2 * s) == pytest.approx(front_profile(2.0), rel=1e-14)
    assert fr.derivative(s) == pytest.approx(front_profile_prime(1.0) / s, rel=1e-14)


@pytest.mark.parametrize("a,b,theta,expected", [
    (0.9, 0.0, math.pi / 4, (0.5 - 2 * 0.81, 0.0)),
    (0.9, 0.0, math.pi / 5, (-0.97212, 0.51603)),
    (0.0, 0.0, 0.7, (0.5, 0.0)),
])
def test_coefficient_examples(a, b, theta, expected):
    a0, a1 = thm21_coefficients(ConductivityParams(a, b), theta)
    # the quoted values carry five decimals
    assert a0 == pytest.approx(expected[0], abs=2e-5)
    assert a1 == pytest.approx(expected[1], abs=2e-5)


@given(st.floats(0.0, 0.6), st.floats(-0.35, 0.35), st.floats(0.0, math.pi))
def test_coefficients_match_extended_precision(a, b, theta):
    p = ConductivityParams(a, b)
    np.testing.assert_allclose(thm21_coefficients(p, theta), coefficients_mp(a, b, theta), rtol=1e-11, atol=1e-13)


@given(st.floats(0.0, 0.95), st.floats(0.0, math.pi / 4))
def test_alpha1_odd_about_quarter_pi(a, x):
    p = ConductivityParams(a, 0.0)
    assert thm21_coefficients(p, math.pi / 4 + x)[1] == pytest.approx(-thm21_coefficients(p, math.pi / 4 - x)[1],
                                                                      abs=1e-12)


@given(st.floats(0.0, 0.6), st.floats(-0.35, 0.35))
def test_alpha0_at_zero_angle(a, b):
    a0, a1 = thm21_coefficients(ConductivityParams(a, b), 0.0)
    assert a0 == pytest.approx(0.5 + 0.5 * (3 * a * a + 2 * a * b - b * b), abs=1e-13)
    assert a1 == 0.0


@given(st.floats(0.0, 0.95), st.floats(-0.04, 0.04), st.floats(0.05, 3.0))
def test_alpha1_is_log_derivative_of_speed(a, b, theta):
    # the group-velocity term is d ln K / d theta
    p = ConductivityParams(a, b)
    h = 1e-6
    dlog = (math.log(support(p, theta + h)) - math.log(support(p, theta - h))) / (2 * h)
    assert thm21_coefficients(p, theta)[1] == pytest.approx(dlog, rel=1e-6, abs=1e-8)


def test_instability_prediction_consistent_with_curvature():
    p = ConductivityParams(0.9, 0.0)
    assert thm21_coefficients(p, math.pi / 4)[0] < 0
    assert convexity_indicator(p, math.pi / 4) < 0


def test_reaction_params():
    assert f0_shift(0.3) == pytest.approx(-0.5)
    assert not ReactionParams(0.3).is_fhn and ReactionParams(0.3, 1e-3, 3.0).model == "fhn"
    for bad in (dict(alpha=0.0), dict(alpha=0.3, epsilon=1e-3), dict(alpha=0.3, epsilon=-1.0, gamma=3.0)):
        with pytest.raises(ValueError):
            ReactionParams(**bad)
    with pytest.raises(ValueError):
        normalized_pulse(ReactionParams(0.3))


def test_pulse_dies_above_threshold():
    P = normalized_pulse(ReactionParams(0.45, 1e-3, 3.0), n_xi=799)
    assert not P.exists and not P.converged


@pytest.mark.slow
def test_pulse_exists_and_scales():
    P = normalized_pulse(ReactionParams(0.3, 1e-3, 3.0), n_xi=1499, dt=0.2)
    assert P.exists and P.converged and P.speed > 0
    assert max(abs(P.u[0]), abs(P.u[-1]), abs(P.v[0]), abs(P.v[-1])) < 1e-6
    u, v, c = directional_pulse(ConductivityParams(0.9, 0.0), math.pi / 4, P)
    assert c == pytest.approx(P.speed / math.sqrt(2), rel=1e-12)
    # Q = 1 is impossible for valid parameters; s = 1 is the identity at the isotropic Q = 1/2 scale
    iso = ConductivityParams(0.0, 0.0)
    s = support(iso, 0.0)
    ui, vi, _ = directional_pulse(iso, 0.0, P, xi=P.xi[100:-100:37] * s)
    np.testing.assert_allclose(ui, P.u[100:-100:37], atol=1e-10)
    np.testing.assert_allclose(vi, P.v[100:-100:37], atol=1e-10)


@pytest.mark.slow
def test_pulse_singular_limit_speed():
    P = normalized_pulse(ReactionParams(0.3, 1e-5, 3.0), n_xi=1499, dt=0.2, t_max=600.0)
    assert P.exists
    assert P.speed == pytest.approx(front_speed(0.3), rel=0.02)
