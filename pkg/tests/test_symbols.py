import numpy as np
import pytest
from hypothesis import given, strategies as st

from bidomain.symbols import (ConductivityParams, DirectionalMatrices, directional_matrices,
                              directional_multiplier, multiplier, normal_multiplier, rotation,
                              unit_vector)


def random_params(rng, n):
    # |a +- b| <= 0.99
    out = []
    while len(out) < n:
        a, b = rng.uniform(-0.99, 0.99, 2)
        if abs(a + b) <= 0.99 and abs(a - b) <= 0.99:
            out.append(ConductivityParams(a, b))
    return out


def test_equivariance_random_samples(rng):
    worst = 0.0
    for p in random_params(rng, 1000):
        th = rng.uniform(0, 2 * np.pi)
        k = rng.normal(size=2) * rng.uniform(0.01, 10)
        q_rot = directional_multiplier(p, th, k)
        q = multiplier(p, rotation(-th) @ k)
        worst = max(worst, abs(q_rot - q) / q)
    assert worst < 1e-12


def test_rotated_identity_fails_in_the_other_direction():
    # the identity holds with R^{-theta}; R^{theta} would differ for generic k
    p, th, k = ConductivityParams(0.6, 0.2), 0.4, np.array([0.3, 1.1])
    assert abs(directional_multiplier(p, th, k) - multiplier(p, rotation(th) @ k)) > 1e-3


def test_homogeneity(rng):
    for p in random_params(rng, 200):
        k = rng.normal(size=2)
        s = rng.uniform(1e-6, 10)
        assert multiplier(p, s * k) == pytest.approx(s * s * multiplier(p, k), rel=1e-12)


def test_bounds(rng):
    for p in random_params(rng, 500):
        k = rng.normal(size=2)
        r = multiplier(p, k) / (k @ k)
        assert 0 < r <= (1 + abs(p.a) + abs(p.b)) / 2 + 1e-15


def test_monodomain_degeneration(rng):
    p = ConductivityParams(0.0, 0.0)
    k = rng.normal(size=(50, 2))
    np.testing.assert_allclose(multiplier(p, k), 0.5 * (k * k).sum(axis=1), rtol=1e-14)


def test_vectorised_and_zero():
    p = ConductivityParams(0.9)
    assert multiplier(p, [0.0, 0.0]) == 0.0
    k = np.zeros((3, 4, 2))
    k[..., 0] = 1.0
    assert multiplier(p, k).shape == (3, 4)


@given(st.floats(-0.98, 0.98), st.floats(0, 2 * np.pi))
def test_normal_multiplier_matches_symbol(a, th):
    p = ConductivityParams(a, 0.0)
    assert normal_multiplier(p, th) == pytest.approx(multiplier(p, unit_vector(th)), rel=1e-12, abs=1e-15)
    m = directional_matrices(p, th)
    assert m.normal_coefficient == pytest.approx(normal_multiplier(p, th), rel=1e-12, abs=1e-15)


def test_directional_entries_at_pi_over_4():
    m = directional_matrices(ConductivityParams(0.9, 0.0), np.pi / 4)
    assert m.a_i == pytest.approx(1.0) and m.c_i == pytest.approx(1.0)
    assert m.b_i == pytest.approx(0.9) and m.b_e == pytest.approx(-0.9)


def test_scalar_diffusion_symbol():
    m = DirectionalMatrices.scalar_diffusion(1.0)
    assert m.normal_coefficient == 1.0


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (0.6, 0.5), (-0.5, -0.5)])
def test_invalid_params(a, b):
    with pytest.raises(ValueError):
        ConductivityParams(a, b)
