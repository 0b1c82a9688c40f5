import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from bidomain.analytic import directional_front
from bidomain.diagnostics import extract_level_set, peak_position
from bidomain.front_shape import (Diverged, PlanarCollapse, continue_theta, front_residual, iterate_front,
                                  planar_seed, shifted_linear_solve, trace_existence_boundary, update_c_xi,
                                  zigzag_seed)
from bidomain.reaction import ReactionParams
from bidomain.strip import StripField, StripGrid, front_position, run_strip, shift_values
from bidomain.symbols import ConductivityParams, directional_matrices

P9 = ConductivityParams(0.9, 0.0)
TH = math.pi / 4


@pytest.fixture(scope="module")
def zigzag():
    g = StripGrid(50.0, 64, 399, kmap=10.0)
    return iterate_front(zigzag_seed(g, P9, TH, 0.4), anderson=5)


def test_planar_fixed_point():
    g = StripGrid(20.0, 8, 399)
    th = 0.1  # convex part of the Frank plot
    sol = iterate_front(planar_seed(g, P9, th, 0.4))
    assert sol.c_xi == pytest.approx(directional_front(P9, th, 0.4).speed, abs=1e-3)
    assert sol.c_eta == 0.0 and sol.eta_variation() < 1e-12
    assert sol.residual <= 1e-7


def test_zigzag_residual_and_speeds(zigzag):
    assert zigzag.residual <= 10 * 1e-8
    assert zigzag.residual == pytest.approx(front_residual(zigzag))
    assert abs(zigzag.c_eta) < 1e-2  # symmetric direction
    assert zigzag.eta_variation() > 0.5
    # finite width: a little faster than the flank geometry, far below the planar speed
    assert 0.06 < zigzag.c_xi < 0.07


def test_gauges(zigzag):
    g = zigzag.grid
    assert abs(front_position(g, zigzag.field())) <= 0.5
    # level-set first harmonic peaks at d / 2
    ls = extract_level_set(zigzag.field(), g)
    y = ls.xi_half - ls.xi_half.mean()
    c1 = np.fft.rfft(y)[1]
    assert math.remainder(-np.angle(c1) * g.d / (2 * np.pi) - g.d / 2, g.d) == pytest.approx(0.0, abs=1e-6)
    assert peak_position(ls) == pytest.approx(g.d / 2, abs=g.d / g.n_eta)


def test_fixed_point_is_single_sweep_fixed_point(zigzag):
    again = iterate_front(zigzag, anderson=0, max_iters=3)
    assert again.iterations <= 2
    assert np.abs(again.u - zigzag.u).max() < 1e-7
    assert again.c_xi == pytest.approx(zigzag.c_xi, abs=1e-9)


def test_c_xi_identity_matches_quadrature(zigzag):
    from bidomain.front_shape import _Operators
    ops = _Operators(zigzag.grid, P9, TH)
    Ui = ops.solve_ui(zigzag.grid.to_modes(zigzag.u))
    exact = update_c_xi(zigzag.u, zigzag.grid, 0.4, ops, Ui)
    quad = update_c_xi(zigzag.u, zigzag.grid, 0.4)
    assert exact == pytest.approx(zigzag.c_xi, abs=1e-9)
    assert quad == pytest.approx(exact, rel=5e-3)


def test_time_evolution_consistency(zigzag):
    g = zigzag.grid
    xc = front_position(g, zigzag.field())
    ref = shift_values(g, zigzag.field().full_u(), xc)
    m = directional_matrices(P9, TH)
    run = run_strip(StripField(u=ref.copy()), g, m, ReactionParams(0.4), 0.1, 100.0, probe_every=100)
    U1 = np.fft.rfft(run.final.u, axis=1)
    w = 2 * np.pi * np.arange(U1.shape[1]) / g.d
    err = lambda s: np.abs(np.fft.irfft(U1 * np.exp(-1j * w * s), n=g.n_eta, axis=1) - ref).max()
    guess = zigzag.c_eta * 100.0
    best = minimize_scalar(err, bounds=(guess - 5, guess + 5), method="bounded", options={"xatol": 1e-8})
    assert best.fun <= 1e-3


def test_shifted_solve_validates_and_solves():
    g = StripGrid(10.0, 4, 99)
    with pytest.raises(ValueError):
        shifted_linear_solve(np.zeros((99, 3)), g, P9, TH, 0.1, 0.0, f0=0.2)
    seed = planar_seed(g, P9, TH, 0.4)
    U, Ui = shifted_linear_solve(np.zeros((99, 3)), g, P9, TH, 0.1, 0.0)
    assert np.abs(U[:, 1:]).max() == 0  # only mode 0 carries the limit data
    assert np.all(np.isfinite(U)) and np.abs(Ui).max() > 0
    assert seed.u.shape == (99, 4)


def test_zigzag_seed_requires_nonconvex_direction():
    g = StripGrid(50.0, 16, 99)
    with pytest.raises(ValueError):
        zigzag_seed(g, P9, 0.01, 0.4)


def test_collapse_on_stable_side():
    # at a convex direction a zigzag-like seed relaxes to the planar front
    g = StripGrid(50.0, 32, 199)
    p = ConductivityParams(0.6, 0.0)
    seed = zigzag_seed(g, p, 0.5, 0.4)
    with pytest.raises(PlanarCollapse):
        iterate_front(seed, anderson=5, zigzag=True, collapse_tol=1e-5)
    assert issubclass(PlanarCollapse, Diverged)


def test_diverged_budget():
    g = StripGrid(50.0, 32, 199)
    with pytest.raises(Diverged):
        iterate_front(zigzag_seed(g, P9, TH, 0.4), max_iters=2)


def test_continuation_and_boundary_bracket(zigzag):
    # a=0.9 zigzags continue to a nearby angle and back
    near = continue_theta(zigzag, TH - 0.02, anderson=5)
    assert near.theta == TH - 0.02 and near.residual <= 1e-7
    g = StripGrid(50.0, 32, 199)
    sol = iterate_front(zigzag_seed(g, ConductivityParams(0.7, 0.0), TH, 0.4), anderson=5)
    b = trace_existence_boundary(sol, 0.2, step=0.05, anderson=5, max_iters=1500)
    assert b.theta_fails is not None and b.bracket <= 1e-3
    assert b.theta_fails < b.theta_exists
    assert [t for t, _, _ in b.path] == sorted((t for t, _, _ in b.path), reverse=True)
