import math

import numpy as np
import pytest

from bidomain.analytic import directional_front, front_profile
from bidomain.reaction import ReactionParams
from bidomain.strip import (BidomainCN, FrontLost, StripField, StripGrid, bidomain_cn_step, fd_first, fd_second,
                            front_position, perturbation, planar_front_field, regrid, run_strip, shift_values,
                            strang_step_strip)
from bidomain.symbols import ConductivityParams, directional_matrices, directional_multiplier

P9 = ConductivityParams(0.9, 0.0)
M9 = directional_matrices(P9, math.pi / 4)
R4 = ReactionParams(0.4)


def test_grid_nodes():
    g = StripGrid(1.0, 2, 3, kmap=2.5)
    np.testing.assert_allclose(g.z, [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_allclose(g.xi_interior, [-2.5, 0, 2.5], atol=1e-14)
    assert g.xi[0] == -np.inf and g.xi[-1] == np.inf
    assert g.gprime(0.0) == pytest.approx(2.5 * math.pi / 2)
    g = StripGrid(1.0, 2, 101)
    np.testing.assert_allclose(g.xi_interior, -g.xi_interior[::-1], atol=1e-12)
    assert np.all(np.diff(g.xi_interior) > 0) and np.all(g.gph > 0)
    for bad in [(1.0, 3, 9), (1.0, 2, 2), (-1.0, 2, 9)]:
        with pytest.raises(ValueError):
            StripGrid(*bad)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")  # Gaussian test data at the infinite end nodes
def test_fd_constants_and_symmetry():
    g = StripGrid(1.0, 2, 199)
    c = np.full(201, 0.3)
    assert np.abs(fd_first(g, c)).max() < 1e-15 and np.abs(fd_second(g, c)).max() < 1e-12
    xi = g.xi
    F = np.exp(-np.nan_to_num(xi, posinf=1e300, neginf=-1e300) ** 2 / 8)
    d2 = fd_second(g, F)
    np.testing.assert_allclose(d2, d2[::-1], atol=1e-13)


def _fd_errors(op, F, dF):
    errs = []
    for n in (199, 399, 799):
        g = StripGrid(1.0, 2, n, kmap=10.0)
        xi = g.xi_interior
        full = np.r_[F(-np.inf), F(xi), F(np.inf)]
        errs.append(np.abs(op(g, full) - dF(xi)).max())
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


def test_fd_first_order_two():
    orders = _fd_errors(fd_first, lambda x: np.tanh(np.asarray(x) / 2), lambda x: 0.5 * (1 - np.tanh(x / 2) ** 2))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_fd_second_order_two():
    gauss = lambda x: np.exp(-np.square(np.asarray(x, dtype=float)) / 8)
    orders = _fd_errors(fd_second, gauss, lambda x: (x * x / 16 - 0.25) * np.exp(-x * x / 8))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_cn_constant_unchanged():
    g = StripGrid(20.0, 8, 99)
    f = StripField(u=np.full((99, 8), 0.25), u_minus=0.25, u_plus=0.25)
    out = bidomain_cn_step(f, g, M9, 0.3)
    assert np.abs(out.u - 0.25).max() < 1e-13


def test_cn_isotropic_mode_damping():
    # away from the compactified ends a xi-uniform eta mode sees the scalar CN factor
    p = ConductivityParams(0.0, 0.0)
    g = StripGrid(10.0, 8, 399, kmap=10.0)
    m = directional_matrices(p, 0.3)
    dt = 0.4
    w = g.wavenumbers[1]
    u = np.repeat(np.cos(w * g.eta)[None, :], g.n_xi, axis=0)
    out = BidomainCN(g, m, dt).step(u, 0.0, 0.0)
    q = float(directional_multiplier(p, 0.3, np.array([0.0, w])))
    fac = (1 - q * dt / 2) / (1 + q * dt / 2)
    mid = slice(150, 250)
    np.testing.assert_allclose(out[mid], fac * u[mid], atol=1e-10)


def test_strang_reaction_disabled_and_equilibrium():
    g = StripGrid(20.0, 8, 99)
    f = planar_front_field(g, M9, perturb=1e-2)
    lin = bidomain_cn_step(f, g, M9, 0.2)
    spl = strang_step_strip(f, g, M9, ReactionParams(0.4, enabled=False), 0.2)
    np.testing.assert_array_equal(lin.u, spl.u)
    one = StripField(u=np.ones((99, 8)), u_minus=1.0, u_plus=1.0)
    assert np.abs(strang_step_strip(one, g, M9, R4, 0.2).u - 1).max() < 1e-13


def test_planar_invariance():
    g = StripGrid(30.0, 16, 199)
    run = run_strip(planar_front_field(g, M9), g, M9, R4, 0.1, 20.0, probe_every=50)
    u = run.final.u
    assert np.abs(u - u[:, :1]).max() < 1e-12


def test_travelling_wave_speed():
    g = StripGrid(2 * math.pi / 0.6, 8, 799, kmap=10.0)
    run = run_strip(planar_front_field(g, M9, perturb=1e-3), g, M9, R4, 0.1, 150.0, probe_every=10)
    pr = run.probes()
    sel = pr["t"] >= 50
    c = np.polyfit(pr["t"][sel], pr["front_offset"][sel], 1)[0]
    assert c == pytest.approx(directional_front(P9, math.pi / 4, 0.4).speed, rel=0.01)
    assert run.final.front_offset == pytest.approx(0.1 * 150, rel=0.01)
    assert np.ptp(run.final.u, axis=1).max() < 1e-3  # the perturbation decayed at this width


def test_regrid_identity_and_translation():
    g = StripGrid(10.0, 4, 399, kmap=10.0)
    u0 = np.repeat(front_profile(g.xi_interior)[:, None], 4, axis=1)
    f = StripField(u=u0)
    assert front_position(g, f) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(regrid(f, g).u, u0, atol=1e-14)
    # shift by one central node spacing
    delta = g.xi_interior[200] - g.xi_interior[199]
    f2 = StripField(u=np.repeat(front_profile(g.xi_interior - delta)[:, None], 4, axis=1))
    back = regrid(f2, g)
    assert back.front_offset == pytest.approx(delta, rel=1e-9)
    central = np.abs(g.xi_interior) < 20
    assert np.abs(back.u[central] - u0[central]).max() < 1e-4
    # interpolation error is third order in the local spacing
    errs = []
    for n in (199, 399, 799):
        g = StripGrid(10.0, 2, n, kmap=10.0)
        full = np.r_[1.0, front_profile(g.xi_interior), 0.0][:, None]
        s = 0.37 * (g.xi_interior[n // 2 + 1] - g.xi_interior[n // 2])
        errs.append(np.abs(shift_values(g, full, s)[:, 0] - front_profile(g.xi_interior + s)).max())
    assert 2.6 < math.log2(errs[1] / errs[2]) < 3.4


def test_regrid_keeps_monotone_profile():
    g = StripGrid(20.0, 8, 199)
    f = planar_front_field(g, M9, perturb=0.1)
    shifted = StripField(u=shift_values(g, f.full_u(), -3.3))
    out = regrid(shifted, g)
    assert np.all(np.diff(out.full_u().mean(axis=1)) <= 1e-15)


def test_front_lost():
    g = StripGrid(10.0, 2, 49)
    with pytest.raises(FrontLost):
        front_position(g, StripField(u=np.ones((49, 2)), u_minus=1.0, u_plus=1.0))


def test_perturbation_reproducible():
    g = StripGrid(50.0, 32, 9)
    a, b = perturbation(g, 1e-3, seed=4), perturbation(g, 1e-3, seed=4)
    np.testing.assert_array_equal(a, b)
    assert np.abs(a).max() == pytest.approx(1e-3)
    assert not np.array_equal(a, perturbation(g, 1e-3, seed=5))
    one = perturbation(g, 1.0, seed=0, modes=[3])
    assert np.abs(np.fft.rfft(one))[[1, 2, 4]].max() < 1e-12


@pytest.mark.parametrize("d,grows", [(2 * math.pi / 0.6, False), (2 * math.pi / 0.1, True)])
def test_width_controls_stability(d, grows):
    n_eta = max(8, 2 * round(d / 2))
    g = StripGrid(d, n_eta, 399)
    run = run_strip(planar_front_field(g, M9, perturb=1e-3), g, M9, R4, 0.1, 300.0, probe_every=100)
    amp = np.asarray(run.eta_amplitude)
    assert (amp[-1] > 10 * amp[0]) == grows
    if not grows:
        assert amp[-1] < 0.1 * amp[0]
