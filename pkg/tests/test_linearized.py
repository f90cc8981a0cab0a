import math

import numpy as np
import pytest

from tumorctrl import (FULLY_IMPLICIT, Proliferation, SolverConfig, TimeGrid,
                       frechet_remainder_probe, solve_forward,
                       solve_linearized, y_norm)
from tumorctrl.verify import smooth_probe_controls

from conftest import build_system, single_mode_system


def test_zero_direction_gives_zero(generic_run):
    system, tg, u, phi0, S0, traj = generic_run
    lin = solve_linearized(system, tg, traj, np.zeros((tg.n_steps, system.n_points)))
    assert not np.any(lin.eta)
    assert not np.any(lin.xi)
    assert not np.any(lin.zeta)


def test_linearity_in_direction(generic_run):
    system, tg, u, phi0, S0, traj = generic_run
    rng = np.random.default_rng(0)
    h1 = rng.standard_normal((tg.n_steps, system.n_points))
    h2 = rng.standard_normal((tg.n_steps, system.n_points))
    a, b = 1.7, -0.4
    lin1 = solve_linearized(system, tg, traj, h1)
    lin2 = solve_linearized(system, tg, traj, h2)
    lin12 = solve_linearized(system, tg, traj, a * h1 + b * h2)
    for comb, parts in ((lin12.xi, (lin1.xi, lin2.xi)),
                        (lin12.zeta, (lin1.zeta, lin2.zeta)),
                        (lin12.eta, (lin1.eta, lin2.eta))):
        expected = a * parts[0] + b * parts[1]
        scale = max(np.max(np.abs(expected)), 1.0)
        assert np.max(np.abs(comb - expected)) <= 1e-9 * scale


def test_step_count_mismatch_rejected(generic_run):
    system, tg, u, phi0, S0, traj = generic_run
    with pytest.raises(ValueError):
        solve_linearized(system, TimeGrid(tg.T, tg.n_steps + 1), traj,
                         np.zeros((tg.n_steps + 1, system.n_points)))


def test_single_mode_linearized_matches_rk4():
    system, red = single_mode_system()
    T, n = 0.5, 500
    tg = TimeGrid(T, n)
    u_fn = lambda t: 0.3 * math.cos(2.0 * t)
    h_fn = lambda t: math.sin(t) + 0.5
    u = np.array([[u_fn(t)] for t in tg.times[1:]])
    h = np.array([[h_fn(t)] for t in tg.times[1:]])
    cfg = SolverConfig(scheme=FULLY_IMPLICIT, newton_tol=1e-12)
    traj = solve_forward(system, tg, u, np.array([0.2]), np.array([0.4]), cfg)
    lin = solve_linearized(system, tg, traj, h, cfg)
    ref_state = red.solve_state(0.2, 0.4, u_fn, T)
    ref_t, ref_eta, ref_xi, ref_zeta = red.solve_linearized(ref_state, h_fn, T)
    for num, ref in ((lin.eta[:, 0], ref_eta), (lin.xi[:, 0], ref_xi),
                     (lin.zeta[:, 0], ref_zeta)):
        ref_nodes = np.interp(tg.times, ref_t, ref)
        rel = np.max(np.abs(num - ref_nodes)) / max(np.max(np.abs(ref_nodes)), 1e-12)
        assert rel <= 2e-2


def test_finite_difference_of_forward_map(generic_run):
    # the linearized solve is the exact derivative of the discrete step,
    # so a centered difference of the forward map converges to it
    system, tg, u, phi0, S0, traj = generic_run
    rng = np.random.default_rng(4)
    h = rng.standard_normal((tg.n_steps, system.n_points))
    lin = solve_linearized(system, tg, traj, h)
    eps = 1e-6
    cfg = SolverConfig(newton_tol=1e-13)
    plus = solve_forward(system, tg, u + eps * h, phi0, S0, cfg)
    minus = solve_forward(system, tg, u - eps * h, phi0, S0, cfg)
    fd_xi = (plus.phi - minus.phi) / (2 * eps)
    fd_zeta = (plus.S - minus.S) / (2 * eps)
    assert np.max(np.abs(fd_xi - lin.xi)) <= 1e-5 * max(np.max(np.abs(lin.xi)), 1.0)
    assert np.max(np.abs(fd_zeta - lin.zeta)) <= 1e-5 * max(np.max(np.abs(lin.zeta)), 1.0)


def test_y_norm_properties(small_system):
    tg = TimeGrid(0.2, 50)
    shape = (tg.n_steps + 1, small_system.n_points)
    zeros = np.zeros(shape)
    assert y_norm(small_system, tg, zeros, zeros) == 0.0
    rng = np.random.default_rng(9)
    xi = rng.standard_normal(shape)
    zeta = rng.standard_normal(shape)
    val = y_norm(small_system, tg, xi, zeta)
    assert val > 0
    assert abs(y_norm(small_system, tg, 2 * xi, 2 * zeta) - 2 * val) <= 1e-10 * val


def test_probe_rejects_zero_direction(generic_run):
    system, tg, u, phi0, S0, traj = generic_run
    with pytest.raises(ValueError):
        frechet_remainder_probe(system, tg, u, np.zeros_like(u), phi0, S0)


def test_frechet_slope_quadratic():
    system = build_system(n_points=32,
                          proliferation=Proliferation(p0=2.0, p1=0.5))
    tg = TimeGrid(1.0, 500)
    x = system.grid.points
    rng = np.random.default_rng(17)
    u_bar, h = smooth_probe_controls(tg, x, system.grid.L, rng)
    phi0 = 0.8 * np.sin(x)
    S0 = 2.0 + 0.5 * np.cos(x)
    cfg = SolverConfig(scheme=FULLY_IMPLICIT, newton_tol=1e-12)
    scales, remainders, slope = frechet_remainder_probe(
        system, tg, u_bar, h, phi0, S0, cfg=cfg)
    assert 1.8 <= slope <= 2.2
    # each decade in eps buys two decades in the remainder
    ratios = remainders[:-1] / remainders[1:]
    assert np.all(ratios > 30.0)
