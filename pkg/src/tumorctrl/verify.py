"""Self-verification battery: operator algebra, oracle comparisons, energy,
derivative, adjoint, and optimality checks, all deterministic for a fixed
seed.  Returns machine-readable results; the command-line front end turns
them into a report and an exit status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .adjoint import solve_adjoint, viscosity_sweep
from .config import ExperimentConfig
from .control import (OptimizerOptions, fd_gradient_check,
                      projected_gradient_descent, stationarity_residual)
from .linearized import frechet_remainder_probe, solve_linearized
from .model import Potential, Proliferation, separation_interval
from .problem import ControlProblemSpec
from .reference import SingleModeReduction
from .spectral import (Field, FractionalPower, build_basis, midpoint_grid,
                       norm, solve_power_plus_mult)
from .state import (FULLY_IMPLICIT, SolverConfig, TimeGrid,
                    discrete_energy, energy_identity_residual, max_mu_inf,
                    solve_forward)
from .system import TumorSystem


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _zero_spec(n_steps, N, u_min=-10.0, u_max=10.0, kappas=(1, 0, 1, 0, 1)):
    return ControlProblemSpec(
        kappas=np.asarray(kappas, dtype=float),
        phi_Q=np.zeros((n_steps + 1, N)), S_Q=np.zeros((n_steps + 1, N)),
        phi_Omega=np.zeros(N), S_Omega=np.zeros(N),
        u_min=np.full(N, u_min), u_max=np.full(N, u_max),
    )


# ----------------------------------------------------------------------
# individual checks
# ----------------------------------------------------------------------

def check_operator_algebra(system: TumorSystem, seed: int,
                           n_fields: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = system.grid
    worst = 0.0
    for _ in range(n_fields):
        raw = rng.standard_normal(grid.n_points)
        for op in (system.op_A, system.op_B, system.op_C):
            E, w = op.basis.eigvecs, grid.weights
            v = E @ (E.T @ (w * raw))  # project into the retained span
            scale = max(norm(Field(v, grid)), 1e-12)
            half = op.half()
            comp = half.matrix @ (half.matrix @ v)
            worst = max(worst, norm(Field(comp - op.matrix @ v, grid)) / scale)
            u2 = E @ (E.T @ (w * rng.standard_normal(grid.n_points)))
            sym = abs(np.sum(w * (op.matrix @ v) * u2)
                      - np.sum(w * v * (op.matrix @ u2)))
            worst = max(worst, sym / max(scale * norm(Field(u2, grid)), 1e-12))
        # coercivity of the half power of the first operator
        v = system.op_A.basis.eigvecs @ (
            system.op_A.basis.eigvecs.T @ (grid.weights * raw))
        lam1 = system.op_A.basis.eigenvalues[0] ** system.op_A.half().exponent
        lhs = norm(Field(system.MA_half @ v, grid))
        gap = lam1 * norm(Field(v, grid)) - lhs
        worst = max(worst, gap / max(lhs, 1e-12))
        # inverse consistency of the shifted solve
        m = Field(np.abs(rng.standard_normal(grid.n_points)), grid)
        rhs = Field(rng.standard_normal(grid.n_points), grid)
        sol = solve_power_plus_mult(system.op_A, m, rhs)
        res = system.MA @ sol.values + m.values * sol.values - rhs.values
        worst = max(worst, norm(Field(res, grid)) / max(norm(rhs), 1e-12))
    return CheckResult("operator_algebra", worst <= 1e-9, worst, 1e-9,
                       f"max relative defect over {n_fields} random fields")


def _single_mode_setup(cfg: ExperimentConfig):
    grid = midpoint_grid(1, math.pi)
    eigvec = np.array([[1.0 / math.sqrt(math.pi)]])
    sys_kwargs = {}
    for name, lam, expo in (("op_A", 1.2, 2 * cfg.rho), ("op_B", 0.9, 2 * cfg.sigma),
                            ("op_C", 0.7, 2 * cfg.tau)):
        basis = build_basis("custom", 1, grid, eigenvalues=np.array([lam]),
                            eigvecs=eigvec)
        sys_kwargs[name] = FractionalPower(basis, expo)
    if cfg.potential.get("kind", "regular") == "logarithmic":
        potential = Potential.logarithmic(c1=float(cfg.potential.get("c1", 2.0)))
    else:
        potential = Potential.regular()
    prolif = Proliferation(p0=float(cfg.proliferation.get("p0", 0.5)),
                           p1=float(cfg.proliferation.get("p1", 0.1)))
    system = TumorSystem(grid=grid, potential=potential, proliferation=prolif,
                         **sys_kwargs)
    reduction = SingleModeReduction(
        a=1.2 ** (2 * cfg.rho), b=0.9 ** (2 * cfg.sigma), c=0.7 ** (2 * cfg.tau),
        potential=potential, proliferation=prolif)
    return system, reduction


def check_single_mode_state(cfg: ExperimentConfig, T: float = 0.5,
                            dt: float = 1e-3) -> CheckResult:
    system, red = _single_mode_setup(cfg)
    u_fn = lambda t: 0.3 * math.cos(2.0 * t)
    phi0, S0 = 0.2, 0.4
    tg = TimeGrid(T, int(round(T / dt)))
    u = np.array([[u_fn(t)] for t in tg.times[1:]])
    traj = solve_forward(system, tg, u, np.array([phi0]), np.array([S0]))
    ref_t, ref_mu, ref_phi, ref_S = red.solve_state(phi0, S0, u_fn, T)
    err = 0.0
    for num, ref in ((traj.mu[:, 0], ref_mu), (traj.phi[:, 0], ref_phi),
                     (traj.S[:, 0], ref_S)):
        ref_nodes = np.interp(tg.times, ref_t, ref)
        err = max(err, float(np.max(np.abs(num - ref_nodes))
                             / max(np.max(np.abs(ref_nodes)), 1e-12)))
    return CheckResult("single_mode_state", err <= 2e-2, err, 2e-2,
                       f"max relative error vs RK4 reference at dt={dt}")


def check_single_mode_linearized(cfg: ExperimentConfig, T: float = 0.5,
                                 dt: float = 1e-3) -> CheckResult:
    system, red = _single_mode_setup(cfg)
    u_fn = lambda t: 0.3 * math.cos(2.0 * t)
    h_fn = lambda t: math.sin(t) + 0.5
    phi0, S0 = 0.2, 0.4
    tg = TimeGrid(T, int(round(T / dt)))
    u = np.array([[u_fn(t)] for t in tg.times[1:]])
    h = np.array([[h_fn(t)] for t in tg.times[1:]])
    scfg = SolverConfig(scheme=FULLY_IMPLICIT)
    traj = solve_forward(system, tg, u, np.array([phi0]), np.array([S0]), scfg)
    lin = solve_linearized(system, tg, traj, h, scfg)
    state_ref = red.solve_state(phi0, S0, u_fn, T)
    ref_t, _, ref_xi, ref_zeta = red.solve_linearized(state_ref, h_fn, T)
    err = 0.0
    for num, ref in ((lin.xi[:, 0], ref_xi), (lin.zeta[:, 0], ref_zeta)):
        ref_nodes = np.interp(tg.times, ref_t, ref)
        err = max(err, float(np.max(np.abs(num - ref_nodes))
                             / max(np.max(np.abs(ref_nodes)), 1e-12)))
    return CheckResult("single_mode_linearized", err <= 2e-2, err, 2e-2,
                       f"max relative error vs RK4 reference at dt={dt}")


def check_single_mode_adjoint(cfg: ExperimentConfig, T: float = 0.5,
                              dt: float = 1e-3) -> CheckResult:
    system, red = _single_mode_setup(cfg)
    u_fn = lambda t: 0.3 * math.cos(2.0 * t)
    phi0, S0 = 0.2, 0.4
    tg = TimeGrid(T, int(round(T / dt)))
    n = tg.n_steps
    u = np.array([[u_fn(t)] for t in tg.times[1:]])
    traj = solve_forward(system, tg, u, np.array([phi0]), np.array([S0]))
    spec = _zero_spec(n, 1, kappas=(1.0, 0.5, 1.0, 0.5, 1.0))
    adj = solve_adjoint(system, tg, traj, spec)

    state_ref = red.solve_state(phi0, S0, u_fn, T)
    ref_t, _, ref_phi, ref_S = state_ref
    g1_fn = lambda t: float(np.interp(t, ref_t, ref_phi))
    g3_fn = lambda t: float(np.interp(t, ref_t, ref_S))
    g2 = 0.5 * float(ref_phi[-1])
    g4 = 0.5 * float(ref_S[-1])
    adj_t, ref_q, ref_p, ref_r = red.solve_adjoint(state_ref, g1_fn, g3_fn,
                                                   g2, g4, T)
    err = 0.0
    for num, ref in ((adj.q[:, 0], ref_q), (adj.p[:, 0], ref_p),
                     (adj.r[:, 0], ref_r)):
        ref_nodes = np.interp(tg.times, adj_t, ref)
        err = max(err, float(np.max(np.abs(num - ref_nodes))
                             / max(np.max(np.abs(ref_nodes)), 1e-12)))
    return CheckResult("single_mode_adjoint", err <= 2e-2, err, 2e-2,
                       f"max relative error vs RK4 reference at dt={dt}")


def _generic_run_data(system: TumorSystem, n_steps: int, T: float):
    x = system.grid.points
    L = system.grid.L
    phi0 = 0.3 * np.sin(math.pi * x / L)
    S0 = 0.4 + 0.1 * np.cos(math.pi * x / L)
    tg = TimeGrid(T, n_steps)
    u = 0.2 * np.ones((n_steps, system.n_points))
    return tg, u, phi0, S0


def check_energy_identity(cfg: ExperimentConfig, system: TumorSystem) -> CheckResult:
    tg, u, phi0, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    traj = solve_forward(system, tg, u, phi0, S0)
    res_coarse = float(np.max(energy_identity_residual(system, traj, u)))
    tg2, u2, _, _ = _generic_run_data(system, 2 * cfg.n_steps, cfg.T)
    traj2 = solve_forward(system, tg2, u2, phi0, S0)
    res_fine = float(np.max(energy_identity_residual(system, traj2, u2)))
    ratio = res_coarse / max(res_fine, 1e-300)
    passed = 1.6 <= ratio <= 2.4
    return CheckResult("energy_identity_rate", passed, ratio, 2.4,
                       f"residual ratio under dt halving ({res_coarse:.3e} -> {res_fine:.3e})")


def check_energy_dissipation(cfg: ExperimentConfig, system: TumorSystem) -> CheckResult:
    quiet = TumorSystem(grid=system.grid, op_A=system.op_A, op_B=system.op_B,
                        op_C=system.op_C, potential=system.potential,
                        proliferation=Proliferation.zero())
    tg, _, phi0, S0 = _generic_run_data(quiet, cfg.n_steps, cfg.T)
    traj = solve_forward(quiet, tg, np.zeros((cfg.n_steps, quiet.n_points)),
                         phi0, S0)
    energy = discrete_energy(quiet, traj)
    worst_rise = float(np.max(np.diff(energy)))
    return CheckResult("energy_dissipation", worst_rise <= 1e-12, worst_rise, 1e-12,
                       "largest energy increase with no control and no proliferation")


def smooth_probe_controls(tg: TimeGrid, x: np.ndarray, L: float,
                          rng: np.random.Generator):
    """A smooth base control and perturbation direction with random phases."""
    t = tg.times[1:]
    th = rng.uniform(0.0, 2.0 * math.pi, size=4)
    sx, cx = np.sin(math.pi * x / L), np.cos(math.pi * x / L)
    u_bar = 1.0 + 0.5 * np.outer(np.sin(3.0 * t + th[0]), cx)
    h = 2.0 * (np.outer(np.sin(2.0 * t + th[1]) + 1.2, sx)
               + np.outer(np.cos(5.0 * t + th[2]), cx))
    return u_bar, h


def frechet_probe_for_config(cfg: ExperimentConfig, system: TumorSystem,
                             seed: int):
    """Derivative-remainder sweep on a well-conditioned probe problem.

    Strong proliferation coupling and smooth low-mode control profiles keep
    the quadratic remainder well above the Newton noise floor across the
    whole epsilon sweep; spatially rough directions are crushed by the
    diffusion operators and would bury the signal.
    """
    probe_sys = TumorSystem(grid=system.grid, op_A=system.op_A,
                            op_B=system.op_B, op_C=system.op_C,
                            potential=system.potential,
                            proliferation=Proliferation(p0=2.0, p1=0.5))
    rng = np.random.default_rng(seed + 1)
    tg = TimeGrid(1.0, 500)
    x = system.grid.points
    phi0 = 0.8 * np.sin(math.pi * x / cfg.L)
    S0 = 2.0 + 0.5 * np.cos(math.pi * x / cfg.L)
    u_bar, h = smooth_probe_controls(tg, x, cfg.L, rng)
    scfg = SolverConfig(newton_tol=1e-12, scheme=FULLY_IMPLICIT)
    return frechet_remainder_probe(probe_sys, tg, u_bar, h, phi0, S0, cfg=scfg)


def check_frechet_slope(cfg: ExperimentConfig, system: TumorSystem,
                        seed: int) -> CheckResult:
    _, _, slope = frechet_probe_for_config(cfg, system, seed)
    passed = 1.8 <= slope <= 2.2
    return CheckResult("frechet_slope", passed, slope, 2.2,
                       "log-log slope of the derivative remainder")


def check_gradient_consistency(cfg: ExperimentConfig, system: TumorSystem,
                               seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 2)
    tg, _, phi0, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    n, N = cfg.n_steps, system.n_points
    spec = _zero_spec(n, N, kappas=(1, 1, 1, 1, 1))
    u = 0.2 * np.ones((n, N))
    h = rng.standard_normal((n, N)).clip(-1, 1)
    _, errors = fd_gradient_check(system, tg, u, h, phi0, S0, spec,
                                  eps_list=(1e-3,))
    err = float(errors[0])
    return CheckResult("gradient_consistency", err <= 1e-2, err, 1e-2,
                       "relative gap between central differences and the adjoint gradient")


def check_gradient_quadratic(cfg: ExperimentConfig, system: TumorSystem,
                             seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 3)
    tg, _, phi0, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    n, N = cfg.n_steps, system.n_points
    spec = _zero_spec(n, N, kappas=(0, 0, 0, 0, 1.0))
    u = 0.2 * np.ones((n, N))
    h = rng.standard_normal((n, N)).clip(-1, 1)
    _, errors = fd_gradient_check(system, tg, u, h, phi0, S0, spec,
                                  eps_list=(1e-2,))
    err = float(errors[0])
    return CheckResult("gradient_quadratic", err <= 1e-8, err, 1e-8,
                       "purely quadratic cost: central differences are exact")


def check_viscosity_sweep(cfg: ExperimentConfig, system: TumorSystem) -> CheckResult:
    tg, u, phi0, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    traj = solve_forward(system, tg, u, phi0, S0)
    spec = _zero_spec(cfg.n_steps, system.n_points, kappas=(1, 0, 1, 0, 1))
    sweep = viscosity_sweep(system, tg, traj, spec)
    monotone = bool(np.all(np.diff(sweep) < 0.0))
    final = float(sweep[-1])
    passed = monotone and final <= 1e-3
    return CheckResult("viscosity_sweep", passed, final, 1e-3,
                       f"discrepancies {np.array2string(sweep, precision=3)}; "
                       f"monotone={monotone}")


def check_stationarity(cfg: ExperimentConfig, system: TumorSystem) -> CheckResult:
    tg, _, phi0, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    n, N = cfg.n_steps, system.n_points
    spec = _zero_spec(n, N, u_min=-1.0, u_max=1.0, kappas=(0, 0, 0, 0, 1.0))
    report = projected_gradient_descent(
        system, tg, 0.5 * np.ones((n, N)), phi0, S0, spec,
        OptimizerOptions(max_iters=20, tol=1e-8))
    final_adj = report.adjoint_final
    stat = stationarity_residual(system, tg, report.u_final, final_adj, spec)
    passed = stat <= 1e-8 and report.status == "converged"
    return CheckResult("stationarity", passed, stat, 1e-8,
                       f"projected gradient status={report.status}, "
                       f"iterations={report.n_iterations}")


def check_separation(cfg: ExperimentConfig) -> CheckResult:
    grid = midpoint_grid(cfg.n_points, cfg.L)
    ops = {}
    for name, kind, expo in (("op_A", cfg.kind_A, 2 * cfg.rho),
                             ("op_B", cfg.kind_B, 2 * cfg.sigma),
                             ("op_C", cfg.kind_C, 2 * cfg.tau)):
        ops[name] = FractionalPower(build_basis(kind, cfg.n_modes, grid), expo)
    potential = Potential.logarithmic(c1=2.0)
    system = TumorSystem(grid=grid, potential=potential,
                         proliferation=Proliferation(), **ops)
    tg, _, _, S0 = _generic_run_data(system, cfg.n_steps, cfg.T)
    phi0 = 0.5 * np.sin(math.pi * grid.points / cfg.L)
    u = 0.3 * np.ones((cfg.n_steps, cfg.n_points))
    traj = solve_forward(system, tg, u, phi0, S0)
    margin = float(min(np.min(1.0 - traj.phi), np.min(traj.phi + 1.0)))
    M = max_mu_inf(traj) + 1.0
    a0, b0 = float(np.min(phi0)), float(np.max(phi0))
    interval = separation_interval(potential, M, a0, b0)
    confined = bool(np.all(traj.phi >= interval.a_M)
                    and np.all(traj.phi <= interval.b_M))
    passed = margin >= 1e-3 and confined
    return CheckResult("separation", passed, margin, 1e-3,
                       f"phase field confined to [{interval.a_M:.4f}, "
                       f"{interval.b_M:.4f}] = {confined}")


def run_verification(cfg: ExperimentConfig) -> list:
    """Run the full battery on the configured problem; deterministic per seed."""
    system = cfg.build_system()
    results = [
        check_operator_algebra(system, cfg.seed),
        check_single_mode_state(cfg),
        check_single_mode_linearized(cfg),
        check_single_mode_adjoint(cfg),
        check_energy_identity(cfg, system),
        check_energy_dissipation(cfg, system),
        check_frechet_slope(cfg, system, cfg.seed),
        check_gradient_consistency(cfg, system, cfg.seed),
        check_gradient_quadratic(cfg, system, cfg.seed),
        check_viscosity_sweep(cfg, system),
        check_stationarity(cfg, system),
        check_separation(cfg),
    ]
    return results
