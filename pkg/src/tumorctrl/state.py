"""Forward solve of the three-field state system by implicit Euler + Newton.

Each step solves, for the stacked unknowns (mu, phi, S) at the new node,

    (phi+ - phi)/dt + A^{2rho} mu+          = P(phi*) (S+ - mu+)
    (phi+ - phi)/dt + B^{2sigma} phi+ + f(phi+) = mu+
    (S+ - S)/dt     + C^{2tau} S+ + P(phi*) (S+ - mu+) = u_k

with phi* = old phi (semi_implicit_P, default) or phi* = phi+ (fully
implicit).  Newton updates are damped so phi iterates never leave the
potential domain (fraction-to-the-boundary rule).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SeparationFailureError, StepFailureError
from .spectral import Field, solve_power_plus_mult
from .system import TumorSystem

SEMI_IMPLICIT_P = "semi_implicit_P"
FULLY_IMPLICIT = "fully_implicit"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on (0, T) with nodes t_0 = 0 ... t_n = T."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0.0 and self.n_steps >= 1):
            raise ValueError("need T > 0 and n_steps >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    damping: float = 0.95
    scheme: str = SEMI_IMPLICIT_P
    split_f2_explicit: bool = False  # stabilized variant: f1 implicit, f2 explicit

    def __post_init__(self):
        if self.newton_tol <= 0.0 or not (0.0 < self.damping <= 1.0):
            raise ValueError("tolerances and damping must be positive")
        if self.scheme not in (SEMI_IMPLICIT_P, FULLY_IMPLICIT):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class StateTrajectory:
    times: np.ndarray
    mu: np.ndarray   # shape (n_steps + 1, n_points)
    phi: np.ndarray
    S: np.ndarray
    newton_iterations: np.ndarray
    scheme: str = SEMI_IMPLICIT_P
    split_f2_explicit: bool = False

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


def initial_mu(system: TumorSystem, phi0: np.ndarray, S0: np.ndarray) -> np.ndarray:
    """Solve (A^{2rho} + P(phi0)) mu(0) = P(phi0) S0."""
    _check_phi_domain(system, phi0, "phi0")
    P0 = system.proliferation(phi0)
    rhs = Field(P0 * S0, system.grid)
    sol = solve_power_plus_mult(system.op_A, Field(P0, system.grid), rhs)
    return sol.values


def _check_phi_domain(system: TumorSystem, phi: np.ndarray, name: str):
    # raises DomainViolationError via the potential's own guard
    system.potential.f(phi if np.ndim(phi) else float(phi))
    del name


def _f_and_derivative(system, cfg, phi_new, phi_old):
    pot = system.potential
    if cfg.split_f2_explicit:
        f_val = pot.f1(phi_new) + (pot.f(phi_old) - pot.f1(phi_old))
        df_val = pot.df1(phi_new)
    else:
        f_val = pot.f(phi_new)
        df_val = pot.df(phi_new)
    return f_val, df_val


def _boundary_step_fraction(system, cfg, phi, dphi) -> float:
    a, b = system.potential.domain
    alpha = 1.0
    if np.isfinite(b):
        up = dphi > 0.0
        if np.any(up):
            alpha = min(alpha, cfg.damping * np.min((b - phi[up]) / dphi[up]))
    if np.isfinite(a):
        dn = dphi < 0.0
        if np.any(dn):
            alpha = min(alpha, cfg.damping * np.min((phi[dn] - a) / (-dphi[dn])))
    return max(alpha, 0.0)


def step(system: TumorSystem, cfg: SolverConfig, dt: float,
         prev: tuple, u_k: np.ndarray, step_index: int = 0) -> tuple:
    """One implicit Euler step; returns (mu, phi, S, newton_iterations)."""
    mu_p, phi_p, S_p = (np.asarray(v, dtype=float) for v in prev)
    _check_phi_domain(system, phi_p, "phi")
    N = system.n_points
    w = system.grid.weights
    P_fun = system.proliferation
    semi = cfg.scheme == SEMI_IMPLICIT_P
    P_old = P_fun(phi_p)

    idx = np.arange(N)
    I_dt = np.eye(N) / dt

    # constant part of the Jacobian
    J0 = np.zeros((3 * N, 3 * N))
    J0[0:N, 0:N] = system.MA
    J0[0:N, N:2 * N] = I_dt
    J0[N:2 * N, 0:N] = -np.eye(N)
    J0[N:2 * N, N:2 * N] = I_dt + system.MB
    J0[2 * N:, 2 * N:] = I_dt + system.MC

    mu, phi, S = mu_p.copy(), phi_p.copy(), S_p.copy()

    def residual(mu, phi, S):
        Pv = P_old if semi else P_fun(phi)
        react = Pv * (S - mu)
        f_val, _ = _f_and_derivative(system, cfg, phi, phi_p)
        r1 = (phi - phi_p) / dt + system.MA @ mu - react
        r2 = (phi - phi_p) / dt + system.MB @ phi + f_val - mu
        r3 = (S - S_p) / dt + system.MC @ S + react - u_k
        return r1, r2, r3

    prev_res = np.inf
    for it in range(cfg.newton_max_iter + 1):
        r1, r2, r3 = residual(mu, phi, S)
        res_norm = float(np.sqrt(np.sum(w * (r1 * r1 + r2 * r2 + r3 * r3))))
        # accept on reaching the tolerance, or on stagnating at the roundoff
        # floor of the linear algebra (tolerances below that floor would
        # otherwise exhaust the iteration budget at full accuracy)
        at_floor = res_norm > 0.9 * prev_res and res_norm <= 1e-8
        if res_norm <= cfg.newton_tol or at_floor:
            _check_separation_margin(system, phi, step_index)
            return mu, phi, S, it
        if it == cfg.newton_max_iter:
            raise StepFailureError(step_index, res_norm, it)
        prev_res = res_norm

        Pv = P_old if semi else P_fun(phi)
        _, df_val = _f_and_derivative(system, cfg, phi, phi_p)
        J = J0.copy()
        J[idx, idx] += Pv
        J[idx, 2 * N + idx] -= Pv
        J[2 * N + idx, idx] -= Pv
        J[2 * N + idx, 2 * N + idx] += Pv
        J[N + idx, N + idx] += df_val
        if not semi:
            dP_term = P_fun.d1(phi) * (S - mu)
            J[idx, N + idx] -= dP_term
            J[2 * N + idx, N + idx] += dP_term

        delta = np.linalg.solve(J, -np.concatenate([r1, r2, r3]))
        alpha = _boundary_step_fraction(system, cfg, phi, delta[N:2 * N])
        mu = mu + alpha * delta[0:N]
        phi = phi + alpha * delta[N:2 * N]
        S = S + alpha * delta[2 * N:]


def _check_separation_margin(system, phi, step_index):
    a, b = system.potential.domain
    margin = min(
        float(np.min(b - phi)) if np.isfinite(b) else np.inf,
        float(np.min(phi - a)) if np.isfinite(a) else np.inf,
    )
    if margin < 1e-12:
        raise SeparationFailureError(
            f"step {step_index}: phi within {margin:.3e} of the potential domain boundary"
        )


def solve_forward(system: TumorSystem, time_grid: TimeGrid, u: np.ndarray,
                  phi0: np.ndarray, S0: np.ndarray,
                  cfg: Optional[SolverConfig] = None) -> StateTrajectory:
    """Solve the state system for a control given at nodes t_1 ... t_n."""
    cfg = cfg or SolverConfig()
    n, N = time_grid.n_steps, system.n_points
    u = np.broadcast_to(np.asarray(u, dtype=float), (n, N))
    phi0 = np.asarray(phi0, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    _check_phi_domain(system, phi0, "phi0")

    mu = np.empty((n + 1, N))
    phi = np.empty((n + 1, N))
    S = np.empty((n + 1, N))
    iters = np.zeros(n + 1, dtype=int)
    mu[0] = initial_mu(system, phi0, S0)
    phi[0], S[0] = phi0, S0

    for k in range(1, n + 1):
        mu[k], phi[k], S[k], iters[k] = step(
            system, cfg, time_grid.dt, (mu[k - 1], phi[k - 1], S[k - 1]),
            u[k - 1], step_index=k,
        )
    return StateTrajectory(
        times=time_grid.times, mu=mu, phi=phi, S=S, newton_iterations=iters,
        scheme=cfg.scheme, split_f2_explicit=cfg.split_f2_explicit,
    )


def _scheme_P_values(system, traj):
    """P(phi*) at each step k = 1..n per the trajectory's scheme."""
    src = traj.phi[:-1] if traj.scheme == SEMI_IMPLICIT_P else traj.phi[1:]
    return system.proliferation(src)


def _f_values(system, traj):
    pot = system.potential
    if traj.split_f2_explicit:
        return pot.f1(traj.phi[1:]) + pot.f(traj.phi[:-1]) - pot.f1(traj.phi[:-1])
    return pot.f(traj.phi[1:])


def pde_residuals(system: TumorSystem, traj: StateTrajectory, u: np.ndarray) -> np.ndarray:
    """Weighted residual norms of the three discrete equations, per step."""
    n, N = traj.n_steps, system.n_points
    u = np.broadcast_to(np.asarray(u, dtype=float), (n, N))
    dt = float(traj.times[1] - traj.times[0])
    w = system.grid.weights
    dphi = (traj.phi[1:] - traj.phi[:-1]) / dt
    dS = (traj.S[1:] - traj.S[:-1]) / dt
    Pv = _scheme_P_values(system, traj)
    react = Pv * (traj.S[1:] - traj.mu[1:])
    r1 = dphi + traj.mu[1:] @ system.MA.T - react
    r2 = dphi + traj.phi[1:] @ system.MB.T + _f_values(system, traj) - traj.mu[1:]
    r3 = dS + traj.S[1:] @ system.MC.T + react - u
    out = np.stack([
        np.sqrt(np.sum(w * r1 * r1, axis=1)),
        np.sqrt(np.sum(w * r2 * r2, axis=1)),
        np.sqrt(np.sum(w * r3 * r3, axis=1)),
    ], axis=1)
    return out


def discrete_energy(system: TumorSystem, traj: StateTrajectory) -> np.ndarray:
    """(1/2)||B^sigma phi||^2 + int F(phi) + (1/2)||S||^2 at every node."""
    w = system.grid.weights
    Bphi = traj.phi @ system.MB_half.T
    return (
        0.5 * np.sum(w * Bphi * Bphi, axis=1)
        + np.sum(w * system.potential.F(traj.phi), axis=1)
        + 0.5 * np.sum(w * traj.S * traj.S, axis=1)
    )


def energy_identity_residual(system: TumorSystem, traj: StateTrajectory,
                             u: np.ndarray) -> np.ndarray:
    """|LHS - RHS| of the first energy identity at every node.

    Time integrals use the scheme's implicit-node quadrature (value at the
    step's new node times dt); the residual shrinks at rate O(dt).
    """
    n, N = traj.n_steps, system.n_points
    u = np.broadcast_to(np.asarray(u, dtype=float), (n, N))
    dt = float(traj.times[1] - traj.times[0])
    w = system.grid.weights

    Amu = traj.mu[1:] @ system.MA_half.T
    CS = traj.S[1:] @ system.MC_half.T
    dphi = (traj.phi[1:] - traj.phi[:-1]) / dt
    Pv = _scheme_P_values(system, traj)
    diff = traj.S[1:] - traj.mu[1:]

    increments = dt * (
        np.sum(w * Amu * Amu, axis=1)
        + np.sum(w * dphi * dphi, axis=1)
        + np.sum(w * CS * CS, axis=1)
        + np.sum(w * Pv * diff * diff, axis=1)
    )
    work = dt * np.sum(w * u * traj.S[1:], axis=1)

    energy = discrete_energy(system, traj)
    lhs = energy.copy()
    lhs[1:] += np.cumsum(increments)
    rhs = np.full(n + 1, energy[0])
    rhs[1:] += np.cumsum(work)
    return np.abs(lhs - rhs)


def max_mu_inf(traj: StateTrajectory) -> float:
    return float(np.max(np.abs(traj.mu)))


def save_trajectory(traj: StateTrajectory, path) -> None:
    np.savez(
        path, times=traj.times, mu=traj.mu, phi=traj.phi, S=traj.S,
        newton_iterations=traj.newton_iterations,
        scheme=np.array(traj.scheme),
        split_f2_explicit=np.array(traj.split_f2_explicit),
    )


def load_trajectory(path) -> StateTrajectory:
    with np.load(path) as data:
        return StateTrajectory(
            times=data["times"], mu=data["mu"], phi=data["phi"], S=data["S"],
            newton_iterations=data["newton_iterations"],
            scheme=str(data["scheme"]),
            split_f2_explicit=bool(data["split_f2_explicit"]),
        )


def export_trajectory_csv(traj: StateTrajectory, directory) -> None:
    """Per-field CSVs with a time column followed by grid values."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, arr in (("mu", traj.mu), ("phi", traj.phi), ("S", traj.S)):
        table = np.column_stack([traj.times, arr])
        header = "t," + ",".join(f"x{i}" for i in range(arr.shape[1]))
        np.savetxt(directory / f"{name}.csv", table, delimiter=",",
                   header=header, comments="")
