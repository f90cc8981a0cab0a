"""Backward-in-time adjoint solves along a stored state trajectory.

The adjoint triple (q, p, r) satisfies an algebraic equation for q,

    A^{2rho} q - p + P(phi)(q - r) = 0,

plus backward evolution equations for p + q and r with terminal data
(q+p)(T) = g2, r(T) = g4.  The direct solver eliminates q through the
algebraic relation, so each backward Euler step is a linear solve in
(p, r).  A vanishing-viscosity Galerkin solver (extra -(1/n) dq/dt term,
integrated in modal coordinates) is kept as an independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSystemError
from .problem import ControlProblemSpec
from .spectral import Field, FractionalPower, solve_power_plus_mult
from .state import StateTrajectory, TimeGrid
from .system import TumorSystem


@dataclass(frozen=True)
class AdjointData:
    """Source and terminal fields of the adjoint system.

    g1 = kappa1 (phi - phi_Q) and g3 = kappa3 (S - S_Q) on all nodes,
    g2 = kappa2 (phi(T) - phi_Omega) and g4 = kappa4 (S(T) - S_Omega).
    """

    g1: np.ndarray  # shape (n_steps + 1, n_points)
    g2: np.ndarray  # shape (n_points,)
    g3: np.ndarray
    g4: np.ndarray


@dataclass(frozen=True)
class AdjointTrajectory:
    q: np.ndarray  # shape (n_steps + 1, n_points)
    p: np.ndarray
    r: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.q.shape[0] - 1


def build_adjoint_data(traj: StateTrajectory, spec: ControlProblemSpec) -> AdjointData:
    shape = traj.phi.shape
    for target in (spec.phi_Q, spec.S_Q):
        if np.broadcast_shapes(np.shape(target), shape) != shape:
            raise ValueError("running targets must broadcast to the trajectory shape")
    k1, k2, k3, k4, _ = spec.kappas
    return AdjointData(
        g1=k1 * (traj.phi - spec.phi_Q),
        g2=k2 * (traj.phi[-1] - spec.phi_Omega),
        g3=k3 * (traj.S - spec.S_Q),
        g4=k4 * (traj.S[-1] - spec.S_Omega),
    )


def solve_q_algebraic(A_power: FractionalPower, P_field: Field,
                      p: Field, r: Field) -> Field:
    """q = (A^{2rho} + P)^{-1} (p + P r)."""
    rhs = Field(p.values + P_field.values * r.values, p.grid)
    return solve_power_plus_mult(A_power, P_field, rhs)


def solve_adjoint(system: TumorSystem, time_grid: TimeGrid,
                  traj: StateTrajectory, spec: ControlProblemSpec) -> AdjointTrajectory:
    """Backward Euler from T to 0 with q eliminated at every node."""
    n, N = time_grid.n_steps, system.n_points
    if traj.n_steps != n:
        raise ValueError("trajectory and time grid disagree on the step count")
    dt = time_grid.dt
    data = build_adjoint_data(traj, spec)
    P_fun, pot = system.proliferation, system.potential
    I = np.eye(N)

    q = np.zeros((n + 1, N))
    p = np.zeros((n + 1, N))
    r = np.zeros((n + 1, N))

    # terminal node: r(T) = g4, (q+p)(T) = g2, algebraic relation fixes the split
    P_T = P_fun(traj.phi[-1])
    r[n] = data.g4
    q[n] = _solve_with_check(I + system.MA + np.diag(P_T),
                             data.g2 + P_T * data.g4, step_index=n)
    p[n] = data.g2 - q[n]

    for k in range(n - 1, -1, -1):
        P_k = P_fun(traj.phi[k])
        D_k = P_fun.d1(traj.phi[k]) * (traj.S[k] - traj.mu[k])
        df_k = pot.df(traj.phi[k])

        Q = np.linalg.inv(system.MA + np.diag(P_k))
        Qp = Q
        Qr = Q * P_k[None, :]

        A11 = (I + Qp) / dt + system.MB + np.diag(df_k) - D_k[:, None] * Qp
        A12 = Qr / dt - D_k[:, None] * Qr + np.diag(D_k)
        A21 = -P_k[:, None] * Qp
        A22 = I / dt + system.MC + np.diag(P_k) - P_k[:, None] * Qr
        block = np.block([[A11, A12], [A21, A22]])
        rhs = np.concatenate([
            data.g1[k] + (q[k + 1] + p[k + 1]) / dt,
            data.g3[k] + r[k + 1] / dt,
        ])
        sol = _solve_with_check(block, rhs, step_index=k)
        p[k], r[k] = sol[:N], sol[N:]
        q[k] = Qp @ p[k] + Qr @ r[k]

    return AdjointTrajectory(q=q, p=p, r=r)


def _solve_with_check(A: np.ndarray, b: np.ndarray, step_index: int) -> np.ndarray:
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSystemError(
            f"singular adjoint step matrix at node {step_index}") from exc


def adjoint_residuals(system: TumorSystem, time_grid: TimeGrid,
                      adj: AdjointTrajectory, traj: StateTrajectory,
                      spec: ControlProblemSpec) -> np.ndarray:
    """Weighted residual norms, shape (n_steps + 1, 3).

    Column 0: algebraic q-equation at every node.  Columns 1 and 2: the
    backward difference equations for q + p and r at nodes 0 .. n-1; row n
    carries the terminal-condition mismatches instead.
    """
    n, N = time_grid.n_steps, system.n_points
    dt = time_grid.dt
    w = system.grid.weights
    data = build_adjoint_data(traj, spec)
    P = system.proliferation(traj.phi)
    D = system.proliferation.d1(traj.phi) * (traj.S - traj.mu)
    df = system.potential.df(traj.phi)

    res_q = adj.q @ system.MA.T - adj.p + P * (adj.q - adj.r)
    zp = adj.q + adj.p
    res_p = (-(zp[1:] - zp[:-1]) / dt + adj.p[:-1] @ system.MB.T
             + df[:-1] * adj.p[:-1] - D[:-1] * (adj.q[:-1] - adj.r[:-1])
             - data.g1[:-1])
    res_r = (-(adj.r[1:] - adj.r[:-1]) / dt + adj.r[:-1] @ system.MC.T
             - P[:-1] * (adj.q[:-1] - adj.r[:-1]) - data.g3[:-1])

    out = np.zeros((n + 1, 3))
    out[:, 0] = np.sqrt(np.sum(w * res_q * res_q, axis=1))
    out[:-1, 1] = np.sqrt(np.sum(w * res_p * res_p, axis=1))
    out[:-1, 2] = np.sqrt(np.sum(w * res_r * res_r, axis=1))
    term_p = zp[n] - data.g2
    term_r = adj.r[n] - data.g4
    out[n, 1] = np.sqrt(np.sum(w * term_p * term_p))
    out[n, 2] = np.sqrt(np.sum(w * term_r * term_r))
    return out


# ---------------------------------------------------------------------------
# vanishing-viscosity Galerkin cross-check
# ---------------------------------------------------------------------------

def _weighted_gram(coeff: np.ndarray, Ea: np.ndarray, w: np.ndarray,
                   Eb: np.ndarray) -> np.ndarray:
    """Matrix of (coeff * eb_j, ea_i) in the grid quadrature."""
    return Ea.T @ ((w * coeff)[:, None] * Eb)


def solve_adjoint_viscous_galerkin(system: TumorSystem, time_grid: TimeGrid,
                                   traj: StateTrajectory, spec: ControlProblemSpec,
                                   n_viscosity: int,
                                   ode_tol: float | None = None) -> AdjointTrajectory:
    """Backward modal integration of the viscous system -E y' + M(t) y = b(t).

    The q-equation gains a -(1/n_viscosity) dq/dt term, making the stacked
    modal unknowns y = (q^, p^, r^) a linear ODE.  Terminal data: q^(T) = 0,
    p^ and r^ start from the projections of g2 and g4.  ode_tol, when given,
    is the backward substep size (default: one substep per trajectory step).
    """
    if n_viscosity < 1:
        raise ValueError("n_viscosity must be >= 1")
    n, N = time_grid.n_steps, system.n_points
    if traj.n_steps != n:
        raise ValueError("trajectory and time grid disagree on the step count")
    dt = time_grid.dt
    w = system.grid.weights
    data = build_adjoint_data(traj, spec)
    EA, EB, EC = (system.op_A.basis.eigvecs, system.op_B.basis.eigvecs,
                  system.op_C.basis.eigvecs)
    nA, nB, nC = EA.shape[1], EB.shape[1], EC.shape[1]
    LamA = system.op_A.scaled_eigenvalues
    LamB = system.op_B.scaled_eigenvalues
    LamC = system.op_C.scaled_eigenvalues
    X_AB = EA.T @ (w[:, None] * EB)
    X_BA = X_AB.T

    g4_modal = EC.T @ (w * data.g4)
    proj_defect = data.g4 - EC @ g4_modal
    defect = np.sqrt(np.sum(w * proj_defect * proj_defect))
    if defect > 1e-6 * max(1.0, np.sqrt(np.sum(w * data.g4 * data.g4))):
        warnings.warn(
            f"terminal nutrient target is poorly represented in the retained "
            f"modes (projection residual {defect:.3e})", stacklevel=2)

    E_mat = np.zeros((nA + nB + nC, nA + nB + nC))
    E_mat[:nA, :nA] = np.eye(nA) / n_viscosity
    E_mat[nA:nA + nB, :nA] = X_BA
    E_mat[nA:nA + nB, nA:nA + nB] = np.eye(nB)
    E_mat[nA + nB:, nA + nB:] = np.eye(nC)

    substeps = max(1, int(np.ceil(dt / ode_tol))) if ode_tol else 1
    delta = dt / substeps

    def assemble(phi, S, mu, g1, g3):
        P = system.proliferation(phi)
        D = system.proliferation.d1(phi) * (S - mu)
        df = system.potential.df(phi)
        M = np.zeros_like(E_mat)
        M[:nA, :nA] = np.diag(LamA) + _weighted_gram(P, EA, w, EA)
        M[:nA, nA:nA + nB] = -X_AB
        M[:nA, nA + nB:] = -_weighted_gram(P, EA, w, EC)
        M[nA:nA + nB, :nA] = -_weighted_gram(D, EB, w, EA)
        M[nA:nA + nB, nA:nA + nB] = np.diag(LamB) + _weighted_gram(df, EB, w, EB)
        M[nA:nA + nB, nA + nB:] = _weighted_gram(D, EB, w, EC)
        M[nA + nB:, :nA] = -_weighted_gram(P, EC, w, EA)
        M[nA + nB:, nA + nB:] = np.diag(LamC) + _weighted_gram(P, EC, w, EC)
        b = np.concatenate([np.zeros(nA), EB.T @ (w * g1), EC.T @ (w * g3)])
        return M, b

    y_nodes = np.zeros((n + 1, nA + nB + nC))
    y = np.concatenate([np.zeros(nA), EB.T @ (w * data.g2), g4_modal])
    y_nodes[n] = y

    for k in range(n - 1, -1, -1):
        for j in range(1, substeps + 1):
            # coefficient fields at the earlier (target) time, by interpolation
            theta = j * delta / dt  # fraction of the way from node k+1 to k
            phi = (1 - theta) * traj.phi[k + 1] + theta * traj.phi[k]
            S = (1 - theta) * traj.S[k + 1] + theta * traj.S[k]
            mu = (1 - theta) * traj.mu[k + 1] + theta * traj.mu[k]
            g1 = (1 - theta) * data.g1[k + 1] + theta * data.g1[k]
            g3 = (1 - theta) * data.g3[k + 1] + theta * data.g3[k]
            M, b = assemble(phi, S, mu, g1, g3)
            try:
                y = np.linalg.solve(E_mat / delta + M, E_mat @ y / delta + b)
            except np.linalg.LinAlgError as exc:
                raise DegenerateSystemError(
                    f"viscous backward integrator failed at node {k}") from exc
        y_nodes[k] = y

    return AdjointTrajectory(
        q=y_nodes[:, :nA] @ EA.T,
        p=y_nodes[:, nA:nA + nB] @ EB.T,
        r=y_nodes[:, nA + nB:] @ EC.T,
    )


def viscosity_sweep(system: TumorSystem, time_grid: TimeGrid,
                    traj: StateTrajectory, spec: ControlProblemSpec,
                    n_values=(10, 100, 1000, 10000),
                    ode_tol: float | None = None) -> np.ndarray:
    """Max node-norm discrepancy between viscous and direct adjoints per n."""
    direct = solve_adjoint(system, time_grid, traj, spec)
    w = system.grid.weights
    out = np.empty(len(n_values))
    for i, n_visc in enumerate(n_values):
        visc = solve_adjoint_viscous_galerkin(system, time_grid, traj, spec,
                                              n_visc, ode_tol)
        diff2 = (np.sum(w * (visc.q - direct.q) ** 2, axis=1)
                 + np.sum(w * (visc.p - direct.p) ** 2, axis=1)
                 + np.sum(w * (visc.r - direct.r) ** 2, axis=1))
        out[i] = float(np.sqrt(np.max(diff2)))
    return out
