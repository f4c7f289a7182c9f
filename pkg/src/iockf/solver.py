"""Trajectory optimization for the forward optimal control problem.

The solver is an iterative LQR / DDP method: a backward Riccati pass over
local quadratic models of the Hamiltonian, a forward rollout with a
backtracking line search, and Levenberg-style regularization of the control
Hessian. Convergence is declared on the Pontryagin stationarity residual
max_t ||dH/du_t||_inf, evaluated with costates from the adjoint recursion,
rather than on objective decrease.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import system as sysm
from .system import SystemModel

__all__ = [
    "Trajectory",
    "SolverOptions",
    "NonConvergence",
    "solve",
    "objective",
    "rollout",
    "costate_sequence",
    "stationarity_residual",
]


class NonConvergence(RuntimeError):
    """Raised when the iteration cap is hit with stationarity above tolerance.

    Carries the final residual and the best trajectory found so the caller
    can retry from a fresh cold start or with tighter regularization.
    """

    def __init__(self, residual: float, trajectory: "Trajectory"):
        super().__init__(
            f"forward solve did not converge: stationarity residual {residual:.3e}"
        )
        self.residual = residual
        self.trajectory = trajectory


@dataclass(frozen=True)
class Trajectory:
    """A dynamically feasible state/control pair with its objective value.

    states has shape (T+1, n) with states[0] equal to the model's initial
    state; controls has shape (T, m). Trajectories are produced by rollouts,
    so feasibility holds by construction.
    """

    states: np.ndarray
    controls: np.ndarray
    objective_value: float

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "controls", np.asarray(self.controls, dtype=float))


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs for the trajectory solver.

    stationarity_tol is on max_t ||dH/du_t||_inf. reg_init/reg_scale/reg_max
    drive the Levenberg schedule on the control Hessian; the line search
    backtracks by backtrack_factor down to min_step.
    """

    max_iterations: int = 200
    stationarity_tol: float = 1e-8
    reg_init: float = 0.0
    reg_scale: float = 10.0
    reg_max: float = 1e8
    backtrack_factor: float = 0.5
    min_step: float = 1e-8
    warm_start: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stationarity_tol <= 0 or self.min_step <= 0:
            raise ValueError("tolerances must be strictly positive")
        if not (0 < self.backtrack_factor < 1):
            raise ValueError("backtrack_factor must lie in (0, 1)")


def rollout(model: SystemModel, controls: np.ndarray, theta: np.ndarray) -> Trajectory:
    """Roll the dynamics forward from x_0 under the given controls."""
    controls = np.asarray(controls, dtype=float)
    T = model.horizon
    if controls.shape != (T, model.control_dim):
        raise ValueError(
            f"controls must have shape ({T}, {model.control_dim}), got {controls.shape}"
        )
    xs = np.empty((T + 1, model.state_dim))
    xs[0] = model.initial_state
    J = 0.0
    for t in range(T):
        J += float(model.stage_cost(t, xs[t], controls[t], theta))
        xs[t + 1] = model.dynamics(xs[t], controls[t])
    J += float(model.terminal_cost(xs[T], theta))
    return Trajectory(states=xs, controls=controls.copy(), objective_value=J)


def objective(model: SystemModel, trajectory: Trajectory, theta: np.ndarray) -> float:
    """Objective c_T(x_T) + sum_t c_t(x_t, u_t) evaluated on a trajectory."""
    theta = model.check_theta(theta)
    xs, us = trajectory.states, trajectory.controls
    if xs.shape != (model.horizon + 1, model.state_dim) or us.shape != (
        model.horizon,
        model.control_dim,
    ):
        raise ValueError("trajectory dimensions do not match the model")
    J = sum(
        float(model.stage_cost(t, xs[t], us[t], theta)) for t in range(model.horizon)
    )
    return J + float(model.terminal_cost(xs[-1], theta))


def costate_sequence(
    model: SystemModel, states: np.ndarray, controls: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Adjoint recursion on a trajectory; row i holds the costate at time i+1.

    p_T is the terminal-cost gradient and p_t = c_x + A' p_{t+1} backward.
    """
    T = controls.shape[0]
    p = np.empty((T, model.state_dim))
    p[T - 1] = sysm.terminal_gradient(model, states[T], theta)
    for t in range(T - 1, 0, -1):
        A, _ = sysm.dynamics_jacobians(model, states[t], controls[t])
        cx, _ = sysm.stage_gradients(model, t, states[t], controls[t], theta)
        p[t - 1] = cx + A.T @ p[t]
    return p


def stationarity_residual(
    model: SystemModel,
    states: np.ndarray,
    controls: np.ndarray,
    theta: np.ndarray,
    costates: Optional[np.ndarray] = None,
) -> float:
    """max_t ||dH/du_t||_inf with costates from the adjoint recursion."""
    p = costates if costates is not None else costate_sequence(model, states, controls, theta)
    worst = 0.0
    for t in range(controls.shape[0]):
        _, B = sysm.dynamics_jacobians(model, states[t], controls[t])
        _, cu = sysm.stage_gradients(model, t, states[t], controls[t], theta)
        worst = max(worst, float(np.max(np.abs(cu + B.T @ p[t]))))
    return worst


def _forward_pass(model, xs_ref, us_ref, kff, Kfb, alpha, theta):
    """Rollout with the affine control update; returns (xs, us, J) or None on blow-up."""
    T = model.horizon
    xs = np.empty_like(xs_ref)
    us = np.empty_like(us_ref)
    xs[0] = xs_ref[0]
    J = 0.0
    for t in range(T):
        us[t] = us_ref[t] + alpha * kff[t] + Kfb[t] @ (xs[t] - xs_ref[t])
        J += float(model.stage_cost(t, xs[t], us[t], theta))
        xs[t + 1] = model.dynamics(xs[t], us[t])
        if not np.all(np.isfinite(xs[t + 1])) or np.max(np.abs(xs[t + 1])) > 1e12:
            return None
    J += float(model.terminal_cost(xs[T], theta))
    if not np.isfinite(J):
        return None
    return xs, us, J


def _backward_pass(model, xs, us, theta, mu):
    """Riccati pass over local quadratic models; returns gains or None if
    the regularized control Hessian is not positive definite."""
    T = model.horizon
    n, m = model.state_dim, model.control_dim
    kff = np.empty((T, m))
    Kfb = np.empty((T, m, n))
    Vx = sysm.terminal_gradient(model, xs[T], theta)
    Vxx = sysm.terminal_blocks(model, xs[T], theta).Hxx
    for t in range(T - 1, -1, -1):
        blk = sysm.hamiltonian_blocks(model, t, xs[t], us[t], Vx, theta)
        cx, cu = sysm.stage_gradients(model, t, xs[t], us[t], theta)
        A, B = blk.A, blk.B
        Qx = cx + A.T @ Vx
        Qu = cu + B.T @ Vx
        Qxx = blk.Hxx + A.T @ Vxx @ A
        Quu = blk.Huu + B.T @ Vxx @ B
        Qux = blk.Hux + B.T @ Vxx @ A
        try:
            cho = scipy.linalg.cho_factor(
                Quu + mu * np.eye(m), lower=True, check_finite=False
            )
        except scipy.linalg.LinAlgError:
            return None
        kff[t] = -scipy.linalg.cho_solve(cho, Qu, check_finite=False)
        Kfb[t] = -scipy.linalg.cho_solve(cho, Qux, check_finite=False)
        Vx = Qx + Kfb[t].T @ Quu @ kff[t] + Kfb[t].T @ Qu + Qux.T @ kff[t]
        Vxx = Qxx + Kfb[t].T @ Quu @ Kfb[t] + Kfb[t].T @ Qux + Qux.T @ Kfb[t]
        Vxx = 0.5 * (Vxx + Vxx.T)
    return kff, Kfb


def solve(
    model: SystemModel,
    theta: np.ndarray,
    options: Optional[SolverOptions] = None,
    warm_start: Optional[Trajectory] = None,
) -> Trajectory:
    """Solve the forward optimal control problem for the given parameters.

    Args:
        model: the system and parameterized objective.
        theta: cost parameter vector, shape (N,).
        options: solver tuning; defaults are suitable for the benchmarks.
        warm_start: optional previous solution used to seed the controls
            (ignored when options.warm_start is False).

    Returns:
        A trajectory satisfying the stationarity tolerance, with
        objective_value evaluated on it.

    Raises:
        NonConvergence: iteration cap hit with the residual above tolerance.
    """
    opts = options or SolverOptions()
    theta = model.check_theta(theta)
    T, m = model.horizon, model.control_dim

    if warm_start is not None and opts.warm_start:
        if warm_start.controls.shape != (T, m):
            raise ValueError("warm start dimensions do not match the model")
        us = warm_start.controls.copy()
    else:
        us = np.zeros((T, m))

    traj = rollout(model, us, theta)
    xs, us, J = traj.states, traj.controls, traj.objective_value
    mu = opts.reg_init
    residual = stationarity_residual(model, xs, us, theta)

    for _ in range(opts.max_iterations):
        if residual <= opts.stationarity_tol:
            return Trajectory(states=xs, controls=us, objective_value=J)

        gains = _backward_pass(model, xs, us, theta, mu)
        while gains is None:
            mu = max(mu * opts.reg_scale, 1e-6)
            if mu > opts.reg_max:
                raise NonConvergence(residual, Trajectory(xs, us, J))
            gains = _backward_pass(model, xs, us, theta, mu)
        kff, Kfb = gains

        # Backtracking line search. Near the optimum the objective change of
        # a Newton step falls below float resolution, so a step that leaves
        # the objective flat but halves the stationarity residual is also
        # accepted.
        scale = max(1.0, abs(J))
        accepted = None
        alpha = 1.0
        while alpha >= opts.min_step:
            cand = _forward_pass(model, xs, us, kff, Kfb, alpha, theta)
            if cand is not None:
                J_new = cand[2]
                if J - J_new > 1e-12 * scale:
                    accepted = cand
                    break
                if J_new - J <= 1e-10 * scale:
                    res_new = stationarity_residual(model, cand[0], cand[1], theta)
                    if res_new < 0.5 * residual:
                        accepted = (cand[0], cand[1], J_new, res_new)
                        break
            alpha *= opts.backtrack_factor

        if accepted is None:
            mu = max(mu * opts.reg_scale, 1e-6)
            if mu > opts.reg_max:
                raise NonConvergence(residual, Trajectory(xs, us, J))
            continue

        if len(accepted) == 4:
            xs, us, J, residual = accepted
        else:
            xs, us, J = accepted
            residual = stationarity_residual(model, xs, us, theta)
        mu = 0.0 if mu < 1e-12 else mu / opts.reg_scale

    if residual <= opts.stationarity_tol:
        return Trajectory(states=xs, controls=us, objective_value=J)
    raise NonConvergence(residual, Trajectory(xs, us, J))
