"""Trajectory sensitivities with respect to the cost parameters.

Given a stationary solution of the forward problem, the routines here
compute the costate sequence, propagate an auxiliary Riccati-style
recursion backward over the horizon, and recover the derivative matrices
X_k = dx_k/dtheta and U_k = du_k/dtheta with a forward sweep. Stacking and
selecting rows of these derivatives yields the measurement Jacobian used
by the filter.

The whole computation is one backward pass and one forward pass over the
horizon, i.e. the cost of a single linear-quadratic solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import system as sysm
from .solver import Trajectory, costate_sequence
from .system import SystemModel

__all__ = [
    "CostateSequence",
    "SensitivityPair",
    "AuxiliaryRecursion",
    "SingularHuu",
    "costates",
    "sensitivities",
    "auxiliary_recursion",
    "output_jacobian",
    "jacobian",
]

# Prop-style precondition: the control Hessian must be invertible at every
# stage; below this eigenvalue floor we refuse rather than pseudo-invert.
HUU_EIG_FLOOR = 1e-10


class SingularHuu(RuntimeError):
    """Control Hessian not positive definite at some stage.

    The sensitivity recursions require an invertible Huu at every stage;
    the caller must abort the filter step or regularize the problem.
    """

    def __init__(self, stage: int, min_eigenvalue: float):
        super().__init__(
            f"Huu at stage {stage} has minimum eigenvalue {min_eigenvalue:.3e} "
            f"(floor {HUU_EIG_FLOOR:.1e})"
        )
        self.stage = stage
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class CostateSequence:
    """Costates p_1..p_T along a trajectory; values[i] is the costate at time i+1."""

    values: np.ndarray

    def at(self, t: int) -> np.ndarray:
        """Costate p_t for 1 <= t <= T."""
        if not 1 <= t <= self.values.shape[0]:
            raise IndexError(f"costate index {t} outside 1..{self.values.shape[0]}")
        return self.values[t - 1]


@dataclass(frozen=True)
class SensitivityPair:
    """State and control derivatives with respect to the parameters.

    X has shape (T+1, n, N) with X[0] = 0; U has shape (T, m, N). The pair
    satisfies the forward consistency X[k+1] = A_k X[k] + B_k U[k].
    """

    X: np.ndarray
    U: np.ndarray


@dataclass(frozen=True)
class AuxiliaryRecursion:
    """Backward value matrices and per-stage shorthands of the auxiliary system.

    P has shape (T+1, n, n) with P[T] equal to the terminal cost Hessian;
    W has shape (T+1, n, N) with W[T] the terminal parameter cross block.
    The per-stage lists hold the shorthand matrices the recursion is built
    from (closed-loop A, control-weighted quantities, and the Schur-reduced
    cost blocks).
    """

    P: np.ndarray
    W: np.ndarray
    A_cl: list
    R_ctrl: list
    M_param: list
    Q_red: list
    N_red: list


def costates(model: SystemModel, trajectory: Trajectory, theta: np.ndarray) -> CostateSequence:
    """Costate sequence of a stationary trajectory.

    The terminal costate is the terminal-cost gradient; earlier costates
    follow the backward adjoint recursion. The trajectory must satisfy the
    solver's stationarity tolerance for the result to be meaningful.
    """
    theta = model.check_theta(theta)
    return CostateSequence(
        values=costate_sequence(model, trajectory.states, trajectory.controls, theta)
    )


def _stage_data(model, trajectory, costate_seq, theta):
    """Blocks and shorthand matrices for every stage, plus Huu factors."""
    T = model.horizon
    xs, us = trajectory.states, trajectory.controls
    p = costate_seq.values
    data = []
    for k in range(T):
        blk = sysm.hamiltonian_blocks(model, k, xs[k], us[k], p[k], theta)
        w = np.linalg.eigvalsh(blk.Huu)
        if w[0] < HUU_EIG_FLOOR:
            raise SingularHuu(k, float(w[0]))
        cho = scipy.linalg.cho_factor(blk.Huu, lower=True, check_finite=False)
        inv_hux = scipy.linalg.cho_solve(cho, blk.Hux, check_finite=False)
        inv_hue = scipy.linalg.cho_solve(cho, blk.Hue, check_finite=False)
        inv_bt = scipy.linalg.cho_solve(cho, blk.B.T, check_finite=False)
        data.append(
            {
                "blk": blk,
                "cho": cho,
                "A_cl": blk.A - blk.B @ inv_hux,
                "R_ctrl": blk.B @ inv_bt,
                "M_param": -blk.B @ inv_hue,
                "Q_red": blk.Hxx - blk.Hxu @ inv_hux,
                "N_red": blk.Hxe - blk.Hxu @ inv_hue,
            }
        )
    return data


def _backward(model, trajectory, theta, data):
    T = model.horizon
    n, N = model.state_dim, model.param_dim
    term = sysm.terminal_blocks(model, trajectory.states[T], theta)
    P = np.empty((T + 1, n, n))
    W = np.empty((T + 1, n, N))
    P[T] = term.Hxx
    W[T] = term.Hxe
    eye = np.eye(n)
    for k in range(T - 1, -1, -1):
        d = data[k]
        lead = np.linalg.solve((eye + P[k + 1] @ d["R_ctrl"]).T, d["A_cl"]).T
        P[k] = d["Q_red"] + lead @ P[k + 1] @ d["A_cl"]
        W[k] = d["N_red"] + lead @ (W[k + 1] + P[k + 1] @ d["M_param"])
    return P, W


def sensitivities(
    model: SystemModel,
    trajectory: Trajectory,
    costate_seq: CostateSequence,
    theta: np.ndarray,
) -> SensitivityPair:
    """Derivatives of the optimal states and controls with respect to theta.

    Runs the backward auxiliary recursion from the terminal cost blocks and
    then the forward sweep from X_0 = 0:

        U_k = -Huu^{-1} [Hux X_k + Hue
               + B' (I + P_{k+1} R_k)^{-1} (P_{k+1} A_cl,k X_k
                                            + P_{k+1} M_k + W_{k+1})]
        X_{k+1} = A_k X_k + B_k U_k

    Raises:
        SingularHuu: the control Hessian fails the eigenvalue floor at
            some stage.
    """
    theta = model.check_theta(theta)
    T = model.horizon
    n, m, N = model.state_dim, model.control_dim, model.param_dim

    data = _stage_data(model, trajectory, costate_seq, theta)
    P, W = _backward(model, trajectory, theta, data)

    X = np.zeros((T + 1, n, N))
    U = np.empty((T, m, N))
    eye = np.eye(n)
    for k in range(T):
        d = data[k]
        blk = d["blk"]
        rhs = P[k + 1] @ d["A_cl"] @ X[k] + P[k + 1] @ d["M_param"] + W[k + 1]
        z = np.linalg.solve(eye + P[k + 1] @ d["R_ctrl"], rhs)
        U[k] = -scipy.linalg.cho_solve(
            d["cho"], blk.Hux @ X[k] + blk.Hue + blk.B.T @ z, check_finite=False
        )
        X[k + 1] = blk.A @ X[k] + blk.B @ U[k]
    return SensitivityPair(X=X, U=U)


def auxiliary_recursion(
    model: SystemModel,
    trajectory: Trajectory,
    costate_seq: CostateSequence,
    theta: np.ndarray,
) -> AuxiliaryRecursion:
    """The backward recursion state, exposed for diagnostics and tests."""
    theta = model.check_theta(theta)
    data = _stage_data(model, trajectory, costate_seq, theta)
    P, W = _backward(model, trajectory, theta, data)
    return AuxiliaryRecursion(
        P=P,
        W=W,
        A_cl=[d["A_cl"] for d in data],
        R_ctrl=[d["R_ctrl"] for d in data],
        M_param=[d["M_param"] for d in data],
        Q_red=[d["Q_red"] for d in data],
        N_red=[d["N_red"] for d in data],
    )


def output_jacobian(F: np.ndarray, X_t: np.ndarray, U_t: np.ndarray) -> np.ndarray:
    """Measurement Jacobian G_t = F [X_t; U_t] for a selection matrix F.

    F must have n + m columns; the result is q x N.
    """
    F = np.asarray(F, dtype=float)
    stack = np.vstack([X_t, U_t])
    if F.ndim != 2 or F.shape[1] != stack.shape[0]:
        raise ValueError(
            f"selection matrix has {F.shape[1] if F.ndim == 2 else '?'} columns, "
            f"expected {stack.shape[0]}"
        )
    return F @ stack


def jacobian(
    model: SystemModel,
    trajectory: Trajectory,
    theta: np.ndarray,
    t: int,
    F: np.ndarray,
) -> np.ndarray:
    """Measurement Jacobian at time t for a trajectory solved at theta.

    Composes the costate recursion, the Hamiltonian blocks, the sensitivity
    sweeps, and the row selection. The trajectory must be a stationary
    solution of the forward problem at theta.
    """
    if not 0 <= t <= model.horizon - 1:
        raise ValueError(f"time index {t} outside 0..{model.horizon - 1}")
    cs = costates(model, trajectory, theta)
    pair = sensitivities(model, trajectory, cs, theta)
    return output_jacobian(F, pair.X[t], pair.U[t])
