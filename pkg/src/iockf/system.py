"""Discrete-time system models with parameterized objectives.

A :class:`SystemModel` bundles the dynamics map, the stage/terminal cost
functions, and (optionally) analytic derivative callbacks. Everything the
trajectory solver and the sensitivity recursions need -- dynamics Jacobians
and the second-derivative blocks of the stage Hamiltonian -- is computed
here, falling back to central finite differences whenever an analytic
callback is absent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SystemModel",
    "HamiltonianBlocks",
    "TerminalBlocks",
    "QuadraticTrackingCost",
    "step",
    "hamiltonian",
    "dynamics_jacobians",
    "hamiltonian_gradients",
    "stage_gradients",
    "hamiltonian_blocks",
    "terminal_blocks",
    "terminal_gradient",
]

# Central-difference steps. First derivatives use the 1e-6 scale; direct
# second-difference stencils on scalar maps use the coarser 2e-4 scale
# (balances truncation against roundoff for second differences).
_FD_STEP = 1e-6
_FD2_STEP = 2e-4


def _steps(v: np.ndarray, scale: float) -> np.ndarray:
    return np.maximum(scale, scale * np.abs(v))


def _check_vector(name: str, v: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {v.shape}")
    return v


@dataclass(frozen=True)
class HamiltonianBlocks:
    """Stage-k derivative blocks of the Hamiltonian c_t + f' p_next.

    A, B are the dynamics Jacobians; Hxx/Hxu/Hux/Huu the (symmetrized)
    second derivatives in (x, u); Hxe/Hue the cross derivatives with the
    cost parameters. Hux is constructed as Hxu' exactly.
    """

    A: np.ndarray
    B: np.ndarray
    Hxx: np.ndarray
    Hxu: np.ndarray
    Hux: np.ndarray
    Huu: np.ndarray
    Hxe: np.ndarray
    Hue: np.ndarray


@dataclass(frozen=True)
class TerminalBlocks:
    """Second derivatives of the terminal cost at (x_T, theta)."""

    Hxx: np.ndarray
    Hxe: np.ndarray


@dataclass(frozen=True)
class SystemModel:
    """Deterministic discrete-time system with a parameterized objective.

    Args:
        state_dim: n >= 1.
        control_dim: m >= 1.
        param_dim: N >= 1, length of the cost parameter vector.
        horizon: T >= 2, fixed for the life of the model.
        initial_state: x_0, shape (n,).
        dynamics: map (x, u) -> next state, shape (n,).
        stage_cost: map (t, x, u, theta) -> float, defined for 0 <= t <= T-1.
        terminal_cost: map (x, theta) -> float.

    The remaining fields are optional analytic derivative callbacks; when a
    callback is None the corresponding quantity is produced by central
    finite differences.

        dynamics_jacobian: (x, u) -> (A, B) with A (n,n), B (n,m).
        dynamics_curvature: (x, u, p) -> Hessian of z -> p . f(z) over
            the stacked z = (x, u), shape (n+m, n+m).
        stage_gradient: (t, x, u, theta) -> (c_x, c_u).
        stage_curvature: (t, x, u, theta) -> (c_xx, c_xu, c_uu, c_xe, c_ue).
        terminal_gradient_fn: (x, theta) -> c_x.
        terminal_curvature: (x, theta) -> (c_xx, c_xe).

    Instances are immutable; all operations on them are pure.
    """

    state_dim: int
    control_dim: int
    param_dim: int
    horizon: int
    initial_state: np.ndarray
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    stage_cost: Callable[[int, np.ndarray, np.ndarray, np.ndarray], float]
    terminal_cost: Callable[[np.ndarray, np.ndarray], float]
    dynamics_jacobian: Optional[Callable] = None
    dynamics_curvature: Optional[Callable] = None
    stage_gradient: Optional[Callable] = None
    stage_curvature: Optional[Callable] = None
    terminal_gradient_fn: Optional[Callable] = None
    terminal_curvature: Optional[Callable] = None
    name: str = "system"

    def __post_init__(self):
        if self.state_dim < 1 or self.control_dim < 1 or self.param_dim < 1:
            raise ValueError("state_dim, control_dim, param_dim must all be >= 1")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        x0 = np.array(self.initial_state, dtype=float).reshape(-1)
        if x0.shape != (self.state_dim,):
            raise ValueError(
                f"initial_state must have shape ({self.state_dim},), got {x0.shape}"
            )
        x0.setflags(write=False)
        object.__setattr__(self, "initial_state", x0)

    def check_theta(self, theta: np.ndarray) -> np.ndarray:
        return _check_vector("theta", theta, self.param_dim)


def step(model: SystemModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One step of the dynamics, x' = f(x, u). Pure; raises on dimension mismatch."""
    x = _check_vector("x", x, model.state_dim)
    u = _check_vector("u", u, model.control_dim)
    out = np.asarray(model.dynamics(x, u), dtype=float).reshape(-1)
    if out.shape != (model.state_dim,):
        raise ValueError(
            f"dynamics returned shape {out.shape}, expected ({model.state_dim},)"
        )
    return out


def hamiltonian(model, t, x, u, p_next, theta) -> float:
    """Stage Hamiltonian c_t(x, u, theta) + f(x, u) . p_next."""
    p_next = _check_vector("p_next", p_next, model.state_dim)
    theta = model.check_theta(theta)
    return float(model.stage_cost(t, x, u, theta)) + float(step(model, x, u) @ p_next)


def _fd_dynamics_jacobians(model, x, u):
    n, m = model.state_dim, model.control_dim
    A = np.empty((n, n))
    B = np.empty((n, m))
    hx = _steps(x, _FD_STEP)
    for i in range(n):
        e = np.zeros(n)
        e[i] = hx[i]
        A[:, i] = (model.dynamics(x + e, u) - model.dynamics(x - e, u)) / (2 * hx[i])
    hu = _steps(u, _FD_STEP)
    for j in range(m):
        e = np.zeros(m)
        e[j] = hu[j]
        B[:, j] = (model.dynamics(x, u + e) - model.dynamics(x, u - e)) / (2 * hu[j])
    return A, B


def dynamics_jacobians(model: SystemModel, x, u):
    """Jacobians (A, B) of the dynamics at (x, u).

    Uses the model's analytic callback when present, otherwise central
    finite differences with per-coordinate step max(1e-6, 1e-6 |z_i|).
    """
    x = _check_vector("x", x, model.state_dim)
    u = _check_vector("u", u, model.control_dim)
    if model.dynamics_jacobian is not None:
        A, B = model.dynamics_jacobian(x, u)
        return np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    return _fd_dynamics_jacobians(model, x, u)


def _fd_gradient(fun, z):
    h = _steps(z, _FD_STEP)
    g = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h[i]
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h[i])
    return g


def stage_gradients(model, t, x, u, theta):
    """First derivatives (c_x, c_u) of the stage cost, analytic or central FD."""
    if model.stage_gradient is not None:
        cx, cu = model.stage_gradient(t, x, u, theta)
        return np.asarray(cx, dtype=float), np.asarray(cu, dtype=float)
    cx = _fd_gradient(lambda z: model.stage_cost(t, z, u, theta), x)
    cu = _fd_gradient(lambda z: model.stage_cost(t, x, z, theta), u)
    return cx, cu


def hamiltonian_gradients(model, t, x, u, p_next, theta):
    """First derivatives (H_x, H_u) of the stage Hamiltonian at (t, x, u, p_next, theta)."""
    A, B = dynamics_jacobians(model, x, u)
    cx, cu = stage_gradients(model, t, x, u, theta)
    return cx + A.T @ p_next, cu + B.T @ p_next


def terminal_gradient(model, x, theta):
    """Gradient of the terminal cost with respect to the state."""
    x = _check_vector("x", x, model.state_dim)
    theta = model.check_theta(theta)
    if model.terminal_gradient_fn is not None:
        return np.asarray(model.terminal_gradient_fn(x, theta), dtype=float)
    return _fd_gradient(lambda z: model.terminal_cost(z, theta), x)


def _fd_hessian(fun, z):
    """Dense Hessian of a scalar map by direct second-difference stencils."""
    k = z.size
    h = _steps(z, _FD2_STEP)
    H = np.empty((k, k))
    f0 = fun(z)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (fun(z + ei) - 2 * f0 + fun(z - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = (
                fun(z + ei + ej) - fun(z + ei - ej) - fun(z - ei + ej) + fun(z - ei - ej)
            ) / (4 * h[i] * h[j])
            H[j, i] = H[i, j]
    return H


def _fd_cross(fun, z, w):
    """Mixed second derivatives d^2 fun / dz dw, shape (len(z), len(w))."""
    hz = _steps(z, _FD2_STEP)
    hw = _steps(w, _FD2_STEP)
    C = np.empty((z.size, w.size))
    for i in range(z.size):
        ei = np.zeros(z.size)
        ei[i] = hz[i]
        for j in range(w.size):
            ej = np.zeros(w.size)
            ej[j] = hw[j]
            C[i, j] = (
                fun(z + ei, w + ej)
                - fun(z + ei, w - ej)
                - fun(z - ei, w + ej)
                + fun(z - ei, w - ej)
            ) / (4 * hz[i] * hw[j])
    return C


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _stage_cost_curvature(model, t, x, u, theta):
    n, m = model.state_dim, model.control_dim
    if model.stage_curvature is not None:
        cxx, cxu, cuu, cxe, cue = model.stage_curvature(t, x, u, theta)
        return tuple(np.asarray(M, dtype=float) for M in (cxx, cxu, cuu, cxe, cue))
    z = np.concatenate([x, u])
    Hz = _fd_hessian(lambda w: model.stage_cost(t, w[:n], w[n:], theta), z)
    cxe = _fd_cross(lambda w, th: model.stage_cost(t, w, u, th), x, theta)
    cue = _fd_cross(lambda w, th: model.stage_cost(t, x, w, th), u, theta)
    return Hz[:n, :n], Hz[:n, n:], Hz[n:, n:], cxe, cue


def hamiltonian_blocks(model, t, x, u, p_next, theta) -> HamiltonianBlocks:
    """All second-derivative blocks of the stage Hamiltonian at one point.

    The cost curvature and the costate-contracted dynamics curvature are
    assembled separately (the parameters never enter the dynamics, so the
    parameter cross blocks come from the cost alone). Hxx and Huu are
    symmetrized and Hux is Hxu' by construction.
    """
    x = _check_vector("x", x, model.state_dim)
    u = _check_vector("u", u, model.control_dim)
    p_next = _check_vector("p_next", p_next, model.state_dim)
    theta = model.check_theta(theta)
    n, m = model.state_dim, model.control_dim

    A, B = dynamics_jacobians(model, x, u)
    cxx, cxu, cuu, cxe, cue = _stage_cost_curvature(model, t, x, u, theta)

    if model.dynamics_curvature is not None:
        S = np.asarray(model.dynamics_curvature(x, u, p_next), dtype=float)
    else:
        z = np.concatenate([x, u])
        S = _fd_hessian(lambda w: float(model.dynamics(w[:n], w[n:]) @ p_next), z)

    Hxx = _sym(cxx + S[:n, :n])
    Huu = _sym(cuu + S[n:, n:])
    Hxu = cxu + S[:n, n:]
    return HamiltonianBlocks(
        A=A, B=B, Hxx=Hxx, Hxu=Hxu, Hux=Hxu.T.copy(), Huu=Huu, Hxe=cxe, Hue=cue
    )


def terminal_blocks(model, x, theta) -> TerminalBlocks:
    """Second-derivative blocks (Hxx, Hxe) of the terminal cost at (x_T, theta)."""
    x = _check_vector("x", x, model.state_dim)
    theta = model.check_theta(theta)
    if model.terminal_curvature is not None:
        cxx, cxe = model.terminal_curvature(x, theta)
        return TerminalBlocks(
            Hxx=_sym(np.asarray(cxx, dtype=float)), Hxe=np.asarray(cxe, dtype=float)
        )
    cxx = _fd_hessian(lambda z: model.terminal_cost(z, theta), x)
    cxe = _fd_cross(lambda z, th: model.terminal_cost(z, th), x, theta)
    return TerminalBlocks(Hxx=_sym(cxx), Hxe=cxe)


@dataclass(frozen=True)
class QuadraticTrackingCost:
    """Cost that is linear in the parameters: theta . phi(x) + r ||u||^2.

    The features are squared deviations phi_i(x) = (x_i - goal_i)^2, one per
    state coordinate, and the control weight r is fixed and known, so
    Huu = 2 r I is positive definite independent of theta. All derivatives
    are analytic. The terminal cost drops the control term.
    """

    goal: np.ndarray
    control_weight: float = 0.1

    def __post_init__(self):
        g = np.array(self.goal, dtype=float).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "goal", g)
        if self.control_weight <= 0:
            raise ValueError("control_weight must be > 0")

    # stage cost and derivatives -------------------------------------------------
    def stage(self, t, x, u, theta):
        d = x - self.goal
        return float(theta @ d**2 + self.control_weight * (u @ u))

    def stage_gradient(self, t, x, u, theta):
        return 2.0 * theta * (x - self.goal), 2.0 * self.control_weight * u

    def stage_curvature(self, t, x, u, theta):
        n = self.goal.size
        m = u.size
        cxx = np.diag(2.0 * theta)
        cxu = np.zeros((n, m))
        cuu = 2.0 * self.control_weight * np.eye(m)
        cxe = np.diag(2.0 * (x - self.goal))
        cue = np.zeros((m, n))
        return cxx, cxu, cuu, cxe, cue

    # terminal cost and derivatives ----------------------------------------------
    def terminal(self, x, theta):
        d = x - self.goal
        return float(theta @ d**2)

    def terminal_gradient(self, x, theta):
        return 2.0 * theta * (x - self.goal)

    def terminal_curvature(self, x, theta):
        return np.diag(2.0 * theta), np.diag(2.0 * (x - self.goal))
