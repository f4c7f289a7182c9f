"""Benchmark systems with parameterized tracking costs.

Three nonlinear systems -- a torque-driven pendulum, a cart pole, and a
planar two-link arm -- each with a cost that is linear in its unknown
weights plus a fixed quadratic control penalty. Ground-truth weights and
measurement-noise magnitudes follow the reference problem table; the
dynamics equations, discretization (forward Euler, dt = 0.05), physical
constants, start/goal states, and horizons are project choices frozen
here so results are reproducible.

Dynamics derivatives are generated symbolically once per system and
attached to the model as analytic callbacks, keeping forward solves and
sensitivity passes fast and exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .measurement import SelectionMode
from .system import QuadraticTrackingCost, SystemModel

__all__ = [
    "BenchmarkSpec",
    "pendulum",
    "cartpole",
    "robot_arm",
    "linear_quadratic",
    "get",
    "names",
]

DT = 0.05
CONTROL_WEIGHT = 0.1


@dataclass(frozen=True)
class BenchmarkSpec:
    """A benchmark system with its ground truth and noise level.

    noise_variance is the common diagonal of the measurement covariance;
    noise_cov(q) builds sigma^2 I_q for a measurement dimension q.
    """

    name: str
    model: SystemModel
    ground_truth: np.ndarray
    noise_variance: float
    default_mode: SelectionMode = SelectionMode.FULL

    def __post_init__(self):
        gt = np.array(self.ground_truth, dtype=float).reshape(-1)
        if gt.size != self.model.param_dim:
            raise ValueError("ground truth length does not match the model")
        gt.setflags(write=False)
        object.__setattr__(self, "ground_truth", gt)

    @property
    def measurement_dim(self) -> int:
        return self.model.state_dim + self.model.control_dim

    def noise_cov(self, q: int | None = None) -> np.ndarray:
        q = self.measurement_dim if q is None else q
        return self.noise_variance * np.eye(q)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "state_dim": self.model.state_dim,
            "control_dim": self.model.control_dim,
            "param_dim": self.model.param_dim,
            "measurement_dim": self.measurement_dim,
            "horizon": self.model.horizon,
            "ground_truth": [float(v) for v in self.ground_truth],
            "noise_variance": self.noise_variance,
            "default_mode": self.default_mode.value,
        }


def _codegen(state_syms, control_syms, exprs):
    """Lambdified dynamics, Jacobians, and costate-contracted curvature."""
    n = len(state_syms)
    z = list(state_syms) + list(control_syms)
    f_mat = sp.Matrix(exprs)
    p_syms = sp.symbols(f"_p0:{n}")
    contracted = sum(p * e for p, e in zip(p_syms, exprs))

    f_fn = sp.lambdify((state_syms, control_syms), exprs, "numpy")
    A_fn = sp.lambdify((state_syms, control_syms), f_mat.jacobian(state_syms), "numpy")
    B_fn = sp.lambdify((state_syms, control_syms), f_mat.jacobian(control_syms), "numpy")
    S_fn = sp.lambdify(
        (state_syms, control_syms, p_syms), sp.hessian(contracted, z), "numpy"
    )

    def dynamics(x, u):
        return np.asarray(f_fn(x, u), dtype=float).reshape(-1)

    def dynamics_jacobian(x, u):
        return (
            np.asarray(A_fn(x, u), dtype=float),
            np.asarray(B_fn(x, u), dtype=float),
        )

    def dynamics_curvature(x, u, p):
        return np.asarray(S_fn(x, u, p), dtype=float)

    return dynamics, dynamics_jacobian, dynamics_curvature


def _tracking_model(name, state_syms, control_syms, exprs, x0, goal, horizon):
    dyn, jac, curv = _codegen(state_syms, control_syms, exprs)
    cost = QuadraticTrackingCost(goal=goal, control_weight=CONTROL_WEIGHT)
    n, m = len(state_syms), len(control_syms)
    return SystemModel(
        state_dim=n,
        control_dim=m,
        param_dim=n,
        horizon=horizon,
        initial_state=np.asarray(x0, dtype=float),
        dynamics=dyn,
        stage_cost=cost.stage,
        terminal_cost=cost.terminal,
        dynamics_jacobian=jac,
        dynamics_curvature=curv,
        stage_gradient=cost.stage_gradient,
        stage_curvature=cost.stage_curvature,
        terminal_gradient_fn=cost.terminal_gradient,
        terminal_curvature=cost.terminal_curvature,
        name=name,
    )


@functools.lru_cache(maxsize=None)
def pendulum() -> BenchmarkSpec:
    """Torque-driven pendulum swinging from rest to the upright position.

    State (angle, rate), one torque input; mass 1, length 1, damping 0.1,
    gravity 9.81. Cost weights penalize angle error to pi and the rate.
    """
    q, dq, u = sp.symbols("q dq u")
    mass, length, damping, grav = 1.0, 1.0, 0.1, 9.81
    ddq = (u - damping * dq - mass * grav * length * sp.sin(q)) / (mass * length**2)
    exprs = [q + DT * dq, dq + DT * ddq]
    model = _tracking_model(
        "pendulum",
        (q, dq),
        (u,),
        exprs,
        x0=[0.0, 0.0],
        goal=[np.pi, 0.0],
        horizon=50,
    )
    return BenchmarkSpec(
        name="pendulum",
        model=model,
        ground_truth=[1.0, 10.0],
        noise_variance=1e-7,
    )


@functools.lru_cache(maxsize=None)
def cartpole() -> BenchmarkSpec:
    """Cart pole steering a swinging payload to a held tilt.

    State (cart position, pole angle from the hanging vertical, cart
    velocity, pole rate), one force input; cart mass 1, pole mass 0.1,
    pole half-length 0.5. The cart starts displaced with the pole swung
    out and regulates toward a goal pose whose tilt is not an equilibrium,
    so the controls stay active over the whole horizon.
    """
    x, q, dx, dq, u = sp.symbols("x q dx dq u")
    mc, mp, lp, grav = 1.0, 0.1, 0.5, 9.81
    total = mc + mp
    tmp = (u + mp * lp * dq**2 * sp.sin(q)) / total
    ddq = -(grav * sp.sin(q) + sp.cos(q) * tmp) / (
        lp * (sp.Rational(4, 3) - mp * sp.cos(q) ** 2 / total)
    )
    ddx = tmp - mp * lp * ddq * sp.cos(q) / total
    exprs = [x + DT * dx, q + DT * dq, dx + DT * ddx, dq + DT * ddq]
    model = _tracking_model(
        "cartpole",
        (x, q, dx, dq),
        (u,),
        exprs,
        x0=[0.8, 0.35, 0.0, 0.0],
        goal=[0.0, 0.25, 0.0, 0.0],
        horizon=60,
    )
    return BenchmarkSpec(
        name="cartpole",
        model=model,
        ground_truth=[2.0, 4.0, 1.5, 1.0],
        noise_variance=1e-6,
    )


@functools.lru_cache(maxsize=None)
def robot_arm() -> BenchmarkSpec:
    """Planar two-link arm (point masses, horizontal plane) settling to rest.

    State (two joint angles, two joint rates), two joint torques; unit
    masses and link lengths, no gravity torque in the plane of motion.
    Starts bent and returns to the straight configuration.
    """
    q1, q2, dq1, dq2, u1, u2 = sp.symbols("q1 q2 dq1 dq2 u1 u2")
    m1, m2, l1, l2 = 1.0, 1.0, 1.0, 1.0
    M = sp.Matrix(
        [
            [
                (m1 + m2) * l1**2 + m2 * l2**2 + 2 * m2 * l1 * l2 * sp.cos(q2),
                m2 * l2**2 + m2 * l1 * l2 * sp.cos(q2),
            ],
            [m2 * l2**2 + m2 * l1 * l2 * sp.cos(q2), m2 * l2**2],
        ]
    )
    coriolis = sp.Matrix(
        [
            -m2 * l1 * l2 * sp.sin(q2) * (2 * dq1 * dq2 + dq2**2),
            m2 * l1 * l2 * sp.sin(q2) * dq1**2,
        ]
    )
    tau = sp.Matrix([u1, u2])
    # keep the LU form as-is: simplify() can rewrite the solved expressions
    # into forms with spurious removable singularities
    acc = M.LUsolve(tau - coriolis)
    exprs = [q1 + DT * dq1, q2 + DT * dq2, dq1 + DT * acc[0], dq2 + DT * acc[1]]
    model = _tracking_model(
        "robot_arm",
        (q1, q2, dq1, dq2),
        (u1, u2),
        exprs,
        x0=[0.3, 0.4, 0.0, 0.0],
        goal=[0.0, 0.0, 0.0, 0.0],
        horizon=50,
    )
    return BenchmarkSpec(
        name="robot_arm",
        model=model,
        ground_truth=[1.0, 1.5, 2.0, 0.5],
        noise_variance=1e-5,
    )


def linear_quadratic(
    n: int = 3,
    m: int = 2,
    horizon: int = 20,
    seed: int = 0,
    control_weight: float = 0.5,
) -> BenchmarkSpec:
    """Random stable linear system with a diagonal parameterized state cost.

    Useful as a sanity instance: the forward problem has a closed-form
    Riccati solution. Not part of the named benchmark registry.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= 0.9 / max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, m))
    x0 = rng.standard_normal(n)
    cost = QuadraticTrackingCost(goal=np.zeros(n), control_weight=control_weight)

    def dynamics(x, u):
        return A @ x + B @ u

    model = SystemModel(
        state_dim=n,
        control_dim=m,
        param_dim=n,
        horizon=horizon,
        initial_state=x0,
        dynamics=dynamics,
        stage_cost=cost.stage,
        terminal_cost=cost.terminal,
        dynamics_jacobian=lambda x, u: (A.copy(), B.copy()),
        dynamics_curvature=lambda x, u, p: np.zeros((n + m, n + m)),
        stage_gradient=cost.stage_gradient,
        stage_curvature=cost.stage_curvature,
        terminal_gradient_fn=cost.terminal_gradient,
        terminal_curvature=cost.terminal_curvature,
        name="linear_quadratic",
    )
    theta = 0.5 + rng.uniform(size=n)
    return BenchmarkSpec(
        name="linear_quadratic",
        model=model,
        ground_truth=theta,
        noise_variance=1e-6,
    )


_REGISTRY = {
    "pendulum": pendulum,
    "cartpole": cartpole,
    "robot_arm": robot_arm,
}


def names() -> list[str]:
    return list(_REGISTRY)


def get(name: str) -> BenchmarkSpec:
    """Look up a benchmark by name."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(
            f"unknown benchmark {name!r}; available: {', '.join(_REGISTRY)}"
        ) from None
