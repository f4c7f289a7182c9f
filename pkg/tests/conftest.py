import numpy as np
import pytest

from iockf import benchmarks, solver
from iockf.system import SystemModel


@pytest.fixture(scope="session")
def pendulum_spec():
    return benchmarks.pendulum()


@pytest.fixture(scope="session")
def pendulum_traj(pendulum_spec):
    opts = solver.SolverOptions(stationarity_tol=1e-10)
    return solver.solve(pendulum_spec.model, pendulum_spec.ground_truth, opts)


@pytest.fixture(scope="session")
def lq_spec():
    return benchmarks.linear_quadratic(n=3, m=2, horizon=20, seed=11)


def scalar_one_step_model(x0=1.0):
    """Scalar problem: minimize u_0^2 + theta x_1^2 over x' = x + u.

    The closed form is u_0* = -theta x0 / (1 + theta). A second stage with
    cost u^2 (whose optimum is u_1 = 0) pads the horizon to the minimum
    supported length without changing the solution or its derivatives.
    """
    return SystemModel(
        state_dim=1,
        control_dim=1,
        param_dim=1,
        horizon=2,
        initial_state=np.array([x0]),
        dynamics=lambda x, u: x + u,
        stage_cost=lambda t, x, u, th: float(u @ u + (th @ (x**2) if t == 1 else 0.0)),
        terminal_cost=lambda x, th: 0.0,
        name="scalar_one_step",
    )
