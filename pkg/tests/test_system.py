import dataclasses

import numpy as np
import pytest

from iockf import system as sysm
from iockf.system import QuadraticTrackingCost, SystemModel


def linear_scalar_model():
    # x' = 2x + u with cost theta1 x^2 + u^2
    return SystemModel(
        state_dim=1,
        control_dim=1,
        param_dim=2,
        horizon=3,
        initial_state=np.array([1.0]),
        dynamics=lambda x, u: 2 * x + u,
        stage_cost=lambda t, x, u, th: float(th[0] * x[0] ** 2 + u[0] ** 2),
        terminal_cost=lambda x, th: float(th[0] * x[0] ** 2),
    )


class TestStep:
    def test_pendulum_equilibrium_is_fixed_point(self, pendulum_spec):
        x = np.zeros(2)
        out = sysm.step(pendulum_spec.model, x, np.zeros(1))
        np.testing.assert_array_equal(out, x)

    def test_linear_arithmetic(self):
        model = linear_scalar_model()
        out = sysm.step(model, np.array([1.0]), np.array([3.0]))
        assert out[0] == 5.0

    def test_pendulum_against_hand_evaluated_discretization(self, pendulum_spec):
        # one Euler step of ddq = (u - b dq - m g l sin q) / (m l^2)
        q, dq, u, dt = 0.1, 0.0, 0.0, 0.05
        expected = np.array([q + dt * dq, dq + dt * (u - 0.1 * dq - 9.81 * np.sin(q))])
        out = sysm.step(pendulum_spec.model, np.array([q, dq]), np.array([u]))
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-14)

    def test_dimension_mismatch_rejected(self, pendulum_spec):
        with pytest.raises(ValueError):
            sysm.step(pendulum_spec.model, np.zeros(3), np.zeros(1))
        with pytest.raises(ValueError):
            sysm.step(pendulum_spec.model, np.zeros(2), np.zeros(2))

    def test_step_is_pure(self, pendulum_spec):
        x = np.array([0.3, -0.2])
        u = np.array([0.5])
        a = sysm.step(pendulum_spec.model, x, u)
        b = sysm.step(pendulum_spec.model, x, u)
        np.testing.assert_array_equal(a, b)


class TestHamiltonian:
    def test_zero_costate_gives_stage_cost(self, pendulum_spec):
        model = pendulum_spec.model
        x, u, th = np.array([0.2, 0.1]), np.array([0.4]), np.array([1.0, 2.0])
        h = sysm.hamiltonian(model, 0, x, u, np.zeros(2), th)
        assert h == pytest.approx(model.stage_cost(0, x, u, th), abs=1e-15)

    def test_zero_cost_linear_dynamics(self):
        A = np.array([[0.5, 0.1], [0.0, 0.9]])
        B = np.array([[0.0], [1.0]])
        model = SystemModel(
            state_dim=2,
            control_dim=1,
            param_dim=1,
            horizon=2,
            initial_state=np.zeros(2),
            dynamics=lambda x, u: A @ x + B @ u,
            stage_cost=lambda t, x, u, th: 0.0,
            terminal_cost=lambda x, th: 0.0,
        )
        x, u, p = np.array([1.0, -2.0]), np.array([0.7]), np.array([0.3, 0.4])
        assert sysm.hamiltonian(model, 0, x, u, p, np.array([1.0])) == pytest.approx(
            float((A @ x + B @ u) @ p), abs=1e-14
        )

    def test_pendulum_term_by_term(self, pendulum_spec):
        model = pendulum_spec.model
        x, u = np.array([0.4, -0.3]), np.array([0.8])
        p = np.array([0.5, -1.5])
        th = np.array([1.0, 10.0])
        expected = model.stage_cost(0, x, u, th) + float(model.dynamics(x, u) @ p)
        assert sysm.hamiltonian(model, 0, x, u, p, th) == pytest.approx(expected, rel=1e-14)


class TestDynamicsJacobians:
    def test_linear_system_exact(self):
        model = linear_scalar_model()
        A, B = sysm.dynamics_jacobians(model, np.array([3.0]), np.array([-1.0]))
        np.testing.assert_allclose(A, [[2.0]], atol=1e-9)
        np.testing.assert_allclose(B, [[1.0]], atol=1e-9)

    def test_pendulum_analytic_matches_finite_differences(self, pendulum_spec):
        model = pendulum_spec.model
        x, u = np.array([0.3, -0.2]), np.array([0.5])
        A, B = sysm.dynamics_jacobians(model, x, u)
        bare = dataclasses.replace(model, dynamics_jacobian=None)
        A_fd, B_fd = sysm.dynamics_jacobians(bare, x, u)
        np.testing.assert_allclose(A, A_fd, rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(B, B_fd, rtol=1e-6, atol=1e-9)

    def test_control_affine_B_is_control_independent(self, pendulum_spec):
        model = pendulum_spec.model
        x = np.array([0.3, -0.2])
        _, B1 = sysm.dynamics_jacobians(model, x, np.array([0.1]))
        _, B2 = sysm.dynamics_jacobians(model, x, np.array([-2.0]))
        np.testing.assert_allclose(B1, B2, atol=1e-12)


class TestHamiltonianBlocks:
    def test_scalar_quadratic_closed_form(self):
        model = linear_scalar_model()
        x, u = np.array([0.7]), np.array([-0.2])
        th = np.array([1.3, 0.4])
        blk = sysm.hamiltonian_blocks(model, 0, x, u, np.zeros(1), th)
        np.testing.assert_allclose(blk.Hxx, [[2 * th[0]]], rtol=1e-6)
        np.testing.assert_allclose(blk.Huu, [[2.0]], rtol=1e-6)
        np.testing.assert_allclose(blk.Hxe, [[2 * x[0], 0.0]], rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(blk.Hue, np.zeros((1, 2)), atol=1e-8)

    def test_zero_costate_quadratic_cost_gives_cost_hessian(self):
        cost = QuadraticTrackingCost(goal=np.array([0.5, -0.5]), control_weight=0.3)
        model = SystemModel(
            state_dim=2,
            control_dim=1,
            param_dim=2,
            horizon=2,
            initial_state=np.zeros(2),
            dynamics=lambda x, u: np.array([np.sin(x[0]) + u[0], x[1] * x[0]]),
            stage_cost=cost.stage,
            terminal_cost=cost.terminal,
        )
        x, u, th = np.array([0.2, 0.3]), np.array([0.1]), np.array([2.0, 1.0])
        blk = sysm.hamiltonian_blocks(model, 0, x, u, np.zeros(2), th)
        np.testing.assert_allclose(blk.Hxx, np.diag(2 * th), rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(blk.Huu, [[0.6]], rtol=1e-5)
        np.testing.assert_allclose(blk.Hxu, np.zeros((2, 1)), atol=1e-7)

    @pytest.mark.parametrize("sample", range(3))
    def test_blocks_match_fd_of_gradient_on_pendulum(self, pendulum_spec, sample):
        model = pendulum_spec.model
        rng = np.random.default_rng(100 + sample)
        x = rng.uniform(-1, 1, size=2)
        u = rng.uniform(-1, 1, size=1)
        p = rng.uniform(-1, 1, size=2)
        th = np.array([1.0, 10.0]) * rng.uniform(0.5, 1.5, size=2)
        blk = sysm.hamiltonian_blocks(model, 0, x, u, p, th)

        h = 1e-6
        def grad(xv, uv, thv):
            return sysm.hamiltonian_gradients(model, 0, xv, uv, p, thv)

        for i in range(2):
            e = np.zeros(2); e[i] = h
            gxp, gup = grad(x + e, u, th)
            gxm, gum = grad(x - e, u, th)
            np.testing.assert_allclose(blk.Hxx[:, i], (gxp - gxm) / (2 * h), rtol=1e-5, atol=1e-6)
            np.testing.assert_allclose(blk.Hux[:, i], (gup - gum) / (2 * h), rtol=1e-5, atol=1e-6)
        e = np.array([h])
        gxp, gup = grad(x, u + e, th)
        gxm, gum = grad(x, u - e, th)
        np.testing.assert_allclose(blk.Hxu[:, 0], (gxp - gxm) / (2 * h), rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(blk.Huu[:, 0], (gup - gum) / (2 * h), rtol=1e-5, atol=1e-6)
        for i in range(2):
            e = np.zeros(2); e[i] = h
            gxp, gup = grad(x, u, th + e)
            gxm, gum = grad(x, u, th - e)
            np.testing.assert_allclose(blk.Hxe[:, i], (gxp - gxm) / (2 * h), rtol=1e-5, atol=1e-6)
            np.testing.assert_allclose(blk.Hue[:, i], (gup - gum) / (2 * h), rtol=1e-5, atol=1e-6)

    def test_fd_fallback_matches_analytic_callbacks(self, pendulum_spec):
        model = pendulum_spec.model
        bare = dataclasses.replace(
            model,
            dynamics_jacobian=None,
            dynamics_curvature=None,
            stage_gradient=None,
            stage_curvature=None,
            terminal_gradient_fn=None,
            terminal_curvature=None,
        )
        x, u = np.array([0.6, -0.4]), np.array([1.2])
        p = np.array([0.3, 0.9])
        th = np.array([1.0, 10.0])
        a = sysm.hamiltonian_blocks(model, 0, x, u, p, th)
        b = sysm.hamiltonian_blocks(bare, 0, x, u, p, th)
        for name in ("A", "B", "Hxx", "Hxu", "Huu", "Hxe", "Hue"):
            np.testing.assert_allclose(
                getattr(a, name), getattr(b, name), rtol=1e-5, atol=1e-6
            )
        ta = sysm.terminal_blocks(model, x, th)
        tb = sysm.terminal_blocks(bare, x, th)
        np.testing.assert_allclose(ta.Hxx, tb.Hxx, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(ta.Hxe, tb.Hxe, rtol=1e-5, atol=1e-6)

    def test_symmetry_invariants(self, pendulum_spec):
        model = pendulum_spec.model
        blk = sysm.hamiltonian_blocks(
            model, 0, np.array([0.4, 0.2]), np.array([0.3]), np.array([1.0, -1.0]),
            np.array([1.0, 10.0]),
        )
        assert np.array_equal(blk.Hux, blk.Hxu.T)
        assert np.max(np.abs(blk.Hxx - blk.Hxx.T)) <= 1e-10 * max(1, np.max(np.abs(blk.Hxx)))
        assert np.max(np.abs(blk.Huu - blk.Huu.T)) <= 1e-10 * max(1, np.max(np.abs(blk.Huu)))


class TestModelValidation:
    def test_bad_dimensions_rejected(self):
        with pytest.raises(ValueError):
            SystemModel(
                state_dim=0, control_dim=1, param_dim=1, horizon=2,
                initial_state=np.zeros(0),
                dynamics=lambda x, u: x,
                stage_cost=lambda t, x, u, th: 0.0,
                terminal_cost=lambda x, th: 0.0,
            )
        with pytest.raises(ValueError):
            SystemModel(
                state_dim=2, control_dim=1, param_dim=1, horizon=1,
                initial_state=np.zeros(2),
                dynamics=lambda x, u: x,
                stage_cost=lambda t, x, u, th: 0.0,
                terminal_cost=lambda x, th: 0.0,
            )

    def test_tracking_cost_requires_positive_control_weight(self):
        with pytest.raises(ValueError):
            QuadraticTrackingCost(goal=np.zeros(2), control_weight=0.0)
