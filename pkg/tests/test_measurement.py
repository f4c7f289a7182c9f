import numpy as np
import pytest

from iockf import measurement as meas
from iockf.solver import Trajectory


@pytest.fixture()
def small_traj():
    # 3 steps, n=2, m=1; simple integer-ish values for easy inspection
    states = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]])
    controls = np.array([[0.5], [1.5], [2.5]])
    return Trajectory(states=states, controls=controls, objective_value=0.0)


class TestSelectionMatrix:
    def test_full_is_identity(self):
        F = meas.selection_matrix("full", 2, 1)
        np.testing.assert_array_equal(F.matrix, np.eye(3))
        assert F.mode is meas.SelectionMode.FULL

    def test_states_only_pattern(self):
        F = meas.selection_matrix("states", 2, 1)
        np.testing.assert_array_equal(F.matrix, [[1, 0, 0], [0, 1, 0]])

    def test_controls_only_pattern(self):
        F = meas.selection_matrix("controls", 2, 1)
        np.testing.assert_array_equal(F.matrix, [[0, 0, 1]])

    def test_custom_requires_matrix_with_right_columns(self):
        with pytest.raises(ValueError):
            meas.selection_matrix("custom", 2, 1)
        with pytest.raises(ValueError):
            meas.selection_matrix("custom", 2, 1, custom=np.ones((1, 4)))
        F = meas.selection_matrix("custom", 2, 1, custom=np.ones((1, 3)))
        assert F.q == 1


class TestObserve:
    def test_full_concatenates(self, small_traj):
        F = meas.selection_matrix("full", 2, 1)
        np.testing.assert_array_equal(meas.observe(F, small_traj, 1), [3.0, 4.0, 1.5])

    def test_states_only(self, small_traj):
        F = meas.selection_matrix("states", 2, 1)
        np.testing.assert_array_equal(meas.observe(F, small_traj, 2), [5.0, 6.0])

    def test_ones_row_sums_entries(self, small_traj):
        F = meas.selection_matrix("custom", 2, 1, custom=np.ones((1, 3)))
        assert meas.observe(F, small_traj, 0)[0] == pytest.approx(1.0 + 2.0 + 0.5)

    def test_final_time_rejected(self, small_traj):
        F = meas.selection_matrix("full", 2, 1)
        with pytest.raises(ValueError):
            meas.observe(F, small_traj, 3)


class TestNoiseModel:
    def test_non_pd_rejected(self):
        with pytest.raises(ValueError):
            meas.NoiseModel(R=np.zeros((2, 2)), seed=0)
        with pytest.raises(ValueError):
            meas.NoiseModel(R=np.array([[1.0, 2.0], [2.0, 1.0]]), seed=0)  # indefinite

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            meas.NoiseModel(R=np.array([[1.0, 0.1], [0.0, 1.0]]), seed=0)

    def test_zero_noise_limit(self, small_traj):
        F = meas.selection_matrix("full", 2, 1)
        noise = meas.NoiseModel(R=np.zeros((3, 3)), seed=1, allow_semidefinite=True)
        recs = meas.simulate_measurements(small_traj, F, noise)
        for rec in recs:
            np.testing.assert_array_equal(rec.y, meas.observe(F, small_traj, rec.t))

    def test_same_seed_bit_identical(self, small_traj):
        F = meas.selection_matrix("full", 2, 1)
        noise = meas.NoiseModel(R=1e-4 * np.eye(3), seed=42)
        a = meas.simulate_measurements(small_traj, F, noise)
        b = meas.simulate_measurements(small_traj, F, noise)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.y, rb.y)

    def test_draw_independent_of_generation_order(self):
        noise = meas.NoiseModel(R=np.eye(2), seed=9)
        forward = [noise.draw(t) for t in range(5)]
        backward = [noise.draw(t) for t in reversed(range(5))]
        for t in range(5):
            assert np.array_equal(forward[t], backward[4 - t])

    def test_empirical_covariance_matches_R(self):
        # correlated covariance exercises the Cholesky factor
        R = np.array([[2.0, 0.6], [0.6, 1.0]])
        draws = np.array(
            [meas.NoiseModel(R=R, seed=s).draw(3) for s in range(100_000)]
        )
        emp = draws.T @ draws / draws.shape[0]
        assert np.linalg.norm(emp - R) / np.linalg.norm(R) < 0.05

    def test_whiteness_across_time(self):
        n = 4000
        noise = meas.NoiseModel(R=np.eye(1), seed=17)
        v = np.array([noise.draw(t)[0] for t in range(n)])
        v = v - v.mean()
        denom = float(v @ v)
        for lag in (1, 2, 5):
            rho = float(v[:-lag] @ v[lag:]) / denom
            assert abs(rho) < 3 / np.sqrt(n)


class TestCsvRoundTrip:
    def test_round_trip_exact(self, small_traj, tmp_path):
        F = meas.selection_matrix("full", 2, 1)
        noise = meas.NoiseModel(R=1e-3 * np.eye(3), seed=5)
        recs = meas.simulate_measurements(small_traj, F, noise)
        path = tmp_path / "m.csv"
        meas.write_measurements_csv(path, recs)
        back = meas.read_measurements_csv(path)
        assert [r.t for r in back] == [r.t for r in recs]
        for ra, rb in zip(recs, back):
            assert np.array_equal(ra.y, rb.y)

    def test_header_schema(self, small_traj, tmp_path):
        F = meas.selection_matrix("states", 2, 1)
        noise = meas.NoiseModel(R=np.eye(2), seed=0)
        path = tmp_path / "m.csv"
        meas.write_measurements_csv(path, meas.simulate_measurements(small_traj, F, noise))
        assert path.read_text().splitlines()[0] == "t,y_1,y_2"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            meas.write_measurements_csv(tmp_path / "m.csv", [])


def test_covariance_mismatch_rejected(small_traj):
    F = meas.selection_matrix("full", 2, 1)
    noise = meas.NoiseModel(R=np.eye(2), seed=0)
    with pytest.raises(ValueError):
        meas.simulate_measurements(small_traj, F, noise)
