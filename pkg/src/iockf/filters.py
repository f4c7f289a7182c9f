"""Online parameter estimation filters.

The parameters of the objective are a constant hidden state observed
through the solution map of the forward problem. The EKF linearizes that
map with the sensitivity recursions (one forward solve plus one auxiliary
pass per step); the UKF baseline propagates 2N+1 sigma points, each
requiring its own forward solve. Both consume each measurement exactly
once, in time order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from . import sensitivity as sens
from . import solver as ocp
from .measurement import MeasurementRecord, SelectionMatrix, observe
from .solver import SolverOptions, Trajectory
from .system import SystemModel

__all__ = [
    "FilterBelief",
    "EkfOptions",
    "UkfParams",
    "StepReport",
    "RunHistory",
    "FilterRunError",
    "prior",
    "kalman_update",
    "ekf_step",
    "run_ekf",
    "ukf_step",
    "run_ukf",
]


@dataclass(frozen=True)
class FilterBelief:
    """Gaussian posterior over the parameters at a time index."""

    mean: np.ndarray
    covariance: np.ndarray
    time: int


def prior(theta0: np.ndarray, P0: np.ndarray) -> FilterBelief:
    """Belief at time 0 from a Gaussian prior; P0 must be symmetric PD."""
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (theta0.size, theta0.size):
        raise ValueError("prior covariance shape does not match the mean")
    if np.max(np.abs(P0 - P0.T)) > 1e-10 * max(1.0, float(np.max(np.abs(P0)))):
        raise ValueError("prior covariance must be symmetric")
    if np.linalg.eigvalsh(P0)[0] <= 0:
        raise ValueError("prior covariance must be positive definite")
    return FilterBelief(mean=theta0, covariance=P0.copy(), time=0)


@dataclass(frozen=True)
class EkfOptions:
    """Prior and per-step inflation used by both filters.

    process_noise may be a constant N x N matrix or a callable t -> matrix;
    None selects the default 1e-8 I. prior_mean None selects all-ones and
    prior_covariance None the identity (project defaults, recorded in run
    configs).
    """

    prior_mean: Optional[np.ndarray] = None
    prior_covariance: Optional[np.ndarray] = None
    process_noise: Union[np.ndarray, Callable, None] = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def resolve_prior(self, param_dim: int) -> FilterBelief:
        mean = np.ones(param_dim) if self.prior_mean is None else np.asarray(self.prior_mean, float)
        cov = np.eye(param_dim) if self.prior_covariance is None else np.asarray(self.prior_covariance, float)
        return prior(mean, cov)

    def q_at(self, t: int, param_dim: int) -> np.ndarray:
        if self.process_noise is None:
            return 1e-8 * np.eye(param_dim)
        if callable(self.process_noise):
            Q = np.asarray(self.process_noise(t), dtype=float)
        else:
            Q = np.asarray(self.process_noise, dtype=float)
        if Q.shape != (param_dim, param_dim):
            raise ValueError(f"Q_t must be {param_dim}x{param_dim}")
        if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] < -1e-12:
            raise ValueError("Q_t must be positive semidefinite")
        return Q


@dataclass(frozen=True)
class UkfParams:
    """Scaled symmetric sigma-point set parameters."""

    alpha: float = 0.1
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("sigma-point spread alpha must be > 0")


@dataclass
class StepReport:
    """Per-step diagnostics of a filter update.

    ocp_solve_count is 2 for EKF steps (forward solve + auxiliary pass) and
    2N+1 for UKF steps (one forward solve per sigma point). trajectory and
    sensitivities cache the solve at the pre-update mean for diagnostics and
    warm starting; they are dropped when a history is serialized.
    """

    t: int
    innovation: Optional[np.ndarray]
    gain: Optional[np.ndarray]
    jacobian: Optional[np.ndarray]
    jacobian_norm: float
    wall_time: float
    ocp_solve_count: int
    predicted_covariance: Optional[np.ndarray]
    trajectory: Optional[Trajectory] = None
    sensitivities: Optional[sens.SensitivityPair] = None


@dataclass
class RunHistory:
    """Everything a filter run produced, in step order."""

    filter_name: str
    prior: FilterBelief
    beliefs: list
    reports: list
    process_noise: list
    noise_covariance: np.ndarray
    measurement_reads: dict

    @property
    def final(self) -> FilterBelief:
        return self.beliefs[-1] if self.beliefs else self.prior

    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.beliefs])

    def save(self, path) -> None:
        """Serialize the arrays needed to reproduce boundedness reports."""
        np.savez(
            path,
            filter_name=self.filter_name,
            prior_mean=self.prior.mean,
            prior_cov=self.prior.covariance,
            times=np.array([b.time for b in self.beliefs], dtype=int),
            means=np.array([b.mean for b in self.beliefs]),
            covs=np.array([b.covariance for b in self.beliefs]),
            pred_covs=np.array([r.predicted_covariance for r in self.reports]),
            g_norms=np.array([r.jacobian_norm for r in self.reports]),
            wall_times=np.array([r.wall_time for r in self.reports]),
            solve_counts=np.array([r.ocp_solve_count for r in self.reports], dtype=int),
            qs=np.array(self.process_noise),
            r_cov=self.noise_covariance,
            read_times=np.array(sorted(self.measurement_reads), dtype=int),
            read_counts=np.array(
                [self.measurement_reads[t] for t in sorted(self.measurement_reads)], dtype=int
            ),
        )

    @classmethod
    def load(cls, path) -> "RunHistory":
        with np.load(path, allow_pickle=False) as z:
            beliefs = [
                FilterBelief(mean=m, covariance=c, time=int(t))
                for m, c, t in zip(z["means"], z["covs"], z["times"])
            ]
            reports = [
                StepReport(
                    t=int(t),
                    innovation=None,
                    gain=None,
                    jacobian=None,
                    jacobian_norm=float(g),
                    wall_time=float(w),
                    ocp_solve_count=int(s),
                    predicted_covariance=p,
                )
                for t, g, w, s, p in zip(
                    z["times"], z["g_norms"], z["wall_times"], z["solve_counts"], z["pred_covs"]
                )
            ]
            return cls(
                filter_name=str(z["filter_name"]),
                prior=FilterBelief(mean=z["prior_mean"], covariance=z["prior_cov"], time=0),
                beliefs=beliefs,
                reports=reports,
                process_noise=list(z["qs"]),
                noise_covariance=z["r_cov"],
                measurement_reads={
                    int(t): int(c) for t, c in zip(z["read_times"], z["read_counts"])
                },
            )


class FilterRunError(RuntimeError):
    """A step failed; partial results up to the failure are attached."""

    def __init__(self, cause: Exception, history: RunHistory):
        super().__init__(f"filter run failed at step {len(history.beliefs) + 1}: {cause}")
        self.cause = cause
        self.history = history


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_step_inputs(belief, rec, F, R, param_dim):
    if rec.t != belief.time + 1:
        raise ValueError(f"belief is at time {belief.time}, measurement at t={rec.t}")
    if rec.y.size != F.q:
        raise ValueError(f"measurement has dimension {rec.y.size}, selection q={F.q}")
    R = np.asarray(R, dtype=float)
    if R.shape != (F.q, F.q):
        raise ValueError("noise covariance does not match the selection matrix")
    return R


def kalman_update(mean, P_pred, G, R, innovation):
    """The linear update: gain, corrected mean, symmetrized covariance.

    K = P G' (G P G' + R)^-1, mean' = mean + K innovation,
    P' = P - K G P. Raises on a non-factorizable innovation covariance.
    """
    S = _sym(G @ P_pred @ G.T + R)
    try:
        cho = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(
            "innovation covariance factorization failed; check that R is positive definite"
        ) from exc
    K = scipy.linalg.cho_solve(cho, G @ P_pred, check_finite=False).T
    new_mean = mean + K @ innovation
    P = _sym(P_pred - K @ G @ P_pred)
    return new_mean, P, K


def ekf_step(
    belief: FilterBelief,
    measurement: MeasurementRecord,
    model: SystemModel,
    F: SelectionMatrix,
    R: np.ndarray,
    Q: np.ndarray,
    solver_options: Optional[SolverOptions] = None,
    warm_start: Optional[Trajectory] = None,
) -> tuple[FilterBelief, StepReport]:
    """One EKF update.

    Inflates the covariance by Q, solves the forward problem at the current
    mean, linearizes the measurement map there via the sensitivity
    recursions, and applies the Kalman update. The posterior covariance is
    symmetrized after the update.
    """
    t0 = time.perf_counter()
    t = measurement.t
    R = _check_step_inputs(belief, measurement, F, R, model.param_dim)

    P_pred = _sym(belief.covariance + Q)
    solves = 0

    traj = ocp.solve(model, belief.mean, solver_options, warm_start)
    solves += 1
    cs = sens.costates(model, traj, belief.mean)
    pair = sens.sensitivities(model, traj, cs, belief.mean)
    solves += 1  # the auxiliary recursion is the second, LQ-like problem
    G = sens.output_jacobian(F.matrix, pair.X[t], pair.U[t])

    innovation = measurement.y - observe(F, traj, t)
    mean, P, K = kalman_update(belief.mean, P_pred, G, R, innovation)
    new_belief = FilterBelief(mean=mean, covariance=P, time=t)
    report = StepReport(
        t=t,
        innovation=innovation,
        gain=K,
        jacobian=G,
        jacobian_norm=float(np.linalg.norm(G, 2)),
        wall_time=time.perf_counter() - t0,
        ocp_solve_count=solves,
        predicted_covariance=P_pred,
        trajectory=traj,
        sensitivities=pair,
    )
    return new_belief, report


def _sigma_points(mean, cov, params):
    N = mean.size
    lam = params.alpha**2 * (N + params.kappa) - N
    spread = N + lam
    try:
        L = np.linalg.cholesky(spread * cov)
    except np.linalg.LinAlgError:
        # re-condition once, then give up
        try:
            L = np.linalg.cholesky(spread * (cov + 1e-12 * np.eye(N)))
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("sigma-point covariance square root failed") from exc
    pts = np.empty((2 * N + 1, N))
    pts[0] = mean
    for i in range(N):
        pts[1 + i] = mean + L[:, i]
        pts[1 + N + i] = mean - L[:, i]
    wm = np.full(2 * N + 1, 1.0 / (2 * spread))
    wc = wm.copy()
    wm[0] = lam / spread
    wc[0] = lam / spread + (1 - params.alpha**2 + params.beta)
    return pts, wm, wc


def ukf_step(
    belief: FilterBelief,
    measurement: MeasurementRecord,
    model: SystemModel,
    F: SelectionMatrix,
    R: np.ndarray,
    Q: np.ndarray,
    solver_options: Optional[SolverOptions] = None,
    params: Optional[UkfParams] = None,
    warm_start: Optional[Trajectory] = None,
) -> tuple[FilterBelief, StepReport]:
    """One unscented update; solves the forward problem once per sigma point."""
    t0 = time.perf_counter()
    t = measurement.t
    R = _check_step_inputs(belief, measurement, F, R, model.param_dim)
    params = params or UkfParams()

    P_pred = _sym(belief.covariance + Q)
    pts, wm, wc = _sigma_points(belief.mean, P_pred, params)

    solves = 0
    preds = np.empty((pts.shape[0], F.q))
    center_traj = None
    for i, theta_i in enumerate(pts):
        traj_i = ocp.solve(model, theta_i, solver_options, warm_start)
        solves += 1
        preds[i] = observe(F, traj_i, t)
        if i == 0:
            center_traj = traj_i

    y_hat = wm @ preds
    dy = preds - y_hat
    S = _sym(dy.T @ (wc[:, None] * dy) + R)
    dx = pts - belief.mean
    C = dx.T @ (wc[:, None] * dy)
    K = np.linalg.solve(S, C.T).T

    innovation = measurement.y - y_hat
    mean = belief.mean + K @ innovation
    P = _sym(P_pred - K @ S @ K.T)
    new_belief = FilterBelief(mean=mean, covariance=P, time=t)
    report = StepReport(
        t=t,
        innovation=innovation,
        gain=K,
        jacobian=None,
        jacobian_norm=float("nan"),
        wall_time=time.perf_counter() - t0,
        ocp_solve_count=solves,
        predicted_covariance=P_pred,
        trajectory=center_traj,
    )
    return new_belief, report


def _select_F(F, t) -> SelectionMatrix:
    return F(t) if callable(F) else F


def _run(filter_name, step_fn, model, measurements, F, R, options):
    belief = options.resolve_prior(model.param_dim)
    history = RunHistory(
        filter_name=filter_name,
        prior=belief,
        beliefs=[],
        reports=[],
        process_noise=[],
        noise_covariance=np.asarray(R, dtype=float),
        measurement_reads={},
    )
    warm = None
    for rec in measurements:
        history.measurement_reads[rec.t] = history.measurement_reads.get(rec.t, 0) + 1
        if rec.t == 0:
            continue  # the recursion starts at t = 1; y_0 is discarded
        try:
            Q = options.q_at(rec.t, model.param_dim)
            belief, report = step_fn(belief, rec, _select_F(F, rec.t), Q, warm)
        except Exception as exc:  # noqa: BLE001 - partial results travel with the error
            raise FilterRunError(exc, history) from exc
        history.beliefs.append(belief)
        history.reports.append(report)
        history.process_noise.append(Q)
        warm = report.trajectory
    return history


def run_ekf(
    model: SystemModel,
    measurements: Sequence[MeasurementRecord],
    F,
    R: np.ndarray,
    options: Optional[EkfOptions] = None,
) -> RunHistory:
    """Fold the EKF over a measurement sequence (t = 1 .. T-1, single pass).

    Each record is consumed exactly once; a record at t = 0 is read and
    discarded. The forward solve of each step is warm started from the
    previous step's trajectory. On a step failure a FilterRunError carrying
    the partial history is raised.
    """
    options = options or EkfOptions()

    def step(belief, rec, F_t, Q, warm):
        return ekf_step(belief, rec, model, F_t, R, Q, options.solver, warm)

    return _run("ekf", step, model, measurements, F, R, options)


def run_ukf(
    model: SystemModel,
    measurements: Sequence[MeasurementRecord],
    F,
    R: np.ndarray,
    options: Optional[EkfOptions] = None,
    params: Optional[UkfParams] = None,
) -> RunHistory:
    """Fold the UKF baseline over a measurement sequence (single pass)."""
    options = options or EkfOptions()
    params = params or UkfParams()

    def step(belief, rec, F_t, Q, warm):
        return ukf_step(belief, rec, model, F_t, R, Q, options.solver, params, warm)

    return _run("ukf", step, model, measurements, F, R, options)
