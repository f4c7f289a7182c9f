"""Runtime health checks for filter runs.

The estimator comes with sufficient conditions for bounded mean-squared
error: the measurement Jacobians stay bounded, the predicted covariances
stay uniformly positive definite and bounded, the per-step inflation
matrices are bounded away from zero, and the measurement noise covariance
is positive definite. None of these can be certified a priori for an
implicit measurement map, but all of them can be checked on the data a run
actually produced, which is what this module does. Error traces against a
known ground truth (simulation setting) and an exponential-envelope fit
complete the picture.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .filters import RunHistory

__all__ = [
    "BoundednessReport",
    "EnvelopeFit",
    "ErrorTrace",
    "check_bounds",
    "error_trace",
]

BOUNDS_CSV_HEADER = (
    "filter,steps,g_bar,p_min,p_max,q_min,q_max,r_min,r_max,"
    "g_ok,p_ok,q_ok,r_ok,all_ok"
)


@dataclass(frozen=True)
class BoundednessReport:
    """Empirical extrema of a run against the boundedness conditions.

    g_bar is the largest measurement-Jacobian spectral norm observed;
    p_range/q_range/r_range are eigenvalue extrema of the predicted
    covariances, the inflation matrices, and the noise covariance. The
    booleans say whether each condition held on this run at the supplied
    floors.
    """

    filter_name: str
    steps: int
    g_bar: float
    p_range: tuple
    q_range: tuple
    r_range: tuple
    p_floor: float
    q_floor: float
    jacobian_ok: bool
    predicted_covariance_ok: bool
    process_noise_ok: bool
    measurement_noise_ok: bool

    @property
    def all_satisfied(self) -> bool:
        return (
            self.jacobian_ok
            and self.predicted_covariance_ok
            and self.process_noise_ok
            and self.measurement_noise_ok
        )

    def to_text(self) -> str:
        def mark(ok):
            return "satisfied" if ok else "VIOLATED"

        return "\n".join(
            [
                f"boundedness check ({self.filter_name}, {self.steps} steps)",
                f"  jacobian bound        : g_bar = {self.g_bar:.6e}  [{mark(self.jacobian_ok)}]",
                f"  predicted covariance  : eig in [{self.p_range[0]:.6e}, {self.p_range[1]:.6e}]"
                f"  (floor {self.p_floor:.1e})  [{mark(self.predicted_covariance_ok)}]",
                f"  inflation matrices    : eig in [{self.q_range[0]:.6e}, {self.q_range[1]:.6e}]"
                f"  (floor {self.q_floor:.1e})  [{mark(self.process_noise_ok)}]",
                f"  measurement noise     : eig in [{self.r_range[0]:.6e}, {self.r_range[1]:.6e}]"
                f"  [{mark(self.measurement_noise_ok)}]",
                f"  all conditions        : {mark(self.all_satisfied)}",
            ]
        )

    def csv_row(self) -> str:
        return ",".join(
            [
                self.filter_name,
                str(self.steps),
                repr(self.g_bar),
                repr(self.p_range[0]),
                repr(self.p_range[1]),
                repr(self.q_range[0]),
                repr(self.q_range[1]),
                repr(self.r_range[0]),
                repr(self.r_range[1]),
                str(int(self.jacobian_ok)),
                str(int(self.predicted_covariance_ok)),
                str(int(self.process_noise_ok)),
                str(int(self.measurement_noise_ok)),
                str(int(self.all_satisfied)),
            ]
        )


def check_bounds(
    history: RunHistory, p_floor: float = 1e-12, q_floor: float = 1e-9
) -> BoundednessReport:
    """Evaluate the boundedness conditions on a completed run.

    The extrema are taken over exactly the steps the run executed. The
    floors are numerically meaningful defaults, configurable per call.
    """
    if not history.reports:
        raise ValueError("run history contains no executed steps")

    g_norms = np.array([r.jacobian_norm for r in history.reports])
    g_bar = float(np.max(g_norms))
    g_ok = bool(np.all(np.isfinite(g_norms)))

    p_eigs = np.array(
        [np.linalg.eigvalsh(r.predicted_covariance) for r in history.reports]
    )
    p_min, p_max = float(np.min(p_eigs)), float(np.max(p_eigs))
    p_ok = p_min >= p_floor and np.isfinite(p_max)

    q_eigs = np.array(
        [np.linalg.eigvalsh(0.5 * (Q + Q.T)) for Q in history.process_noise]
    )
    q_min, q_max = float(np.min(q_eigs)), float(np.max(q_eigs))
    q_ok = q_min >= q_floor and np.isfinite(q_max)

    r_eigs = np.linalg.eigvalsh(history.noise_covariance)
    r_min, r_max = float(r_eigs[0]), float(r_eigs[-1])
    r_ok = r_min > 0 and np.isfinite(r_max)

    return BoundednessReport(
        filter_name=history.filter_name,
        steps=len(history.reports),
        g_bar=g_bar,
        p_range=(p_min, p_max),
        q_range=(q_min, q_max),
        r_range=(r_min, r_max),
        p_floor=p_floor,
        q_floor=q_floor,
        jacobian_ok=g_ok,
        predicted_covariance_ok=p_ok,
        process_noise_ok=q_ok,
        measurement_noise_ok=r_ok,
    )


@dataclass(frozen=True)
class EnvelopeFit:
    """Least-squares fit of mean squared errors to eta * m_1 * rate^t + offset."""

    eta: float
    rate: float
    offset: float
    residual: float


@dataclass(frozen=True)
class ErrorTrace:
    """Estimation errors theta - theta_hat_{t-1} against a known ground truth.

    errors has shape (n_runs, S, N) where row t-1 holds the error at time t
    (the first entry uses the prior mean). mean_squared averages the squared
    norms across runs.
    """

    times: np.ndarray
    errors: np.ndarray
    squared_norms: np.ndarray
    mean_squared: np.ndarray
    envelope: Optional[EnvelopeFit] = None


def _fit_envelope(times: np.ndarray, m: np.ndarray) -> Optional[EnvelopeFit]:
    if m.size < 3 or np.any(~np.isfinite(m)) or np.min(m) <= 0:
        return None
    m_ref = m[0]
    best = None
    for nu in np.linspace(0.0, 0.999 * float(np.min(m)), 60):
        resid = m - nu
        y = np.log(resid)
        A = np.vstack([np.ones_like(times, dtype=float), times.astype(float)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        pred = coef[0] + coef[1] * times
        sse = float(np.sum((y - pred) ** 2))
        if best is None or sse < best[0]:
            best = (sse, coef, nu)
    sse, coef, nu = best
    rate = float(np.exp(coef[1]))
    eta = float(np.exp(coef[0]) / m_ref)
    return EnvelopeFit(eta=eta, rate=rate, offset=float(nu), residual=sse)


def error_trace(
    estimate_runs: Sequence[np.ndarray],
    ground_truth: np.ndarray,
    fit_envelope: bool = False,
) -> ErrorTrace:
    """Per-step errors and the seed-averaged mean squared error.

    Args:
        estimate_runs: one array per run, shape (S, N), whose first row is
            the prior mean and subsequent rows the per-step posterior means;
            the error at time t is ground_truth - row t-1.
        ground_truth: the true parameter vector.
        fit_envelope: additionally fit the exponential-decay-plus-floor
            envelope to the seed-averaged squared errors.
    """
    theta = np.asarray(ground_truth, dtype=float).reshape(-1)
    runs = [np.asarray(r, dtype=float) for r in estimate_runs]
    if not runs:
        raise ValueError("no estimate runs supplied")
    S = runs[0].shape[0]
    for r in runs:
        if r.shape != (S, theta.size):
            raise ValueError("all runs must share shape (S, N) matching the ground truth")
    errors = np.array([theta[None, :] - r for r in runs])
    squared = np.sum(errors**2, axis=2)
    mean_squared = np.mean(squared, axis=0)
    times = np.arange(1, S + 1)
    env = _fit_envelope(times, mean_squared) if fit_envelope else None
    return ErrorTrace(
        times=times,
        errors=errors,
        squared_norms=squared,
        mean_squared=mean_squared,
        envelope=env,
    )
