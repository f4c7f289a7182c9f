"""Linear selection measurements of optimal states and controls.

A measurement at time t is y_t = F [x_t; u_t] + v_t with a q x (n+m)
selection matrix F and i.i.d. Gaussian noise v_t ~ N(0, R). Noise draws are
keyed by (seed, t) through independent counter-derived streams, so a
measurement sequence is reproducible bit-for-bit regardless of the order in
which individual records are generated.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .solver import Trajectory

__all__ = [
    "SelectionMode",
    "SelectionMatrix",
    "NoiseModel",
    "MeasurementRecord",
    "selection_matrix",
    "observe",
    "simulate_measurements",
    "write_measurements_csv",
    "read_measurements_csv",
]


class SelectionMode(str, enum.Enum):
    FULL = "full"
    STATES_ONLY = "states"
    CONTROLS_ONLY = "controls"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SelectionMatrix:
    """A q x (n+m) selection matrix with its mode tag."""

    matrix: np.ndarray
    mode: SelectionMode

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2:
            raise ValueError("selection matrix must be 2-D")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]


def selection_matrix(mode, n: int, m: int, custom: Optional[np.ndarray] = None) -> SelectionMatrix:
    """Build the selection matrix for a measurement mode.

    full -> I_{n+m}; states -> [I_n 0]; controls -> [0 I_m]; custom uses the
    supplied matrix (which must have n+m columns).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    mode = SelectionMode(mode)
    if mode is SelectionMode.FULL:
        M = np.eye(n + m)
    elif mode is SelectionMode.STATES_ONLY:
        M = np.hstack([np.eye(n), np.zeros((n, m))])
    elif mode is SelectionMode.CONTROLS_ONLY:
        M = np.hstack([np.zeros((m, n)), np.eye(m)])
    else:
        if custom is None:
            raise ValueError("custom mode requires an explicit matrix")
        M = np.asarray(custom, dtype=float)
        if M.shape[1] != n + m:
            raise ValueError(f"custom matrix must have {n + m} columns, got {M.shape[1]}")
    return SelectionMatrix(matrix=M, mode=mode)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian measurement noise N(0, R) with a 64-bit stream seed.

    R must be symmetric positive definite (tests may pass
    allow_semidefinite=True to use a zero or singular covariance).
    """

    R: np.ndarray
    seed: int
    allow_semidefinite: bool = False

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("R must be a square matrix")
        if np.max(np.abs(R - R.T)) > 1e-12:
            raise ValueError("R must be symmetric (to 1e-12)")
        w = np.linalg.eigvalsh(R)
        if not self.allow_semidefinite and w[0] <= 0:
            raise ValueError(f"R must be positive definite; min eigenvalue {w[0]:.3e}")
        if self.allow_semidefinite and w[0] < -1e-12:
            raise ValueError("R must be at least positive semidefinite")
        R = R.copy()
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    @property
    def q(self) -> int:
        return self.R.shape[0]

    def factor(self) -> np.ndarray:
        """Lower-triangular L with L L' = R (PSD-safe via eigendecomposition)."""
        if self.allow_semidefinite:
            w, V = np.linalg.eigh(self.R)
            return V @ np.diag(np.sqrt(np.maximum(w, 0.0)))
        return np.linalg.cholesky(self.R)

    def draw(self, t: int) -> np.ndarray:
        """Noise vector for time t; pure function of (seed, t)."""
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(t,)))
        return self.factor() @ rng.standard_normal(self.q)


@dataclass(frozen=True)
class MeasurementRecord:
    """One measurement y_t at time index t (0 <= t <= T-1)."""

    t: int
    y: np.ndarray


def observe(F: SelectionMatrix, trajectory: Trajectory, t: int) -> np.ndarray:
    """Noiseless measurement F [x_t; u_t] of a trajectory at time t.

    Time T is rejected: the final state has no paired control.
    """
    T = trajectory.controls.shape[0]
    if not 0 <= t <= T - 1:
        raise ValueError(f"time index {t} outside 0..{T - 1}")
    z = np.concatenate([trajectory.states[t], trajectory.controls[t]])
    if F.matrix.shape[1] != z.size:
        raise ValueError(
            f"selection matrix has {F.matrix.shape[1]} columns, expected {z.size}"
        )
    return F.matrix @ z


def simulate_measurements(
    trajectory: Trajectory, F: SelectionMatrix, noise: NoiseModel
) -> list[MeasurementRecord]:
    """Noisy measurements y_t = F [x_t; u_t] + v_t for t = 0 .. T-1.

    Identical (trajectory, F, noise.R, noise.seed) produce bit-identical
    sequences.
    """
    if noise.q != F.q:
        raise ValueError(f"noise covariance is {noise.q}x{noise.q}, selection has q={F.q}")
    T = trajectory.controls.shape[0]
    return [
        MeasurementRecord(t=t, y=observe(F, trajectory, t) + noise.draw(t))
        for t in range(T)
    ]


def write_measurements_csv(path, records: Sequence[MeasurementRecord]) -> None:
    """CSV with header t, y_1, ..., y_q."""
    if not records:
        raise ValueError("no measurement records to write")
    q = records[0].y.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"y_{i + 1}" for i in range(q)])
        for rec in records:
            writer.writerow([rec.t] + [repr(float(v)) for v in rec.y])


def read_measurements_csv(path) -> list[MeasurementRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        out.append(MeasurementRecord(t=int(row[0]), y=np.array([float(v) for v in row[1:]])))
    return out
