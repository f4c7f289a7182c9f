"""Experiment runner over the benchmark problems.

Runs a filter against simulated noisy measurements of a ground-truth
trajectory, writes CSV artifacts (estimates, measurements, per-step
timing), a boundedness report, and the resolved configuration next to
them. Timing comparisons run both filters on identical measurement
streams. All artifact files are written atomically (temp-then-rename) and
identical configurations reproduce byte-identical estimates and
measurements files; timing files are exempt (wall-clock).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import benchmarks as bench
from . import diagnostics, filters, measurement, solver

__all__ = [
    "ExperimentConfig",
    "RunArtifacts",
    "run_experiment",
    "compare_timing",
    "plot_run",
    "ESTIMATES_HEADER",
    "TIMING_HEADER",
]

FILTERS = ("ekf", "ukf")
MODES = ("full", "states", "controls", "custom")

ESTIMATES_HEADER = "t,theta_{i},p_diag_{i},err_norm"
TIMING_HEADER = "t,filter,step_seconds,ocp_solves"


@dataclass
class ExperimentConfig:
    """Resolved settings of one experiment.

    prior_mean None means all-ones; the prior covariance is
    prior_cov_scale * I and the inflation is q_scale * I. noise_scale
    multiplies the benchmark's measurement noise variance. custom_selection
    supplies the selection matrix rows for mode='custom'.
    """

    benchmark: str = "pendulum"
    filter: str = "ekf"
    mode: str = "full"
    seed: int = 0
    trials: int = 1
    horizon: Optional[int] = None
    prior_mean: Optional[list] = None
    prior_cov_scale: float = 1.0
    q_scale: float = 1e-8
    noise_scale: float = 1.0
    custom_selection: Optional[list] = None
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.mode == "custom" and self.custom_selection is None:
            raise ValueError("custom mode requires custom_selection rows")
        if self.prior_cov_scale <= 0:
            raise ValueError("prior_cov_scale must be > 0")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be > 0")
        try:
            bench.get(self.benchmark)  # name must resolve
        except KeyError as exc:
            raise ValueError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunArtifacts:
    """Paths of everything a run wrote."""

    root: Path
    config: Path
    trial_dirs: list
    estimates: list
    measurements: list
    timing: list
    diagnostics_txt: list
    diagnostics_csv: list


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _resolve_model(config: ExperimentConfig):
    spec = bench.get(config.benchmark)
    model = spec.model
    if config.horizon is not None:
        model = dataclasses.replace(model, horizon=int(config.horizon))
    return spec, model


def _selection(config: ExperimentConfig, model) -> measurement.SelectionMatrix:
    custom = (
        np.asarray(config.custom_selection, dtype=float)
        if config.custom_selection is not None
        else None
    )
    return measurement.selection_matrix(
        config.mode, model.state_dim, model.control_dim, custom=custom
    )


def _filter_options(config: ExperimentConfig, model) -> filters.EkfOptions:
    N = model.param_dim
    mean = None if config.prior_mean is None else np.asarray(config.prior_mean, float)
    return filters.EkfOptions(
        prior_mean=mean,
        prior_covariance=config.prior_cov_scale * np.eye(N),
        process_noise=config.q_scale * np.eye(N),
    )


def _estimates_csv(history: filters.RunHistory, truth: np.ndarray) -> str:
    N = truth.size
    header = (
        ["t"]
        + [f"theta_{i + 1}" for i in range(N)]
        + [f"p_diag_{i + 1}" for i in range(N)]
        + ["err_norm"]
    )
    lines = [",".join(header)]
    for b in history.beliefs:
        row = [str(b.time)]
        row += [repr(float(v)) for v in b.mean]
        row += [repr(float(v)) for v in np.diag(b.covariance)]
        row.append(repr(float(np.linalg.norm(b.mean - truth))))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _timing_csv(histories: dict) -> str:
    lines = [TIMING_HEADER]
    for name, history in histories.items():
        for r in history.reports:
            lines.append(f"{r.t},{name},{repr(r.wall_time)},{r.ocp_solve_count}")
    return "\n".join(lines) + "\n"


def _run_one_trial(config, spec, model, F, R, trial_seed):
    truth = spec.ground_truth
    gt_traj = solver.solve(model, truth)
    noise = measurement.NoiseModel(R=R, seed=trial_seed)
    records = measurement.simulate_measurements(gt_traj, F, noise)
    options = _filter_options(config, model)
    run = filters.run_ekf if config.filter == "ekf" else filters.run_ukf
    history = run(model, records[1:], F, R, options)
    return records, history


def run_experiment(config: ExperimentConfig) -> RunArtifacts:
    """Run the configured experiment and write all artifacts.

    Per trial i the measurement seed is config.seed + i. Artifacts live in
    per-trial subdirectories under config.output_dir with the resolved
    configuration at the root.
    """
    spec, model = _resolve_model(config)
    F = _selection(config, model)
    R = config.noise_scale * spec.noise_cov(F.q)
    truth = spec.ground_truth

    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    config_path = root / "config.json"
    _atomic_write_text(config_path, json.dumps(config.to_dict(), indent=2) + "\n")

    artifacts = RunArtifacts(
        root=root,
        config=config_path,
        trial_dirs=[],
        estimates=[],
        measurements=[],
        timing=[],
        diagnostics_txt=[],
        diagnostics_csv=[],
    )
    for trial in range(config.trials):
        trial_dir = root / f"trial{trial:03d}"
        trial_dir.mkdir(parents=True, exist_ok=True)
        records, history = _run_one_trial(config, spec, model, F, R, config.seed + trial)

        meas_path = trial_dir / "measurements.csv"
        tmp = meas_path.with_name(meas_path.name + ".tmp")
        measurement.write_measurements_csv(tmp, records)
        os.replace(tmp, meas_path)

        est_path = trial_dir / "estimates.csv"
        _atomic_write_text(est_path, _estimates_csv(history, truth))

        timing_path = trial_dir / "timing.csv"
        _atomic_write_text(timing_path, _timing_csv({config.filter: history}))

        report = diagnostics.check_bounds(history)
        diag_txt = trial_dir / "diagnostics.txt"
        _atomic_write_text(diag_txt, report.to_text() + "\n")
        diag_csv = trial_dir / "diagnostics.csv"
        _atomic_write_text(
            diag_csv, diagnostics.BOUNDS_CSV_HEADER + "\n" + report.csv_row() + "\n"
        )

        artifacts.trial_dirs.append(trial_dir)
        artifacts.estimates.append(est_path)
        artifacts.measurements.append(meas_path)
        artifacts.timing.append(timing_path)
        artifacts.diagnostics_txt.append(diag_txt)
        artifacts.diagnostics_csv.append(diag_csv)
    return artifacts


def compare_timing(config: ExperimentConfig) -> dict:
    """Run EKF and UKF on identical measurement streams and compare step times.

    Writes a combined timing CSV and a JSON summary under
    config.output_dir. The first (warm-up) step is excluded from the mean
    step times. Raises if the instrumented solve counts deviate from the
    expected 2 per EKF step and 2N+1 per UKF step.
    """
    spec, model = _resolve_model(config)
    F = _selection(config, model)
    R = config.noise_scale * spec.noise_cov(F.q)
    gt_traj = solver.solve(model, spec.ground_truth)
    noise = measurement.NoiseModel(R=R, seed=config.seed)
    records = measurement.simulate_measurements(gt_traj, F, noise)
    options = _filter_options(config, model)

    histories = {
        "ekf": filters.run_ekf(model, records[1:], F, R, options),
        "ukf": filters.run_ukf(model, records[1:], F, R, options),
    }
    expected = {"ekf": 2, "ukf": 2 * model.param_dim + 1}
    for name, history in histories.items():
        counts = {r.ocp_solve_count for r in history.reports}
        if counts != {expected[name]}:
            raise AssertionError(
                f"{name} solve counts {counts} != expected {expected[name]}"
            )

    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(
        root / "config.json", json.dumps(config.to_dict(), indent=2) + "\n"
    )
    _atomic_write_text(root / "timing.csv", _timing_csv(histories))

    means = {
        name: float(np.mean([r.wall_time for r in history.reports[1:]]))
        for name, history in histories.items()
    }
    summary = {
        "benchmark": config.benchmark,
        "seed": config.seed,
        "steps": len(histories["ekf"].reports),
        "ekf_mean_step_seconds": means["ekf"],
        "ukf_mean_step_seconds": means["ukf"],
        "ukf_over_ekf_ratio": means["ukf"] / means["ekf"],
        "ekf_ocp_solves_per_step": expected["ekf"],
        "ukf_ocp_solves_per_step": expected["ukf"],
    }
    _atomic_write_text(root / "timing_summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def _read_csv_columns(path: Path) -> dict:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path} contains no data rows")
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            cols[h].append(v)
    return cols


def plot_run(run_dir) -> list:
    """Render static SVG plots for a run directory.

    Estimate trajectories get one plot per trial with dashed ground-truth
    lines; a timing comparison chart is added when the directory holds a
    combined timing CSV. Raises FileNotFoundError / ValueError on missing
    or empty inputs.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    root = Path(run_dir)
    config_path = root / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"no config.json in {root}")
    config = ExperimentConfig.from_dict(json.loads(config_path.read_text()))
    truth = bench.get(config.benchmark).ground_truth
    written = []

    for est_path in sorted(root.glob("trial*/estimates.csv")):
        cols = _read_csv_columns(est_path)
        t = np.array([int(v) for v in cols["t"]])
        fig, ax = plt.subplots(figsize=(6, 4))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i in range(truth.size):
            vals = np.array([float(v) for v in cols[f"theta_{i + 1}"]])
            c = colors[i % len(colors)]
            ax.plot(t, vals, color=c, label=f"estimate {i + 1}")
            ax.axhline(truth[i], color=c, linestyle="--", linewidth=1.0)
        ax.set_xlabel("step")
        ax.set_ylabel("parameter value")
        ax.set_title(f"{config.benchmark} ({config.filter}, {config.mode})")
        ax.legend(loc="best", fontsize=8)
        out = est_path.parent / "estimates.svg"
        fig.tight_layout()
        fig.savefig(out)
        plt.close(fig)
        written.append(out)

    timing_path = root / "timing.csv"
    if timing_path.exists():
        cols = _read_csv_columns(timing_path)
        fig, ax = plt.subplots(figsize=(6, 4))
        names = sorted(set(cols["filter"]))
        for name in names:
            rows = [
                (int(t), float(s))
                for t, f, s in zip(cols["t"], cols["filter"], cols["step_seconds"])
                if f == name
            ]
            rows.sort()
            ax.plot([r[0] for r in rows], [r[1] for r in rows], label=name)
        ax.set_xlabel("step")
        ax.set_ylabel("seconds")
        ax.set_yscale("log")
        ax.set_title(f"per-step wall time ({config.benchmark})")
        ax.legend()
        out = root / "timing.svg"
        fig.tight_layout()
        fig.savefig(out)
        plt.close(fig)
        written.append(out)

    if not written:
        raise FileNotFoundError(f"nothing to plot under {root}")
    return written
