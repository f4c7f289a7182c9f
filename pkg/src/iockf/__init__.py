"""Recursive online inverse optimal control with Kalman filtering.

Infers unknown objective-function weights of a discrete-time optimal
control problem from sequentially arriving, noisy, possibly partial
measurements of optimal states and controls. The extended Kalman filter
linearizes the implicit parameter-to-trajectory map with Riccati-style
sensitivity recursions, needing only two trajectory-sized problems per
measurement; an unscented baseline and boundedness diagnostics round out
the toolkit.
"""

from . import benchmarks, diagnostics, experiments, filters, measurement, sensitivity, solver, system

__all__ = [
    "benchmarks",
    "diagnostics",
    "experiments",
    "filters",
    "measurement",
    "sensitivity",
    "solver",
    "system",
]

__version__ = "0.1.0"
