"""Built-in experiment definitions and the reference numbers they are judged by."""
from __future__ import annotations

import math
from dataclasses import replace

from .integrator import SolverConfig
from .manipulator import ManipulatorParams
from .simulation import Scenario
from .tracker import PdGains

REFERENCE_SOLVER = SolverConfig(rel_tol=1e-3)
REFERENCE_GAINS = PdGains(kp=1.0, kd=1.0)
REFERENCE_PARAMS = ManipulatorParams(m3=0.6, d3=0.3, I3=4.5e-3)

CHAINED = Scenario(
    plant="chained",
    x0=(3.0, 0.5, 1.0),
    target=(1.0, 1.0, 0.0),
    T=1.0,
    gains=REFERENCE_GAINS,
    solver=REFERENCE_SOLVER,
)
CHAINED_AMPLITUDES = (
    1 / (4 * math.pi), -1 / (2 * math.pi), -1 / (2 * math.pi),
    -1 / (2 * math.pi), 1 / (2 * math.pi),
)

MANIPULATOR = Scenario(
    plant="manipulator",
    x0=(3.33, 1.0, 0.46),
    target=(1.0, 0.0, 0.0),
    T=1.0,
    gains=REFERENCE_GAINS,
    params=REFERENCE_PARAMS,
    solver=REFERENCE_SOLVER,
)
# chained-coordinate boundary values as printed (rounded) for the task above
MANIPULATOR_XI0_ROUNDED = (3.0, 0.5, 1.0)
MANIPULATOR_TARGET_ROUNDED = (0.67, 0.0, 0.0)

# second manipulator task, used for the initial-error table
MANIPULATOR_TABLE = replace(MANIPULATOR, target=(1.33, 0.0, 0.78))
TABLE_COMPONENT = "theta"
TABLE_LEVELS = (0.01, -0.01, 0.10, -0.10, 0.30, -0.30)

# reference terminal errors chi(5T) - chi* in (m, m, rad)
TABLE_TERMINAL_ERRORS = {
    0.0: (4.5e-8, 4.4e-7, 4.9e-9),
    0.01: (2.9e-3, -6.9e-4, -8.5e-4),
    -0.01: (-2.9e-3, 7.4e-4, 8.5e-4),
    0.10: (3.0e-2, -4.8e-3, -8.8e-3),
    -0.10: (-2.9e-2, 9.9e-3, 8.3e-3),
    0.30: (9.1e-2, 3.3e-3, -2.8e-2),
    -0.30: (-8.5e-2, 4.3e-2, 2.3e-2),
}

# acceptance thresholds
CHAINED_TOL = 1e-6
MANIPULATOR_TOL = 1e-4
TABLE_BASELINE_TOL = 1e-5
TABLE_FACTOR = 3.0
AMPLITUDE_TOL = 1e-14


def with_rel_tol(sc: Scenario, rel_tol: float | None) -> Scenario:
    if rel_tol is None:
        return sc
    return replace(sc, solver=replace(sc.solver, rel_tol=rel_tol))
