"""Rest-to-rest planning and PD tracking for the second-order chained form."""
from .chained_form import ChainedInput, ChainedState
from .integrator import OdeProblem, SolverConfig, Trajectory, dense_sample, integrate
from .manipulator import ManipulatorParams, ManipulatorState
from .planner import BoundaryConditions, MotionPlan, plan
from .simulation import Scenario, SimResult, perturb, run, sweep, terminal_error
from .tracker import PdGains

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditions", "ChainedInput", "ChainedState", "ManipulatorParams",
    "ManipulatorState", "MotionPlan", "OdeProblem", "PdGains", "Scenario",
    "SimResult", "SolverConfig", "Trajectory", "dense_sample", "integrate",
    "perturb", "plan", "run", "sweep", "terminal_error",
]
