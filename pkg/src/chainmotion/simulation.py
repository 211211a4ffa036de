"""Closed-loop scenario runner.

The horizon ``[0, 5T]`` is integrated as five separate initial value
problems, one per planner step, each restarted from the exact terminal
state of the previous one. Control is evaluated continuously inside each
window. For the manipulator the plant is integrated in its native
coordinates; the control law runs on the transformed chained state and
is mapped back to link accelerations at every evaluation.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import chained_form, manipulator
from .chained_form import ChainedState
from .errors import ChainMotionError, UnknownComponent
from .integrator import OdeProblem, SolverConfig, dense_sample, integrate
from .manipulator import ManipulatorParams
from .planner import BoundaryConditions, MotionPlan, plan, reference
from .tracker import PdGains, control_law

PLANTS = ("chained", "manipulator")
SAMPLES_PER_STEP = 200

CHAINED_COLUMNS = ["t", "xi1", "xi2", "xi3", "dxi1", "dxi2", "dxi3",
                   "xi1_ref", "xi2_ref", "xi3_ref", "u1", "u2"]
MANIPULATOR_COLUMNS = ["x", "y", "theta", "alpha1", "alpha2"]


def _as_state6(v) -> tuple[float, ...]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 3:
        arr = np.concatenate([arr, np.zeros(3)])
    if arr.size != 6:
        raise ValueError(f"expected 3 positions or a 6-vector, got {arr.size} values")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state contains non-finite values")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class Scenario:
    """A rest-to-rest experiment, stated in the plant's native coordinates.

    ``x0`` and ``target`` accept three positions (rest implied) or a full
    6-vector. ``perturbation`` scales one component of the true initial
    state by ``1 + fraction``; the plan is always built from ``x0``.
    """

    plant: str
    x0: tuple[float, ...]
    target: tuple[float, ...]
    T: float = 1.0
    gains: PdGains = field(default_factory=PdGains)
    params: ManipulatorParams | None = None
    perturbation: tuple[str, float] | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.plant not in PLANTS:
            raise ValueError(f"plant must be one of {PLANTS}, got {self.plant!r}")
        object.__setattr__(self, "x0", _as_state6(self.x0))
        object.__setattr__(self, "target", _as_state6(self.target))
        if self.plant == "manipulator" and self.params is None:
            object.__setattr__(self, "params", ManipulatorParams())
        if self.plant == "chained" and self.params is not None:
            raise ValueError("params only apply to the manipulator plant")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive and finite, got {self.T!r}")
        if not self.gains.is_hurwitz:
            raise ValueError(f"gains {self.gains} do not give Hurwitz error dynamics")
        if self.perturbation is not None:
            name, frac = self.perturbation
            if name not in self.state_names:
                raise UnknownComponent(name)
            if not math.isfinite(frac):
                raise ValueError("perturbation fraction must be finite")

    @property
    def state_names(self) -> tuple[str, ...]:
        if self.plant == "chained":
            return chained_form.STATE_FIELDS
        return manipulator.STATE_FIELDS

    def to_chained(self, native) -> np.ndarray:
        native = np.asarray(native, dtype=float)
        if self.plant == "chained":
            return native.copy()
        return manipulator.chained_array(native, self.params.L_cop)

    def initial_state(self) -> np.ndarray:
        """True native initial state, perturbation applied."""
        s = np.array(self.x0)
        if self.perturbation is not None:
            name, frac = self.perturbation
            i = self.state_names.index(name)
            s[i] = s[i] * (1.0 + frac)
        return s

    def make_plan(self) -> MotionPlan:
        bc = BoundaryConditions(
            ChainedState.from_array(self.to_chained(self.x0)),
            ChainedState.from_array(self.to_chained(self.target)),
        )
        return plan(bc, self.T)

    def to_dict(self) -> dict:
        return {
            "plant": self.plant,
            "x0": list(self.x0),
            "target": list(self.target),
            "T": self.T,
            "gains": {"kp": self.gains.kp, "kd": self.gains.kd},
            "params": self.params.to_dict() if self.params else None,
            "perturbation": (None if self.perturbation is None else
                             {"component": self.perturbation[0],
                              "fraction": self.perturbation[1]}),
            "solver": {
                "rel_tol": self.solver.rel_tol,
                "abs_tol": self.solver.abs_tol,
                "h_init": self.solver.h_init,
                "h_max": self.solver.h_max,
                "max_steps": self.solver.max_steps,
            },
        }


def perturb(scenario: Scenario, component: str, fraction: float) -> Scenario:
    """Scale one component of the true initial state by ``1 + fraction``."""
    if component not in scenario.state_names:
        raise UnknownComponent(
            f"{component!r} is not a {scenario.plant} state component "
            f"(expected one of {', '.join(scenario.state_names)})")
    if fraction == 0:
        return scenario
    return replace(scenario, perturbation=(component, float(fraction)))


class TerminalError(NamedTuple):
    chained_pos: np.ndarray
    chained_vel: np.ndarray
    native_pos: np.ndarray | None
    native_vel: np.ndarray | None


@dataclass(frozen=True)
class SimResult:
    """Sampled closed-loop run.

    Arrays are indexed by sample; ``chi`` and ``alpha`` are ``None`` for the
    chained plant.
    """

    scenario: Scenario
    plan: MotionPlan
    times: np.ndarray
    xi: np.ndarray
    xi_ref: np.ndarray
    u: np.ndarray
    chi: np.ndarray | None
    alpha: np.ndarray | None
    boundary_states: np.ndarray  # native state at t = 0, T, ..., 5T
    n_steps: int
    n_rejected: int
    n_evals: int

    @property
    def target_xi(self) -> np.ndarray:
        return self.scenario.to_chained(self.scenario.target)

    @property
    def terminal_error_pos(self) -> np.ndarray:
        return self.xi[-1, :3] - self.target_xi[:3]

    @property
    def terminal_error_vel(self) -> np.ndarray:
        return self.xi[-1, 3:] - self.target_xi[3:]

    @property
    def native_terminal_error(self) -> np.ndarray | None:
        if self.chi is None:
            return None
        return self.chi[-1] - np.array(self.scenario.target)

    def sample_index(self, t: float) -> int:
        """Index of the last sample at or before ``t``."""
        return max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)

    def tracking_error(self, t: float) -> np.ndarray:
        """``xi_ref - xi`` at the last sample at or before ``t``."""
        k = self.sample_index(t)
        return self.xi_ref[k] - self.xi[k]

    def columns(self) -> list[str]:
        cols = list(CHAINED_COLUMNS)
        if self.chi is not None:
            cols += MANIPULATOR_COLUMNS
        return cols

    def rows(self):
        for k, t in enumerate(self.times):
            row = [t, *self.xi[k], *self.xi_ref[k, :3], *self.u[k]]
            if self.chi is not None:
                row += [*self.chi[k, :3], *self.alpha[k]]
            yield [float(v) for v in row]


def terminal_error(result: SimResult, target=None) -> TerminalError:
    """Last sample minus target, in chained and (if any) native coordinates.

    ``target`` is given in native coordinates and defaults to the
    scenario's target.
    """
    sc = result.scenario
    native_target = np.array(_as_state6(sc.target if target is None else target))
    xi_target = sc.to_chained(native_target)
    d_xi = result.xi[-1] - xi_target
    if result.chi is None:
        return TerminalError(d_xi[:3], d_xi[3:], None, None)
    d_chi = result.chi[-1] - native_target
    return TerminalError(d_xi[:3], d_xi[3:], d_chi[:3], d_chi[3:])


def _control(sc: Scenario, mp: MotionPlan, t: float, xi: np.ndarray, k: int,
             open_loop: bool) -> np.ndarray:
    if open_loop:
        return reference(mp, t, k)[1].to_array()
    return control_law(mp, t, ChainedState.from_array(xi), sc.gains, step=k).to_array()


def _make_rhs(sc: Scenario, mp: MotionPlan, k: int, open_loop: bool):
    if sc.plant == "chained":
        def f(t, x):
            return chained_form.rhs(x, _control(sc, mp, t, x, k, open_loop))
        return f

    L = sc.params.L_cop

    def f(t, s):
        xi = manipulator.chained_array(s, L)
        u = _control(sc, mp, t, xi, k, open_loop)
        return manipulator.rhs(s, manipulator.input_array(u, s[2], s[5]))
    return f


def _window_times(accepted: np.ndarray, lo: float, hi: float) -> np.ndarray:
    grid = np.linspace(lo, hi, SAMPLES_PER_STEP + 1)
    ts = np.union1d(grid, accepted)
    tol = 1e-12 * (hi - lo)
    keep = np.concatenate([[True], np.diff(ts) > tol])
    ts = ts[keep]
    ts[-1] = hi
    return ts


def run(scenario: Scenario, open_loop: bool = False) -> SimResult:
    """Simulate ``scenario`` over the five planner steps.

    With ``open_loop`` the plant receives only the planned sinusoids.
    Integrator errors and ``NearSingularity`` propagate to the caller.
    """
    sc = scenario
    mp = sc.make_plan()
    state = sc.initial_state()
    if sc.plant == "manipulator":
        manipulator.check_theta(state[2])

    times, xis, refs, us, chis, alphas = [], [], [], [], [], []
    boundary = [state.copy()]
    n_steps = n_rejected = n_evals = 0

    for sp in mp.steps:
        k = sp.k
        lo, hi = sp.window
        traj = integrate(OdeProblem(_make_rhs(sc, mp, k, open_loop), lo, hi, state),
                         sc.solver)
        n_steps += traj.n_steps
        n_rejected += traj.n_rejected
        n_evals += traj.n_evals

        ts = _window_times(traj.times, lo, hi)
        if k < len(mp.steps):
            ts = ts[:-1]  # boundary sample belongs to the next window
        for t in ts:
            s = dense_sample(traj, t)
            xi = sc.to_chained(s)
            u = _control(sc, mp, t, xi, k, open_loop)
            times.append(t)
            xis.append(xi)
            refs.append(reference(mp, t, k)[0].to_array())
            us.append(u)
            if sc.plant == "manipulator":
                chis.append(s)
                alphas.append(manipulator.input_array(u, s[2], s[5]))

        state = traj.final_state
        boundary.append(state.copy())

    is_manip = sc.plant == "manipulator"
    return SimResult(
        scenario=sc,
        plan=mp,
        times=np.array(times),
        xi=np.array(xis),
        xi_ref=np.array(refs),
        u=np.array(us),
        chi=np.array(chis) if is_manip else None,
        alpha=np.array(alphas) if is_manip else None,
        boundary_states=np.array(boundary),
        n_steps=n_steps,
        n_rejected=n_rejected,
        n_evals=n_evals,
    )


def write_csv(result: SimResult, fh) -> None:
    """One row per sample, header first, shortest round-trip float text."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(result.columns())
    for row in result.rows():
        w.writerow([repr(v) for v in row])


def csv_text(result: SimResult) -> str:
    buf = io.StringIO()
    write_csv(result, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    result: SimResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def _run_row(args) -> SweepRow:
    sc, frac = args
    try:
        return SweepRow(frac, run(sc))
    except ChainMotionError as exc:
        return SweepRow(frac, None, f"{type(exc).__name__}: {exc}")


def sweep(scenario: Scenario, component: str, levels, jobs: int = 1) -> list[SweepRow]:
    """Baseline plus one run per signed level, in the order given.

    Failing rows carry the error text instead of a result.
    """
    fractions = [0.0, *(float(v) for v in levels)]
    base = replace(scenario, perturbation=None)
    tasks = [(perturb(base, component, f), f) for f in fractions]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_row, tasks))
    return [_run_row(t) for t in tasks]
