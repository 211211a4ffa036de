"""Five-step sinusoidal rest-to-rest planner for the chained form.

Each step lasts one period ``T`` and drives one axis with
``q(t) = a_k * omega**2 * sin(omega * t)`` (absolute time, ``omega = 2*pi/T``).
Starting from rest, one step moves the driven axis by ``2*pi*a_k`` and ends
at rest again.

    step 1: xi2 -> 1          (u2)
    step 2: xi3 -> xi3*       (u1; xi1 moves by the same amount since xi2 == 1)
    step 3: xi2 -> 0          (u2)
    step 4: xi1 -> xi1*       (u1; xi3 is frozen since xi2 == 0)
    step 5: xi2 -> xi2*       (u2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chained_form import ChainedInput, ChainedState
from .errors import NonpositivePeriod, NonRestBoundary, OutOfWindow

TWO_PI = 2.0 * math.pi
N_STEPS = 5

# (axis index, input channel) per step; axis 0 -> xi1, 1 -> xi2, 2 -> xi3
_SCHEDULE = ((1, "u2"), (2, "u1"), (1, "u2"), (0, "u1"), (1, "u2"))


@dataclass(frozen=True)
class BoundaryConditions:
    xi0: ChainedState
    xi_star: ChainedState

    def __post_init__(self):
        for name in ("xi0", "xi_star"):
            if not getattr(self, name).at_rest:
                raise NonRestBoundary(f"{name} has nonzero velocity")


@dataclass(frozen=True)
class StepPlan:
    k: int
    axis: int
    channel: str
    amplitude: float
    window: tuple[float, float]

    @property
    def axis_name(self) -> str:
        return f"xi{self.axis + 1}"

    @property
    def coupled_axes(self) -> tuple[int, ...]:
        """Axes moved by this step's input (xi1 rides along xi3 in step 2)."""
        return (2, 0) if self.k == 2 else (self.axis,)


@dataclass(frozen=True)
class MotionPlan:
    T: float
    omega: float
    steps: tuple[StepPlan, ...]
    waypoints: tuple[ChainedState, ...]

    @property
    def amplitudes(self) -> list[float]:
        return [s.amplitude for s in self.steps]

    @property
    def horizon(self) -> float:
        return self.steps[-1].window[1]

    def step_at(self, t: float) -> StepPlan:
        """Step whose window contains ``t``; boundaries belong to the later step."""
        if not 0.0 <= t <= self.horizon:
            raise OutOfWindow(f"t={t!r} outside [0, {self.horizon!r}]")
        k = min(int(t // self.T), N_STEPS - 1)
        return self.steps[k]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "omega": self.omega,
            "amplitudes": self.amplitudes,
            "steps": [
                {"k": s.k, "axis": s.axis_name, "channel": s.channel,
                 "amplitude": s.amplitude, "window": list(s.window)}
                for s in self.steps
            ],
            "waypoints": [w.to_array().tolist() for w in self.waypoints],
        }


def plan(bc: BoundaryConditions, T: float) -> MotionPlan:
    """Closed-form amplitudes and nominal rest waypoints for the five steps."""
    if not (math.isfinite(T) and T > 0):
        raise NonpositivePeriod(f"period must be positive and finite, got {T!r}")
    x0, xs = bc.xi0, bc.xi_star

    a2 = (xs.xi3 - x0.xi3) / TWO_PI
    xi1_after_2 = x0.xi1 + TWO_PI * a2
    amps = (
        (1.0 - x0.xi2) / TWO_PI,
        a2,
        -1.0 / TWO_PI,
        (xs.xi1 - xi1_after_2) / TWO_PI,
        xs.xi2 / TWO_PI,
    )
    # waypoints are pinned to their nominal values rather than accumulated
    waypoints = (
        ChainedState(x0.xi1, x0.xi2, x0.xi3),
        ChainedState(x0.xi1, 1.0, x0.xi3),
        ChainedState(xi1_after_2, 1.0, xs.xi3),
        ChainedState(xi1_after_2, 0.0, xs.xi3),
        ChainedState(xs.xi1, 0.0, xs.xi3),
        ChainedState(xs.xi1, xs.xi2, xs.xi3),
    )
    steps = tuple(
        StepPlan(k=i + 1, axis=axis, channel=ch, amplitude=amps[i],
                 window=(i * T, (i + 1) * T))
        for i, (axis, ch) in enumerate(_SCHEDULE)
    )
    return MotionPlan(T=float(T), omega=TWO_PI / T, steps=steps, waypoints=waypoints)


def resolve_step(mp: MotionPlan, t: float, step: int | None) -> StepPlan:
    if step is None:
        return mp.step_at(t)
    sp = mp.steps[step - 1]
    lo, hi = sp.window
    slack = 1e-12 * mp.T
    if not lo - slack <= t <= hi + slack:
        raise OutOfWindow(f"t={t!r} outside step {step} window {sp.window}")
    return sp


def reference(mp: MotionPlan, t: float, step: int | None = None
              ) -> tuple[ChainedState, ChainedInput]:
    """Reference state and per-channel reference input at time ``t``.

    ``step`` pins the step (1..5) explicitly, which matters at a shared
    boundary ``t == kT`` where the allocation of the feedback differs.
    """
    sp = resolve_step(mp, t, step)
    start = mp.waypoints[sp.k - 1]
    pos = start.positions
    vel = start.velocities
    a, w = sp.amplitude, mp.omega
    tau = t - sp.window[0]
    swt, cwt = math.sin(w * t), math.cos(w * t)
    for i in sp.coupled_axes:
        pos[i] = pos[i] + vel[i] * tau - a * swt + a * w * tau
        vel[i] = vel[i] - a * w * cwt + a * w
    q = a * w * w * swt
    q_ref = ChainedInput(u1=q) if sp.channel == "u1" else ChainedInput(u2=q)
    return ChainedState(*pos, *vel), q_ref


def feedforward_input(mp: MotionPlan, t: float, step: int | None = None) -> ChainedInput:
    """Open-loop input: the step's sinusoid on its channel, zero elsewhere."""
    return reference(mp, t, step)[1]


def waypoint_positions(mp: MotionPlan) -> np.ndarray:
    return np.array([w.positions for w in mp.waypoints])
