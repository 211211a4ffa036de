"""PD trajectory tracking around the planner's references.

Each tracked axis is a double integrator ``z' = A z + b q`` with
``A = [[0, 1], [0, 0]]`` and ``b = [0, 1]``. The law

    q = q_ref + kp * e_pos + kd * e_vel,    e = z_ref - z

gives error dynamics ``e' = (A - b k) e``, whose characteristic polynomial
is ``s**2 + kd*s + kp``.

Feedback allocation per step:

    steps 1, 3, 5: u2 tracks xi2; u1 = 0
    step 2:        u1 tracks xi3; u2 regulates xi2 at 1
    step 4:        u1 tracks xi1; u2 regulates xi2 at 0
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chained_form import ChainedInput, ChainedState
from .planner import MotionPlan, resolve_step, reference

A = np.array([[0.0, 1.0], [0.0, 0.0]])
B = np.array([[0.0], [1.0]])


@dataclass(frozen=True)
class PdGains:
    """Feedback gains ``k = [kp, kd]``.

    Any finite pair is representable so that unstable choices can be
    analysed; :attr:`is_hurwitz` tells whether the tracking error decays.
    """

    kp: float = 1.0
    kd: float = 1.0

    def __post_init__(self):
        for name in ("kp", "kd"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def is_hurwitz(self) -> bool:
        return is_hurwitz(self)

    def closed_loop_matrix(self) -> np.ndarray:
        return A - B @ np.array([[self.kp, self.kd]])


class AxisError(NamedTuple):
    e_pos: float
    e_vel: float


def pd_input(q_ref: float, err: AxisError, gains: PdGains) -> float:
    return q_ref + gains.kp * err.e_pos + gains.kd * err.e_vel


def closed_loop_eigen(gains: PdGains) -> tuple[complex, complex]:
    """Roots of ``s**2 + kd*s + kp``, ordered by ascending real part."""
    disc = cmath.sqrt(gains.kd * gains.kd - 4.0 * gains.kp)
    r1 = (-gains.kd - disc) / 2.0
    r2 = (-gains.kd + disc) / 2.0
    return (r1, r2) if (r1.real, r1.imag) <= (r2.real, r2.imag) else (r2, r1)


def is_hurwitz(gains: PdGains) -> bool:
    # Routh-Hurwitz for a monic quadratic: both remaining coefficients positive
    return gains.kp > 0 and gains.kd > 0


def axis_error(ref: ChainedState, state: ChainedState, axis: int) -> AxisError:
    return AxisError(ref.positions[axis] - state.positions[axis],
                     ref.velocities[axis] - state.velocities[axis])


def control_law(mp: MotionPlan, t: float, state: ChainedState, gains: PdGains,
                step: int | None = None) -> ChainedInput:
    """Feedforward plus PD feedback at time ``t``.

    ``step`` pins the active step; pass it when evaluating on a window
    boundary from inside a segmented integration.
    """
    sp = resolve_step(mp, t, step)
    ref, q_ref = reference(mp, t, sp.k)
    e2 = axis_error(ref, state, 1)
    if sp.channel == "u2":
        return ChainedInput(u1=0.0, u2=pd_input(q_ref.u2, e2, gains))
    # steps 2 and 4: shape the step's axis through u1, hold xi2 with u2
    # the xi3 view's true gain is xi2 (~1 here); feedback treats it as 1
    e_axis = axis_error(ref, state, sp.axis)
    return ChainedInput(u1=pd_input(q_ref.u1, e_axis, gains),
                        u2=pd_input(0.0, e2, gains))
