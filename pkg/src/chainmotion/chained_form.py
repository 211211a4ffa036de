"""Second-order chained form and its subsystem decomposition.

    xi1'' = u1
    xi2'' = u2
    xi3'' = xi2 * u1

State vectors are ordered positions first, then velocities:
``[xi1, xi2, xi3, dxi1, dxi2, dxi3]``.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import NamedTuple

import numpy as np

AXES = ("xi1", "xi2", "xi3")
STATE_FIELDS = ("xi1", "xi2", "xi3", "dxi1", "dxi2", "dxi3")


@dataclass(frozen=True)
class ChainedState:
    xi1: float
    xi2: float
    xi3: float
    dxi1: float = 0.0
    dxi2: float = 0.0
    dxi3: float = 0.0

    def __post_init__(self):
        for name in STATE_FIELDS:
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, x) -> "ChainedState":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != 6:
            raise ValueError(f"expected 6 components, got {x.size}")
        return cls(*x.tolist())

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self))

    @property
    def positions(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, self.xi3])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([self.dxi1, self.dxi2, self.dxi3])

    @property
    def at_rest(self) -> bool:
        return self.dxi1 == 0.0 and self.dxi2 == 0.0 and self.dxi3 == 0.0


@dataclass(frozen=True)
class ChainedInput:
    u1: float = 0.0
    u2: float = 0.0

    def __post_init__(self):
        for name in ("u1", "u2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    def to_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2])


class SubsystemView(NamedTuple):
    """One axis seen as a double integrator ``pos'' = input_gain * channel``."""

    axis: str
    position: float
    velocity: float
    input_gain: float
    channel: str


def rhs(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Array form of :func:`dynamics` for use inside integrator callbacks."""
    return np.array([x[3], x[4], x[5], u[0], u[1], x[1] * u[0]])


def dynamics(state: ChainedState, inp: ChainedInput) -> np.ndarray:
    """Time derivative of the stacked state under input ``inp``."""
    return rhs(state.to_array(), inp.to_array())


def decompose(state: ChainedState) -> tuple[SubsystemView, SubsystemView, SubsystemView]:
    """Split the state into three double-integrator views.

    The xi1 and xi2 views have unit gain on u1 and u2. The xi3 view is driven
    by u1 through a gain equal to the current value of xi2, so it copies the
    xi1 view when xi2 == 1 and is autonomous when xi2 == 0.
    """
    return (
        SubsystemView("xi1", state.xi1, state.dxi1, 1.0, "u1"),
        SubsystemView("xi2", state.xi2, state.dxi2, 1.0, "u2"),
        SubsystemView("xi3", state.xi3, state.dxi3, state.xi2, "u1"),
    )


def reassemble(views) -> ChainedState:
    by_axis = {v.axis: v for v in views}
    return ChainedState(*(by_axis[a].position for a in AXES),
                        *(by_axis[a].velocity for a in AXES))


def view_derivatives(views, inp: ChainedInput) -> np.ndarray:
    """Stacked derivative assembled from the double-integrator views alone."""
    channels = {"u1": inp.u1, "u2": inp.u2}
    by_axis = {v.axis: v for v in views}
    pos_rates = [by_axis[a].velocity for a in AXES]
    accels = [by_axis[a].input_gain * channels[by_axis[a].channel] for a in AXES]
    return np.array(pos_rates + accels)
