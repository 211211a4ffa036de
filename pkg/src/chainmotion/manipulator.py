"""Third link of a 3-joint manipulator with a passive last joint.

With ``(x, y)`` the center of percussion of the third link and ``theta``
its angle, the reduced dynamics are

    x'' = cos(theta) * alpha1
    y'' = sin(theta) * alpha1
    theta'' = alpha2

The coordinate change ``xi = [x - L_cop, tan(theta), y]`` together with

    alpha1 = u1 * sec(theta)
    alpha2 = u2 * cos(theta)**2 - 2 * dtheta**2 * tan(theta)

turns this into the second-order chained form. Both maps are singular at
``theta = +-pi/2``; everything here refuses to work within ``SINGULARITY_EPS``
of that.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .chained_form import ChainedInput, ChainedState
from .errors import NearSingularity

SINGULARITY_EPS = 1e-3
STATE_FIELDS = ("x", "y", "theta", "dx", "dy", "dtheta")


@dataclass(frozen=True)
class ManipulatorParams:
    m3: float = 0.6
    d3: float = 0.3
    I3: float = 4.5e-3

    def __post_init__(self):
        for name in ("m3", "d3", "I3"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def L_cop(self) -> float:
        """Distance from the passive joint to the center of percussion."""
        return (self.I3 + self.m3 * self.d3 ** 2) / (self.m3 * self.d3)

    def to_dict(self) -> dict:
        return {"m3": self.m3, "d3": self.d3, "I3": self.I3}


@dataclass(frozen=True)
class ManipulatorState:
    x: float
    y: float
    theta: float
    dx: float = 0.0
    dy: float = 0.0
    dtheta: float = 0.0

    def __post_init__(self):
        for name in STATE_FIELDS:
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, s) -> "ManipulatorState":
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != 6:
            raise ValueError(f"expected 6 components, got {s.size}")
        return cls(*s.tolist())

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self))


@dataclass(frozen=True)
class AccelInput:
    alpha1: float
    alpha2: float

    def to_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])


def check_theta(theta: float, eps: float = SINGULARITY_EPS) -> None:
    if not abs(theta) < math.pi / 2 - eps:
        raise NearSingularity(
            f"|theta|={abs(theta)!r} rad is within {eps} of the singularity at pi/2")


def rhs(s: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    th = s[2]
    return np.array([s[3], s[4], s[5],
                     math.cos(th) * alpha[0], math.sin(th) * alpha[0], alpha[1]])


def dynamics(chi: ManipulatorState, alpha: AccelInput) -> np.ndarray:
    return rhs(chi.to_array(), alpha.to_array())


def chained_array(s: np.ndarray, L_cop: float) -> np.ndarray:
    """Array form of :func:`to_chained`."""
    x, y, th, dx, dy, dth = s
    check_theta(th)
    c = math.cos(th)
    return np.array([x - L_cop, math.tan(th), y, dx, dth / (c * c), dy])


def native_array(xi: np.ndarray, L_cop: float) -> np.ndarray:
    """Array form of :func:`from_chained`."""
    th = math.atan(xi[1])
    c = math.cos(th)
    return np.array([xi[0] + L_cop, xi[2], th, xi[3], xi[5], xi[4] * c * c])


def to_chained(chi: ManipulatorState, params: ManipulatorParams) -> ChainedState:
    return ChainedState.from_array(chained_array(chi.to_array(), params.L_cop))


def from_chained(xi: ChainedState, params: ManipulatorParams) -> ManipulatorState:
    return ManipulatorState.from_array(native_array(xi.to_array(), params.L_cop))


def input_array(u: np.ndarray, theta: float, dtheta: float) -> np.ndarray:
    check_theta(theta)
    c = math.cos(theta)
    return np.array([u[0] / c, u[1] * c * c - 2.0 * dtheta * dtheta * math.tan(theta)])


def input_transform(u: ChainedInput, theta: float, dtheta: float) -> AccelInput:
    """Chained-form input to link accelerations."""
    return AccelInput(*input_array(u.to_array(), theta, dtheta).tolist())
