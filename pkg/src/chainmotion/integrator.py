"""Adaptive Dormand-Prince 5(4) initial-value-problem solver.

The solver advances with the fifth-order solution (local extrapolation) and
uses the embedded fourth-order solution only for the error estimate. A step
is accepted when, for every component ``i``,

    |err_i| <= max(rel_tol * max(|x_i|, |x_new_i|), abs_tol)

Accepted nodes are stored together with the derivative at each node, so
dense output can use cubic Hermite interpolation without extra evaluations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteState, OutOfRange, StepLimitExceeded

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass(frozen=True)
class OdeProblem:
    """Initial value problem ``x' = rhs(t, x)``, ``x(t0) = x0`` on ``[t0, tf]``."""

    rhs: Rhs
    t0: float
    tf: float
    x0: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        object.__setattr__(self, "x0", x0)
        if not self.tf > self.t0:
            raise ValueError(f"tf must exceed t0 (got t0={self.t0}, tf={self.tf})")
        if x0.size == 0:
            raise ValueError("x0 must be non-empty")

    @property
    def dimension(self) -> int:
        return self.x0.size


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and step-size limits.

    ``h_init`` and ``h_max`` default to fractions of the integration span
    (``span/100`` and ``span/10``) when left as ``None``.
    """

    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    h_init: float | None = None
    h_max: float | None = None
    max_steps: int = 100_000

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.h_init is not None and not self.h_init > 0:
            raise ValueError("h_init must be positive")
        if self.h_max is not None and not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if (self.h_init is not None and self.h_max is not None
                and self.h_max < self.h_init):
            raise ValueError("h_max must be >= h_init")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def step_bounds(self, span: float) -> tuple[float, float]:
        h_max = self.h_max if self.h_max is not None else span / 10
        h_init = self.h_init if self.h_init is not None else span / 100
        return min(h_init, h_max, span), min(h_max, span)


@dataclass(frozen=True)
class Trajectory:
    """Accepted solver nodes: ``times[k]``, ``states[k]`` and ``derivs[k]``."""

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    n_rejected: int = 0
    n_evals: int = field(default=0, compare=False)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def tf(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()


def _eval(rhs: Rhs, t: float, x: np.ndarray, n: int) -> np.ndarray:
    dx = np.asarray(rhs(t, x), dtype=float).reshape(-1)
    if dx.size != n:
        raise ValueError(f"rhs returned {dx.size} components, expected {n}")
    if not np.all(np.isfinite(dx)):
        raise NonFiniteState(f"non-finite derivative at t={t!r}")
    return dx


def integrate(problem: OdeProblem, config: SolverConfig | None = None) -> Trajectory:
    """Integrate ``problem`` from ``t0`` to exactly ``tf``.

    Raises
    ------
    StepLimitExceeded
        When ``config.max_steps`` accepted + rejected attempts are used up.
    NonFiniteState
        When the right-hand side or an intermediate state is not finite.
    """
    config = config or SolverConfig()
    rhs, n = problem.rhs, problem.dimension
    t0, tf = float(problem.t0), float(problem.tf)
    span = tf - t0
    h, h_max = config.step_bounds(span)
    rtol, atol = config.rel_tol, config.abs_tol

    t = t0
    x = problem.x0.copy()
    f = _eval(rhs, t, x, n)
    times, states, derivs = [t], [x.copy()], [f.copy()]
    K = np.empty((7, n))
    n_rejected = 0
    n_evals = 1
    attempts = 0
    rejected_last = False

    while t < tf:
        if attempts >= config.max_steps:
            raise StepLimitExceeded(
                f"max_steps={config.max_steps} reached at t={t!r} (tf={tf!r})")
        attempts += 1

        # clamp so the last step lands on tf exactly
        last = t + h >= tf or (tf - (t + h)) < 1e-12 * span
        if last:
            h = tf - t

        K[0] = f
        for s in range(1, 7):
            xs = x + h * (np.asarray(_A[s]) @ K[:s])
            K[s] = _eval(rhs, t + _C[s] * h, xs, n)
        n_evals += 6
        x_new = x + h * (_B5 @ K)
        if not np.all(np.isfinite(x_new)):
            raise NonFiniteState(f"non-finite state at t={t + h!r}")
        err_vec = h * (_E @ K)

        scale = np.maximum(rtol * np.maximum(np.abs(x), np.abs(x_new)), atol)
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0:
            t = tf if last else t + h
            x = x_new
            f = K[6].copy()  # FSAL: stage 7 is f(t+h, x_new)
            times.append(t)
            states.append(x.copy())
            derivs.append(f)
            factor = MAX_FACTOR if err == 0.0 else SAFETY * err ** -0.2
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            rejected_last = False
            h = min(h * factor, h_max)
        else:
            n_rejected += 1
            rejected_last = True
            factor = max(MIN_FACTOR, SAFETY * err ** -0.2)
            h = h * factor
            if t + h == t:
                raise StepLimitExceeded(f"step size underflow at t={t!r}")

    return Trajectory(np.array(times), np.array(states), np.array(derivs),
                      n_rejected=n_rejected, n_evals=n_evals)


def dense_sample(traj: Trajectory, t: float) -> np.ndarray:
    """Cubic Hermite interpolation of ``traj`` at time ``t``.

    Exact at stored nodes. Falls back to linear interpolation when the
    trajectory carries no derivative data.
    """
    times = traj.times
    if not times[0] <= t <= times[-1]:
        raise OutOfRange(f"t={t!r} outside [{times[0]!r}, {times[-1]!r}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(k, len(times) - 2)
    if k < 0:
        return traj.states[0].copy()
    t0, t1 = times[k], times[k + 1]
    if t == t0:
        return traj.states[k].copy()
    if t == t1:
        return traj.states[k + 1].copy()
    x0, x1 = traj.states[k], traj.states[k + 1]
    h = t1 - t0
    s = (t - t0) / h
    if traj.derivs is None or len(traj.derivs) != len(times):
        return (1 - s) * x0 + s * x1
    f0, f1 = traj.derivs[k], traj.derivs[k + 1]
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1
