"""Exception types raised across the package."""


class ChainMotionError(Exception):
    """Base class for all package errors."""


class StepLimitExceeded(ChainMotionError):
    """The integrator hit ``max_steps`` before reaching the final time."""


class NonFiniteState(ChainMotionError):
    """The right-hand side produced NaN or Inf."""


class OutOfRange(ChainMotionError, ValueError):
    """A dense-output query fell outside the trajectory span."""


class NonRestBoundary(ChainMotionError, ValueError):
    """Boundary conditions carry nonzero velocity."""


class NonpositivePeriod(ChainMotionError, ValueError):
    pass


class OutOfWindow(ChainMotionError, ValueError):
    """Time lies outside the planned horizon ``[0, 5T]``."""


class NearSingularity(ChainMotionError, ValueError):
    """|theta| is too close to pi/2 for the chained-form transforms."""


class UnknownComponent(ChainMotionError, KeyError):
    pass
