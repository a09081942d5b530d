"""Exception hierarchy shared by the solver modules."""


class SonicFlowError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(SonicFlowError, ValueError):
    pass


class SpeedExceedsLimit(SonicFlowError, ValueError):
    """Flow speed at or beyond the limit speed, where c^2 <= 0."""


class SonicExceeded(SpeedExceedsLimit):
    """A discrete field has speed^2 >= q_max^2 at some node."""


class NoSubsonicRoot(SonicFlowError, ValueError):
    pass


class ToleranceNotReached(SonicFlowError, RuntimeError):
    pass


class HypothesisViolation(SonicFlowError, ValueError):
    """Nozzle profile violates the convexity/monotonicity hypotheses."""


class NonzeroC(SonicFlowError, ValueError):
    pass


class ConditionFailed(SonicFlowError, ValueError):
    """Boundary-point condition is not strictly positive."""


class RectangleVanished(SonicFlowError, RuntimeError):
    pass


class NotAnExtremum(SonicFlowError, ValueError):
    pass
