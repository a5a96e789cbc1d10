"""Exception types raised across the package."""


class ParamsError(ValueError):
    """Invalid system parameters."""


class NonPositiveDimension(ParamsError):
    pass


class NonIntegerMultiplier(ParamsError):
    pass


class NonPositiveOmega(ParamsError):
    pass


class SingularState(ArithmeticError):
    """A coordinate with a nonzero centrifugal term entered the exclusion radius."""

    def __init__(self, message, time=None, index=None):
        super().__init__(message)
        self.time = time
        self.index = index


class StepSizeUnderflow(RuntimeError):
    """The adaptive oracle could not meet its tolerance without collapsing the step."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegralOverflow(OverflowError):
    pass


class NegativeK(ValueError):
    def __init__(self, index):
        super().__init__(f"lift requires k >= 0, got negative k at plane {index}")
        self.index = index


class AxisSingularity(ValueError):
    """A plane radius fell inside the exclusion radius, where polar angles are undefined."""

    def __init__(self, message, plane=None, time_index=None):
        super().__init__(message)
        self.plane = plane
        self.time_index = time_index


class UnknownIntegral(ValueError):
    pass


class WrongSystemKind(ValueError):
    pass
