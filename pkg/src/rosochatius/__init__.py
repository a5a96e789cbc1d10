"""Anisotropic harmonic oscillator, its reduction to a Rosochatius-type system, and checks of its integrals."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AxisSingularity,
    IntegralOverflow,
    NegativeK,
    NonIntegerMultiplier,
    NonPositiveDimension,
    NonPositiveOmega,
    ParamsError,
    SingularState,
    StepSizeUnderflow,
    UnknownIntegral,
    WrongSystemKind,
)
from .model import (  # noqa: E402
    ComplexPhase,
    FullState,
    ReducedState,
    SystemParams,
    to_complex,
    to_full,
    validate_params,
)
from .dynamics import Method, SystemKind, Trajectory, integrate, integrate_oracle, step  # noqa: E402
from .invariants import IntegralId, evaluate  # noqa: E402
