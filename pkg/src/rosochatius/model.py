"""Parameter and phase-state value types.

The reduced system lives in N dimensions with coordinates ``x`` and momenta
``p``. The full oscillator lives in 2N dimensions; coordinates ``2j-1`` and
``2j`` (1-based) form plane ``j`` and share the frequency multiplier ``n_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from typing import Mapping

import numpy as np

from .errors import (
    NonIntegerMultiplier,
    NonPositiveDimension,
    NonPositiveOmega,
    ParamsError,
)

DEFAULT_EXCLUSION_RADIUS = 1e-8

#: Default box for random reduced states: positions stay clear of the 1/x^2 wall.
SAMPLER_X_RANGE = (0.3, 2.0)
SAMPLER_P_RANGE = (-2.0, 2.0)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _as_multiplier(v) -> int:
    if isinstance(v, bool):
        raise NonIntegerMultiplier(f"multiplier must be an integer, got {v!r}")
    if isinstance(v, Integral):
        iv = int(v)
    elif isinstance(v, Real) and math.isfinite(v) and float(v).is_integer():
        iv = int(v)
    else:
        raise NonIntegerMultiplier(f"multiplier must be an integer, got {v!r}")
    if iv < 1:
        raise NonIntegerMultiplier(f"multipliers must be >= 1, got {iv}")
    return iv


@dataclass(frozen=True)
class SystemParams:
    """Dimension, integer frequency multipliers, centrifugal strengths and base frequency."""

    N: int
    n: tuple
    k: tuple
    omega: float = 1.0
    exclusion_radius: float = field(default=DEFAULT_EXCLUSION_RADIUS, compare=False)

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, Integral) or self.N < 1:
            raise NonPositiveDimension(f"N must be a positive integer, got {self.N!r}")
        n = tuple(_as_multiplier(v) for v in self.n)
        k = tuple(float(v) for v in self.k)
        if len(n) != self.N or len(k) != self.N:
            raise ParamsError(f"expected {self.N} multipliers and {self.N} k values, got {len(n)} and {len(k)}")
        if not all(math.isfinite(v) for v in k):
            raise ParamsError("k values must be finite")
        omega = float(self.omega)
        if not (math.isfinite(omega) and omega > 0):
            raise NonPositiveOmega(f"omega must be positive, got {self.omega!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "omega", omega)

    @property
    def n_arr(self) -> np.ndarray:
        return np.asarray(self.n, dtype=float)

    @property
    def k_arr(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float)

    @property
    def n_coord(self) -> np.ndarray:
        """Multiplier of each of the 2N full-system coordinates."""
        return np.repeat(self.n_arr, 2)

    @property
    def base_period(self) -> float:
        return 2 * math.pi / self.omega

    def to_dict(self) -> dict:
        return {"N": self.N, "n": list(self.n), "k": list(self.k), "omega": self.omega}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SystemParams":
        try:
            return cls(N=d["N"], n=tuple(d["n"]), k=tuple(d["k"]), omega=d["omega"])
        except KeyError as exc:
            raise ParamsError(f"missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ParamsError(str(exc)) from None


def validate_params(raw) -> SystemParams:
    """Return a validated :class:`SystemParams` from a params object or a JSON-style mapping.

    Idempotent: validating an already valid value returns an equal value.
    """
    if isinstance(raw, SystemParams):
        return SystemParams(raw.N, raw.n, raw.k, raw.omega, raw.exclusion_radius)
    if isinstance(raw, Mapping):
        return SystemParams.from_dict(raw)
    raise ParamsError(f"cannot build SystemParams from {type(raw).__name__}")


@dataclass(frozen=True)
class FullState:
    y: np.ndarray
    phat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        y = _frozen_array(self.y)
        phat = _frozen_array(self.phat)
        if y.ndim != 1 or y.shape != phat.shape or y.size % 2:
            raise ValueError("y and phat must be equal-length vectors of even length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "phat", phat)
        object.__setattr__(self, "t", float(self.t))

    @property
    def q(self):
        return self.y

    @property
    def p(self):
        return self.phat


@dataclass(frozen=True)
class ReducedState:
    x: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = _frozen_array(self.x)
        p = _frozen_array(self.p)
        if x.ndim != 1 or x.shape != p.shape:
            raise ValueError("x and p must be equal-length vectors")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", float(self.t))

    @property
    def q(self):
        return self.x


@dataclass(frozen=True)
class ComplexPhase:
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen_array(self.z, dtype=complex))


def check_full(params: SystemParams, s: FullState) -> None:
    if s.y.size != 2 * params.N:
        raise ValueError(f"full state has {s.y.size} coordinates, params need {2 * params.N}")


def check_reduced(params: SystemParams, s: ReducedState) -> None:
    if s.x.size != params.N:
        raise ValueError(f"reduced state has {s.x.size} coordinates, params need {params.N}")


def to_complex(params: SystemParams, s: FullState) -> ComplexPhase:
    check_full(params, s)
    return ComplexPhase(s.phat - 1j * params.n_coord * params.omega * s.y)


def to_full(params: SystemParams, z: ComplexPhase, t: float = 0.0) -> FullState:
    zz = np.asarray(z.z)
    if zz.size != 2 * params.N:
        raise ValueError(f"expected {2 * params.N} complex coordinates, got {zz.size}")
    return FullState(-zz.imag / (params.n_coord * params.omega), zz.real, t)


def sample_reduced_state(params: SystemParams, rng: np.random.Generator,
                         x_range=SAMPLER_X_RANGE, p_range=SAMPLER_P_RANGE) -> ReducedState:
    x = rng.uniform(*x_range, size=params.N)
    p = rng.uniform(*p_range, size=params.N)
    return ReducedState(x, p)


def sample_full_state(params: SystemParams, rng: np.random.Generator,
                      y_range=(-2.0, 2.0), p_range=SAMPLER_P_RANGE) -> FullState:
    y = rng.uniform(*y_range, size=2 * params.N)
    p = rng.uniform(*p_range, size=2 * params.N)
    return FullState(y, p)
