"""Multipolar coordinates, lift onto the momentum level set, and reduction checks.

Each coordinate plane ``(y_{2l-1}, y_{2l})`` gets polar coordinates: radius
``x_l``, angle ``phi_l``, radial momentum ``p_l`` and angular momentum
``ell_l``. Fixing ``ell_l = sqrt(k_l)`` and forgetting the angles turns the
2N-dimensional oscillator into the N-dimensional system with ``k_l / x_l^2``
terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Method, SystemKind, Trajectory, integrate
from .errors import AxisSingularity, NegativeK
from .invariants import IntegralId, evaluate_along
from .model import FullState, ReducedState, SystemParams, check_full, check_reduced

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class MultipolarCoords:
    x: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    ell: np.ndarray

    def __post_init__(self):
        for name in ("x", "p", "phi", "ell"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.x <= 0):
            raise AxisSingularity("multipolar radii must be positive")


def _polar_arrays(params: SystemParams, y: np.ndarray, phat: np.ndarray):
    """Vectorized polar split; ``y`` and ``phat`` have shape (..., 2N)."""
    y1, y2 = y[..., 0::2], y[..., 1::2]
    p1, p2 = phat[..., 0::2], phat[..., 1::2]
    x = np.hypot(y1, y2)
    bad = x <= params.exclusion_radius
    if np.any(bad):
        where = np.argwhere(bad)[0]
        plane = int(where[-1]) + 1
        tidx = int(where[0]) if bad.ndim > 1 else None
        raise AxisSingularity(f"plane {plane} radius inside exclusion radius", plane=plane, time_index=tidx)
    phi = np.mod(np.arctan2(y2, y1), TWO_PI)
    p = (y1 * p1 + y2 * p2) / x
    ell = y1 * p2 - y2 * p1
    return x, p, phi, ell


def to_multipolar(params: SystemParams, s: FullState) -> MultipolarCoords:
    check_full(params, s)
    return MultipolarCoords(*_polar_arrays(params, s.y, s.phat))


def _cartesian(x, p, phi, ell):
    c, s = np.cos(phi), np.sin(phi)
    y = np.empty(2 * x.size)
    phat = np.empty_like(y)
    y[0::2], y[1::2] = x * c, x * s
    phat[0::2] = p * c - ell * s / x
    phat[1::2] = p * s + ell * c / x
    return y, phat


def from_multipolar(params: SystemParams, m: MultipolarCoords, t: float = 0.0) -> FullState:
    if m.x.size != params.N:
        raise ValueError(f"expected {params.N} planes, got {m.x.size}")
    return FullState(*_cartesian(m.x, m.p, m.phi, m.ell), t)


def lift(params: SystemParams, s: ReducedState, angles=None) -> FullState:
    """Full state on the level set ``ell_l = sqrt(k_l)`` projecting to ``s``.

    A negative reduced coordinate (possible on ``k_l = 0`` planes) is placed on
    the opposite ray, which is the same Cartesian point.
    """
    check_reduced(params, s)
    k = params.k_arr
    if np.any(k < 0):
        raise NegativeK(int(np.flatnonzero(k < 0)[0]) + 1)
    bad = np.abs(s.x) <= params.exclusion_radius
    if np.any(bad):
        plane = int(np.flatnonzero(bad)[0]) + 1
        raise AxisSingularity(f"cannot lift: plane {plane} at the axis", plane=plane)
    angles = np.zeros(params.N) if angles is None else np.asarray(angles, dtype=float)
    return FullState(*_cartesian(s.x, s.p, angles, np.sqrt(k)), s.t)


def reduced_params_for(params: SystemParams, s: FullState) -> SystemParams:
    """Reduced-system parameters whose ``k_l`` are the squared plane angular momenta of ``s``."""
    ell = to_multipolar(params, s).ell
    return replace(params, k=tuple(ell ** 2))


def reduce_trajectory(params: SystemParams, traj: Trajectory) -> Trajectory:
    """Pointwise polar projection of a full trajectory, dropping the angles."""
    if SystemKind(traj.kind) is not SystemKind.FULL:
        raise ValueError("reduce_trajectory needs a full-system trajectory")
    x, p, _, _ = _polar_arrays(params, traj.q, traj.p)
    return Trajectory(SystemKind.REDUCED, traj.method, traj.t, x, p, traj.dt)


def _first_axis_crossing(params: SystemParams, red: Trajectory, full: Trajectory) -> int:
    """Number of leading samples before any zero-k plane reaches the axis."""
    n = len(red)
    zero_k = params.k_arr == 0.0
    if not np.any(zero_k):
        return n
    xr = red.q[:, zero_k]
    rf = np.hypot(full.q[:, 0::2], full.q[:, 1::2])[:, zero_k]
    # a sign change of the reduced coordinate means the line orbit passed through the origin
    bad = (xr <= params.exclusion_radius) | (rf <= params.exclusion_radius)
    bad |= np.sign(xr) != np.sign(xr[0])
    rows = np.flatnonzero(np.any(bad, axis=1))
    return int(rows[0]) if rows.size else n


@dataclass(frozen=True)
class ConsistencyReport:
    max_dev: float
    t_of_max: float
    dt: float
    method: str
    t_stop: float
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "max_dev": self.max_dev,
            "t_of_max": self.t_of_max,
            "dt": self.dt,
            "method": self.method,
            "t_stop": self.t_stop,
            "truncated": self.truncated,
        }


def consistency_check(params: SystemParams, s0: ReducedState, t_end: float, dt: float,
                      method=Method.YOSHIDA4) -> ConsistencyReport:
    """Compare reduced dynamics against the projected full dynamics from ``lift(s0)``.

    Both legs run with the same fixed-step method. The comparison stops at the
    first axis crossing of a ``k = 0`` plane, where the polar chart breaks down.
    """
    if np.any(np.asarray(s0.x) <= 0):
        raise AxisSingularity("consistency check needs positive initial radii")
    method = Method(method)
    red = integrate(params, SystemKind.REDUCED, s0, dt, t_end, method)
    full = integrate(params, SystemKind.FULL, lift(params, s0), dt, t_end, method)
    stop = _first_axis_crossing(params, red, full)
    if stop < 2:
        raise AxisSingularity("orbit reaches the axis before the first step", time_index=stop)
    proj = reduce_trajectory(params, full.truncated(stop))
    red = red.truncated(stop)
    dev = np.maximum(np.max(np.abs(proj.q - red.q), axis=1), np.max(np.abs(proj.p - red.p), axis=1))
    i = int(np.argmax(dev))
    return ConsistencyReport(float(dev[i]), float(red.t[i]), float(dt), method.value,
                             float(red.t[-1]), stop < len(full))


def inherited_integrals(params: SystemParams, full_traj: Trajectory, normalized: bool = True) -> dict:
    """Max mismatch between reduced integrals on the projected trajectory and full ones.

    The reduced system is taken with ``k_l = ell_l^2`` read off the first
    state, so this works for any off-axis full trajectory. Mismatches are
    relative to the largest modulus the full integral takes.
    """
    rp = reduced_params_for(params, full_traj.state(0))
    red = reduce_trajectory(params, full_traj)
    pairs = [(IntegralId("EReduced", (l,)), IntegralId("EFull", (l,))) for l in range(1, params.N + 1)]
    pairs += [(IntegralId("QReduced", (l,), normalized), IntegralId("QFull", (l,), normalized))
              for l in range(1, params.N)]
    pairs += [(IntegralId("IMod", (l,)), IntegralId("IMod", (l,))) for l in range(1, params.N + 1)]
    out = {}
    for a, b in pairs:
        va = evaluate_along(rp, red, a)
        vb = evaluate_along(params, full_traj, b)
        out[f"{a}~{b}"] = float(np.max(np.abs(va - vb)) / max(np.max(np.abs(vb)), 1e-300))
    return out
