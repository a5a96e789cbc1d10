"""Hamiltonians, forces and time integration for the full and reduced systems.

Both Hamiltonians are kinetic plus potential, so the production integrators are
position-Verlet splittings (second order) and their Yoshida triple composition
(fourth order). An adaptive Dormand-Prince 5(4) integrator is kept as an
independent oracle.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import SingularState, StepSizeUnderflow
from .model import (
    FullState,
    ReducedState,
    SystemParams,
    check_full,
    check_reduced,
)

YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
YOSHIDA_W0 = 1.0 - 2.0 * YOSHIDA_W1

DEFAULT_DT_FACTOR = 1e-3


class SystemKind(str, enum.Enum):
    FULL = "full"
    REDUCED = "reduced"


class Method(str, enum.Enum):
    VERLET2 = "Verlet2"
    YOSHIDA4 = "Yoshida4"
    ORACLE_RK54 = "OracleRK54"


State = Union[FullState, ReducedState]


def default_dt(params: SystemParams) -> float:
    return DEFAULT_DT_FACTOR * params.base_period


# ---------------------------------------------------------------------------
# Hamiltonians in generic arithmetic (floats, arrays or duals)


def full_hamiltonian_qp(params: SystemParams, y, phat):
    w2 = params.omega ** 2
    total = 0.0
    for j in range(2 * params.N):
        nj = params.n[j // 2]
        total = total + 0.5 * phat[j] * phat[j] + 0.5 * w2 * nj * nj * y[j] * y[j]
    return total


def reduced_energy_qp(params: SystemParams, x, p, l: int):
    """Energy of plane ``l`` (0-based) of the reduced system."""
    n, k, w = params.n[l], params.k[l], params.omega
    e = 0.5 * p[l] * p[l] + 0.5 * (n * w) ** 2 * x[l] * x[l]
    if k != 0.0:
        e = e + 0.5 * k / (x[l] * x[l])
    return e


def reduced_hamiltonian_qp(params: SystemParams, x, p):
    total = 0.0
    for l in range(params.N):
        total = total + reduced_energy_qp(params, x, p, l)
    return total


# ---------------------------------------------------------------------------
# Public state-level API


def check_singular(params: SystemParams, x: np.ndarray, time=None) -> None:
    """Raise :class:`SingularState` if a coordinate with ``k != 0`` is within the exclusion radius."""
    bad = (np.abs(x) < params.exclusion_radius) & (params.k_arr != 0.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        time = None if time is None else float(time)
        where = "" if time is None else f" at t={time!r}"
        raise SingularState(f"x[{i + 1}]={x[i]!r} inside exclusion radius{where}", time=time, index=i)


def hamiltonian_full(params: SystemParams, s: FullState) -> float:
    check_full(params, s)
    a = params.n_coord * params.omega
    return float(0.5 * np.sum(s.phat ** 2) + 0.5 * np.sum((a * s.y) ** 2))


def hamiltonian_reduced(params: SystemParams, s: ReducedState) -> float:
    check_reduced(params, s)
    check_singular(params, s.x, s.t)
    return float(reduced_hamiltonian_qp(params, s.x, s.p))


def _full_accel(params: SystemParams):
    a2 = (params.n_coord * params.omega) ** 2

    def accel(y):
        return -a2 * y

    return accel


def _reduced_accel(params: SystemParams):
    a2 = (params.n_arr * params.omega) ** 2
    k = params.k_arr

    def accel(x):
        return k / x ** 3 - a2 * x

    return accel


def force_full(params: SystemParams, s: FullState) -> np.ndarray:
    check_full(params, s)
    return _full_accel(params)(s.y)


def force_reduced(params: SystemParams, s: ReducedState) -> np.ndarray:
    check_reduced(params, s)
    check_singular(params, s.x, s.t)
    return _reduced_accel(params)(s.x)


# ---------------------------------------------------------------------------
# Splitting integrators


def _kernels(params: SystemParams, kind: SystemKind):
    kind = SystemKind(kind)
    if kind is SystemKind.FULL:
        return _full_accel(params), None
    singular = params.k_arr != 0.0
    if not np.any(singular):
        return _reduced_accel(params), None

    def guard(q_new, q_old, t):
        t = float(t)
        # a sign flip means the step jumped across the 1/x^2 wall without sampling it
        crossed = singular & (np.sign(q_new) != np.sign(q_old))
        if np.any(crossed):
            i = int(np.flatnonzero(crossed)[0])
            raise SingularState(f"x[{i + 1}] crossed the singular axis in the step from t={t!r}",
                                time=t, index=i)
        check_singular(params, q_new, t)

    return _reduced_accel(params), guard


def acceleration(params: SystemParams, kind):
    """Vectorized ``dp/dt`` as a function of positions."""
    return _kernels(params, kind)[0]


def _verlet(q, p, h, accel, guard, t):
    q_mid = q + 0.5 * h * p
    if guard is not None:
        guard(q_mid, q, t)
    p = p + h * accel(q_mid)
    q_new = q_mid + 0.5 * h * p
    if guard is not None:
        guard(q_new, q_mid, t)
    return q_new, p


def _advance(q, p, dt, method: Method, accel, guard, t):
    if method is Method.VERLET2:
        return _verlet(q, p, dt, accel, guard, t)
    if method is Method.YOSHIDA4:
        q, p = _verlet(q, p, YOSHIDA_W1 * dt, accel, guard, t)
        q, p = _verlet(q, p, YOSHIDA_W0 * dt, accel, guard, t)
        return _verlet(q, p, YOSHIDA_W1 * dt, accel, guard, t)
    raise ValueError(f"{method.value} is not a fixed-step splitting method")


def _split(params, kind, s):
    kind = SystemKind(kind)
    if kind is SystemKind.FULL:
        if not isinstance(s, FullState):
            raise TypeError("full system needs a FullState")
        check_full(params, s)
        return np.array(s.y), np.array(s.phat)
    if not isinstance(s, ReducedState):
        raise TypeError("reduced system needs a ReducedState")
    check_reduced(params, s)
    check_singular(params, s.x, s.t)
    return np.array(s.x), np.array(s.p)


def make_state(kind, q, p, t) -> State:
    if SystemKind(kind) is SystemKind.FULL:
        return FullState(q, p, t)
    return ReducedState(q, p, t)


def step(params: SystemParams, kind, s: State, dt: float, method=Method.YOSHIDA4) -> State:
    """Advance ``s`` by one symplectic step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    method = Method(method)
    accel, guard = _kernels(params, kind)
    q, p = _split(params, kind, s)
    q, p = _advance(q, p, dt, method, accel, guard, s.t)
    return make_state(kind, q, p, s.t + dt)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered phase points; ``q`` and ``p`` have shape (len(t), D)."""

    kind: SystemKind
    method: Method
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    dt: Union[float, np.ndarray]

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> State:
        return make_state(self.kind, self.q[i], self.p[i], self.t[i])

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(len(self))]

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def truncated(self, stop: int) -> "Trajectory":
        dt = self.dt if np.isscalar(self.dt) else self.dt[: max(stop - 1, 0)]
        return Trajectory(self.kind, self.method, self.t[:stop], self.q[:stop], self.p[:stop], dt)

    def to_csv(self, path) -> None:
        write_csv(self, path)


def integrate(params: SystemParams, kind, s0: State, dt: float, t_end: float,
              method=Method.YOSHIDA4) -> Trajectory:
    """Fixed-step trajectory sampled every step from ``s0.t`` to within ``dt`` of ``t_end``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > s0.t:
        raise ValueError("t_end must be after the initial time")
    kind = SystemKind(kind)
    method = Method(method)
    accel, guard = _kernels(params, kind)
    q, p = _split(params, kind, s0)
    nsteps = max(1, int(math.ceil((t_end - s0.t) / dt - 1e-9)))
    t = s0.t + dt * np.arange(nsteps + 1)
    qs = np.empty((nsteps + 1, q.size))
    ps = np.empty_like(qs)
    qs[0], ps[0] = q, p
    for i in range(nsteps):
        q, p = _advance(q, p, dt, method, accel, guard, t[i])
        qs[i + 1], ps[i + 1] = q, p
    return Trajectory(kind, method, t, qs, ps, float(dt))


def integrate_oracle(params: SystemParams, kind, s0: State, t_end: float, tol: float = 1e-11) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) reference trajectory with rtol = atol = ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not t_end > s0.t:
        raise ValueError("t_end must be after the initial time")
    kind = SystemKind(kind)
    accel, guard = _kernels(params, kind)
    q0, p0 = _split(params, kind, s0)
    d = q0.size

    def rhs(t, u):
        q = u[:d]
        if guard is not None:
            check_singular(params, q, t)
        return np.concatenate([u[d:], accel(q)])

    try:
        sol = solve_ivp(rhs, (s0.t, t_end), np.concatenate([q0, p0]), method="RK45", rtol=tol, atol=tol)
    except SingularState as exc:
        # step-size control cannot resolve the wall; report it the way the solver would
        raise StepSizeUnderflow(f"oracle stalled at the singular axis near t={exc.time!r}",
                                time=exc.time) from exc
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else s0.t
        raise StepSizeUnderflow(f"oracle failed at t={t_fail}: {sol.message}", time=t_fail)
    u = sol.y.T
    return Trajectory(kind, Method.ORACLE_RK54, sol.t, u[:, :d].copy(), u[:, d:].copy(), np.diff(sol.t))


def csv_header(kind, dim: int) -> list:
    return ["t"] + [f"x{i}" for i in range(1, dim + 1)] + [f"p{i}" for i in range(1, dim + 1)]


def write_csv(traj: Trajectory, path) -> None:
    """Write ``t,x1..xD,p1..pD`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(traj.kind, traj.dim))
        for i in range(len(traj)):
            row = np.concatenate([[traj.t[i]], traj.q[i], traj.p[i]])
            w.writerow([f"{v:.16e}" for v in row])


def read_csv(path):
    """Load a trajectory CSV into ``(t, q, p)`` arrays."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = (data.shape[1] - 1) // 2
    return data[:, 0], data[:, 1:1 + d], data[:, 1 + d:]
