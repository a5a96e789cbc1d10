"""Poisson brackets with exact first derivatives from dual numbers.

A phase function is anything :func:`phase_function` accepts: an
:class:`~rosochatius.invariants.IntegralId`, its string form, or a plain
callable ``fn(q, p)`` written with ordinary arithmetic. Functions of the
complex variables take a single list ``z`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dual import Dual, tangent, value
from .dynamics import SystemKind, check_singular
from .invariants import IntegralId, integral_function, z_from_qp, z_integral_function
from .model import (
    ComplexPhase,
    FullState,
    ReducedState,
    SystemParams,
    sample_full_state,
    sample_reduced_state,
)

BRACKET_THRESHOLD = 1e-9
GRADIENT_EPS = 1e-30


def phase_function(params: SystemParams, f) -> Callable:
    if isinstance(f, str):
        f = IntegralId.parse(f)
    if isinstance(f, IntegralId):
        return integral_function(params, f)
    if callable(f):
        return f
    raise TypeError(f"not a phase function: {f!r}")


def z_function(params: SystemParams, f) -> Callable:
    if isinstance(f, str):
        f = IntegralId.parse(f)
    if isinstance(f, IntegralId):
        return z_integral_function(params, f)
    if callable(f):
        return f
    raise TypeError(f"not a function of z: {f!r}")


def pullback(params: SystemParams, fz: Callable) -> Callable:
    """Express a function of ``z`` as a function of canonical ``(y, phat)``."""
    return lambda q, p: fz(z_from_qp(params, q, p))


def gradient(fn: Callable, q, p):
    """Value and gradient ``(df/dq, df/dp)`` of ``fn`` at ``(q, p)``, one dual pass per coordinate."""
    q = [float(v) for v in q]
    p = [float(v) for v in p]
    d = len(q)
    grad = np.zeros(2 * d, dtype=complex)
    val = None
    for i in range(2 * d):
        if i < d:
            out = fn([Dual(v, 1.0) if j == i else v for j, v in enumerate(q)], p)
        else:
            out = fn(q, [Dual(v, 1.0) if j == i - d else v for j, v in enumerate(p)])
        grad[i] = tangent(out)
        if val is None:
            val = value(out)
    return val, grad[:d], grad[d:]


def _bracket_from_grads(gf, gg):
    _, fq, fp = gf
    _, gq, gp = gg
    return complex(np.sum(fq * gp - fp * gq))


def _qp(params: SystemParams, s):
    if isinstance(s, ReducedState):
        check_singular(params, s.x, s.t)
    return s.q, s.p


def bracket_canonical(params: SystemParams, f, g, s):
    """``sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i)`` at state ``s``."""
    q, p = _qp(params, s)
    val = _bracket_from_grads(gradient(phase_function(params, f), q, p),
                              gradient(phase_function(params, g), q, p))
    return val.real if val.imag == 0 else val


def wirtinger(fz: Callable, z):
    """``(df/dz_j, df/dconj(z_j))`` for every ``j``, from dual passes along Re and Im parts."""
    z = [complex(v) for v in z]
    dz = np.zeros(len(z), dtype=complex)
    dzbar = np.zeros(len(z), dtype=complex)
    for j in range(len(z)):
        du = tangent(fz([Dual(v, 1.0) if i == j else v for i, v in enumerate(z)]))
        dv = tangent(fz([Dual(v, 1j) if i == j else v for i, v in enumerate(z)]))
        dz[j] = 0.5 * (du - 1j * dv)
        dzbar[j] = 0.5 * (du + 1j * dv)
    return dz, dzbar


def bracket_z(params: SystemParams, f, g, z: ComplexPhase) -> complex:
    """Bracket in the complex variables, weighted by ``-2 i omega n_k`` per plane."""
    zz = np.asarray(z.z if isinstance(z, ComplexPhase) else z)
    fz, fzb = wirtinger(z_function(params, f), zz)
    gz, gzb = wirtinger(z_function(params, g), zz)
    return complex(-2j * params.omega * np.sum(params.n_coord * (fz * gzb - fzb * gz)))


def rotation_derivative(params: SystemParams, f, z: ComplexPhase, plane: int) -> complex:
    """Derivative of ``f`` along the rotation of plane ``plane`` (1-based) acting on ``z`` and its conjugate.

    Functions invariant under that rotation give zero.
    """
    zz = np.asarray(z.z if isinstance(z, ComplexPhase) else z)
    dz, dzb = wirtinger(z_function(params, f), zz)
    a, b = 2 * plane - 2, 2 * plane - 1
    return complex(zz[b] * dz[a] - zz[a] * dz[b] + np.conj(zz[b]) * dzb[a] - np.conj(zz[a]) * dzb[b])


def scaled_residual(params: SystemParams, f, g, s) -> float:
    """``|{f, g}| / (|grad f| |grad g| + eps)`` at ``s``."""
    q, p = _qp(params, s)
    gf = gradient(phase_function(params, f), q, p)
    gg = gradient(phase_function(params, g), q, p)
    return _scaled(gf, gg)


def _scaled(gf, gg) -> float:
    nf = np.sqrt(np.sum(np.abs(gf[1]) ** 2 + np.abs(gf[2]) ** 2))
    ng = np.sqrt(np.sum(np.abs(gg[1]) ** 2 + np.abs(gg[2]) ** 2))
    return float(abs(_bracket_from_grads(gf, gg)) / (nf * ng + GRADIENT_EPS))


@dataclass(frozen=True)
class PairResult:
    pair: tuple
    max_scaled_residual: float
    passed: bool
    seed: int
    samples: int

    def to_dict(self) -> dict:
        return {
            "pair": [str(self.pair[0]), str(self.pair[1])],
            "max_scaled_residual": self.max_scaled_residual,
            "pass": self.passed,
            "seed": self.seed,
            "samples": self.samples,
        }


def sample_state(params: SystemParams, kind, rng: np.random.Generator):
    if SystemKind(kind) is SystemKind.FULL:
        return sample_full_state(params, rng)
    return sample_reduced_state(params, rng)


def commutation_report(params: SystemParams, kind, pairs, samples: int = 100, seed: int = 0,
                       threshold: float = BRACKET_THRESHOLD, eval_params: SystemParams = None) -> list:
    """Max scaled bracket residual of each pair over ``samples`` seeded random states.

    ``eval_params`` lets the integrals be evaluated with different parameters
    than the sampled system, which is only useful to check that a corrupted
    integral is caught.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pairs = [tuple(IntegralId.parse(a) if isinstance(a, str) else a for a in pr) for pr in pairs]
    ep = eval_params or params
    fns = {}
    for pr in pairs:
        for iid in pr:
            if iid not in fns:
                fns[iid] = phase_function(ep, iid)
    worst = [0.0] * len(pairs)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        s = sample_state(params, kind, rng)
        grads = {iid: gradient(fn, s.q, s.p) for iid, fn in fns.items()}
        for i, (a, b) in enumerate(pairs):
            worst[i] = max(worst[i], _scaled(grads[a], grads[b]))
    return [PairResult(pr, w, bool(w < threshold), seed, samples) for pr, w in zip(pairs, worst)]
