"""Integrals of motion of the full oscillator and of the reduced system.

Every integral is available in two forms: a state-level function with the
usual guards, and a generic ``fn(q, p)`` built by :func:`integral_function`
that accepts floats, ``(D, T)`` arrays (a whole trajectory at once) or
:class:`~rosochatius.dual.Dual` coordinates for exact gradients.

Indices follow the physics convention and are 1-based: coordinates run over
``1..2N``, planes over ``1..N``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dual import Dual, ipow
from .dynamics import SystemKind, check_singular, reduced_energy_qp
from .errors import IntegralOverflow, UnknownIntegral, WrongSystemKind
from .model import (
    ComplexPhase,
    FullState,
    ReducedState,
    SystemParams,
    check_full,
    check_reduced,
    to_complex,
)

# binary exponent above which powers switch to log-magnitude/phase evaluation
LOG_FALLBACK_EXP2 = 600
DRIFT_EPS_ABS = 1e-30

_MAX_LOG = math.log(np.finfo(float).max)


# ---------------------------------------------------------------------------
# Powers


def power_product(factors):
    """Product of ``base ** exponent`` over ``factors``, guarding against overflow.

    Small magnitudes are handled by repeated squaring. If any factor's
    magnitude exceeds 2**600 the product is rebuilt from summed log-magnitudes
    and phases, and :class:`IntegralOverflow` is raised if even that does not fit.
    """
    if any(isinstance(b, Dual) for b, _ in factors):
        out = 1.0
        for b, e in factors:
            out = out * ipow(b, e)
        return out
    logmag = 0.0
    big = False
    with np.errstate(divide="ignore"):
        for b, e in factors:
            lm = e * np.log(np.abs(b))
            logmag = logmag + lm
            big = big or bool(np.any(np.abs(lm) > LOG_FALLBACK_EXP2 * math.log(2)))
    if not big:
        out = 1.0
        for b, e in factors:
            out = out * ipow(b, e)
        return out
    if np.any(logmag > _MAX_LOG):
        raise IntegralOverflow("integral magnitude exceeds double range; use the normalized form")
    phase = sum(e * np.angle(b) for b, e in factors)
    return np.exp(logmag) * np.exp(1j * phase)


def log_polar_product(factors):
    """``(log|prod|, arg prod)`` of ``base ** exponent`` without forming the product."""
    logmag = sum(e * np.log(np.abs(b)) for b, e in factors)
    phase = sum(e * np.angle(b) for b, e in factors)
    return logmag, np.angle(np.exp(1j * phase))


# ---------------------------------------------------------------------------
# Generic building blocks


def coord_multiplier(params: SystemParams, j: int) -> int:
    """Multiplier of 0-based full coordinate ``j``."""
    return params.n[j // 2]


def z_from_qp(params: SystemParams, y, phat) -> list:
    w = params.omega
    return [phat[j] - (1j * coord_multiplier(params, j) * w) * y[j] for j in range(2 * params.N)]


def _xi(z, plane: int):
    a, b = z[2 * plane], z[2 * plane + 1]
    return a * a + b * b


def _eta(z, plane: int):
    a, b = z[2 * plane], z[2 * plane + 1]
    return (a * a.conjugate() + b * b.conjugate()).real


def _q_full(params, z, l, normalized):
    last = params.N - 1
    xl, xn = _xi(z, l), _xi(z, last).conjugate()
    if normalized:
        xl = xl / _eta(z, l)
        xn = xn / _eta(z, last)
    return power_product([(xl, params.n[last]), (xn, params.n[l])])


def reduced_factor(params: SystemParams, x, p, l: int):
    """Reduced image of ``xi`` for plane ``l`` (0-based): ``p^2 + k/x^2 - a^2 x^2 - 2i a p x``."""
    a = params.n[l] * params.omega
    f = p[l] * p[l] - a * a * x[l] * x[l] - (2j * a) * p[l] * x[l]
    if params.k[l] != 0.0:
        f = f + params.k[l] / (x[l] * x[l])
    return f


def _q_reduced(params, x, p, l, normalized):
    last = params.N - 1
    fl = reduced_factor(params, x, p, l)
    fn = reduced_factor(params, x, p, last).conjugate()
    if normalized:
        fl = fl / (2 * reduced_energy_qp(params, x, p, l))
        fn = fn / (2 * reduced_energy_qp(params, x, p, last))
    return power_product([(fl, params.n[last]), (fn, params.n[l])])


# ---------------------------------------------------------------------------
# Integral identifiers


@dataclass(frozen=True)
class _TagInfo:
    arity: int
    kinds: tuple
    index_range: str  # "coord", "plane" or "ratio"


_FULL = (SystemKind.FULL,)
_RED = (SystemKind.REDUCED,)
_BOTH = (SystemKind.FULL, SystemKind.REDUCED)

TAGS = {
    "C": _TagInfo(2, _FULL, "coord"),
    "L": _TagInfo(2, _FULL, "coord"),
    "T": _TagInfo(2, _FULL, "coord"),
    "Xi": _TagInfo(1, _FULL, "plane"),
    "XiBar": _TagInfo(1, _FULL, "plane"),
    "Eta": _TagInfo(1, _FULL, "plane"),
    "EFull": _TagInfo(1, _FULL, "plane"),
    "EReduced": _TagInfo(1, _RED, "plane"),
    "QFull": _TagInfo(1, _FULL, "ratio"),
    "QBarFull": _TagInfo(1, _FULL, "ratio"),
    "QReduced": _TagInfo(1, _RED, "ratio"),
    "QBarReduced": _TagInfo(1, _RED, "ratio"),
    "R": _TagInfo(1, _RED, "ratio"),
    "IMod": _TagInfo(1, _BOTH, "plane"),
    "HFull": _TagInfo(0, _FULL, "plane"),
    "HReduced": _TagInfo(0, _RED, "plane"),
    # a bare position coordinate: a deliberately non-conserved probe
    "Coord": _TagInfo(1, _BOTH, "coord"),
}

_NORMALIZABLE = {"QFull", "QBarFull", "QReduced", "QBarReduced", "R"}
_ID_RE = re.compile(r"^\s*(\w+)\s*\(([\d,\s]*)\)\s*(\*?)\s*$")


@dataclass(frozen=True)
class IntegralId:
    """Names one integral: a tag, its 1-based indices and, for Q/R, the normalized flag.

    The string form is ``Tag(i,j)``; a trailing ``*`` selects the normalized form,
    e.g. ``R(1)*``. Plane indices are used throughout, so ``Xi(k)`` is the
    invariant built from coordinates ``2k-1`` and ``2k``.
    """

    tag: str
    idx: tuple = ()
    normalized: bool = False

    def __post_init__(self):
        if self.tag not in TAGS:
            raise UnknownIntegral(f"unknown integral tag {self.tag!r}")
        idx = tuple(int(i) for i in self.idx)
        if len(idx) != TAGS[self.tag].arity:
            raise UnknownIntegral(f"{self.tag} takes {TAGS[self.tag].arity} indices, got {len(idx)}")
        if self.normalized and self.tag not in _NORMALIZABLE:
            raise UnknownIntegral(f"{self.tag} has no normalized form")
        object.__setattr__(self, "idx", idx)

    def __str__(self):
        body = ",".join(str(i) for i in self.idx)
        if self.tag in ("HFull", "HReduced"):
            return self.tag if not self.normalized else self.tag + "*"
        return f"{self.tag}({body})" + ("*" if self.normalized else "")

    @classmethod
    def parse(cls, text: str) -> "IntegralId":
        if text.strip() in ("HFull", "HReduced"):
            return cls(text.strip())
        m = _ID_RE.match(text)
        if not m:
            raise UnknownIntegral(f"cannot parse integral id {text!r}")
        idx = tuple(int(v) for v in m.group(2).split(",") if v.strip())
        return cls(m.group(1), idx, bool(m.group(3)))

    @property
    def kinds(self) -> tuple:
        return TAGS[self.tag].kinds

    def validate(self, params: SystemParams) -> None:
        rng = TAGS[self.tag].index_range
        hi = {"coord": 2 * params.N, "plane": params.N, "ratio": params.N - 1}[rng]
        for i in self.idx:
            if not 1 <= i <= hi:
                raise UnknownIntegral(f"{self}: index {i} outside 1..{hi} for N={params.N}")
        if self.tag in ("L",) and self.idx[0] == self.idx[1]:
            raise UnknownIntegral("L(i,k) needs i != k")


def reduced_integral_set(params: SystemParams, normalized: bool = True) -> list:
    """The 2N-1 reduced integrals ``E_1..E_N, R_1..R_{N-1}``."""
    ids = [IntegralId("EReduced", (l,)) for l in range(1, params.N + 1)]
    ids += [IntegralId("R", (l,), normalized) for l in range(1, params.N)]
    return ids


def is_conserved(params: SystemParams, iid: IntegralId) -> bool:
    """Whether the integral is expected to be constant along the flow."""
    if iid.tag == "Coord":
        return False
    if iid.tag in ("L", "T"):
        i, k = iid.idx
        return params.n[(i - 1) // 2] == params.n[(k - 1) // 2]
    return True


def integral_function(params: SystemParams, iid: IntegralId) -> Callable:
    """Return a generic ``fn(q, p)`` evaluating ``iid``.

    ``q`` and ``p`` are indexable by coordinate; for the full system they are
    the Cartesian ``y`` and ``phat``, for the reduced system ``x`` and ``p``.
    """
    iid.validate(params)
    tag, idx, norm = iid.tag, iid.idx, iid.normalized
    w = params.omega

    if tag == "Coord":
        i = idx[0] - 1
        return lambda q, p: q[i]
    if tag == "L":
        i, k = idx[0] - 1, idx[1] - 1
        return lambda q, p: q[i] * p[k] - q[k] * p[i]
    if tag == "T":
        i, k = idx[0] - 1, idx[1] - 1
        c = coord_multiplier(params, i) * coord_multiplier(params, k) * w * w
        return lambda q, p: p[i] * p[k] + c * q[i] * q[k]
    if tag == "HFull":
        return lambda q, p: 0.5 * sum(zz * zz.conjugate() for zz in z_from_qp(params, q, p)).real
    if tag == "HReduced":
        return lambda q, p: sum(reduced_energy_qp(params, q, p, l) for l in range(params.N))
    if tag == "EReduced":
        l = idx[0] - 1
        return lambda q, p: reduced_energy_qp(params, q, p, l)
    if tag in ("QReduced", "QBarReduced", "R"):
        l = idx[0] - 1
        if tag == "QReduced":
            return lambda q, p: _q_reduced(params, q, p, l, norm)
        if tag == "QBarReduced":
            return lambda q, p: _q_reduced(params, q, p, l, norm).conjugate()
        return lambda q, p: _q_reduced(params, q, p, l, norm).real
    if tag == "IMod":
        l = idx[0] - 1

        def imod(q, p):
            if len(q) == 2 * params.N:
                xi = _xi(z_from_qp(params, q, p), l)
            else:
                xi = reduced_factor(params, q, p, l)
            return (xi * xi.conjugate()).real

        return imod

    # remaining tags are functions of z
    zf = z_integral_function(params, iid)
    return lambda q, p: zf(z_from_qp(params, q, p))


def z_integral_function(params: SystemParams, iid: IntegralId) -> Callable:
    """Return ``fn(z)`` for full-system integrals expressed over ``z`` and its conjugate."""
    iid.validate(params)
    tag, idx, norm = iid.tag, iid.idx, iid.normalized
    if tag == "C":
        j, k = idx[0] - 1, idx[1] - 1
        nj, nk = coord_multiplier(params, j), coord_multiplier(params, k)
        return lambda z: power_product([(z[j], nk), (z[k].conjugate(), nj)])
    if tag == "Xi":
        return lambda z: _xi(z, idx[0] - 1)
    if tag == "XiBar":
        return lambda z: _xi(z, idx[0] - 1).conjugate()
    if tag == "Eta":
        return lambda z: _eta(z, idx[0] - 1)
    if tag == "EFull":
        return lambda z: 0.5 * _eta(z, idx[0] - 1)
    if tag == "QFull":
        return lambda z: _q_full(params, z, idx[0] - 1, norm)
    if tag == "QBarFull":
        return lambda z: _q_full(params, z, idx[0] - 1, norm).conjugate()
    if tag == "HFull":
        return lambda z: 0.5 * sum(zz * zz.conjugate() for zz in z).real
    if tag == "IMod":
        l = idx[0] - 1
        return lambda z: (_xi(z, l) * _xi(z, l).conjugate()).real
    raise WrongSystemKind(f"{iid} is not a function of the complex variables")


# ---------------------------------------------------------------------------
# State-level API


def _state_kind(s) -> SystemKind:
    if isinstance(s, FullState):
        return SystemKind.FULL
    if isinstance(s, ReducedState):
        return SystemKind.REDUCED
    raise TypeError(f"not a phase state: {type(s).__name__}")


def evaluate(params: SystemParams, kind, state, iid) -> complex:
    """Evaluate integral ``iid`` at ``state`` of the given system kind."""
    if isinstance(iid, str):
        iid = IntegralId.parse(iid)
    kind = SystemKind(kind)
    if _state_kind(state) is not kind:
        raise WrongSystemKind(f"state is not a {kind.value} state")
    if kind not in iid.kinds:
        raise WrongSystemKind(f"{iid} is not defined on the {kind.value} system")
    if kind is SystemKind.FULL:
        check_full(params, state)
    else:
        check_reduced(params, state)
        check_singular(params, state.x, state.t)
    return integral_function(params, iid)(state.q, state.p)


def evaluate_along(params: SystemParams, traj, iid) -> np.ndarray:
    """Vectorized evaluation of ``iid`` over every point of a trajectory."""
    if isinstance(iid, str):
        iid = IntegralId.parse(iid)
    kind = SystemKind(traj.kind)
    if kind not in iid.kinds:
        raise WrongSystemKind(f"{iid} is not defined on the {kind.value} system")
    out = integral_function(params, iid)(traj.q.T, traj.p.T)
    return np.broadcast_to(out, traj.t.shape).copy()


def relative_drift(values, eps_abs: float = DRIFT_EPS_ABS) -> float:
    """``max_t |F(t) - F(0)| / max(|F(0)|, eps_abs)``."""
    v = np.asarray(values)
    return float(np.max(np.abs(v - v[0])) / max(abs(v[0]), eps_abs))


def c_invariant(params: SystemParams, s: FullState, j: int, k: int, log_polar: bool = False):
    """``c_jk = z_j^{n(k)} conj(z_k)^{n(j)}``; with ``log_polar`` returns ``(log|c|, arg c)``."""
    iid = IntegralId("C", (j, k))
    iid.validate(params)
    check_full(params, s)
    z = to_complex(params, s).z
    nj, nk = coord_multiplier(params, j - 1), coord_multiplier(params, k - 1)
    factors = [(z[j - 1], nk), (np.conj(z[k - 1]), nj)]
    if log_polar:
        return log_polar_product(factors)
    return complex(power_product(factors))


def angular_momentum(s: FullState, i: int, k: int) -> float:
    if i == k:
        raise ValueError("angular momentum needs two distinct coordinates")
    return float(s.y[i - 1] * s.phat[k - 1] - s.y[k - 1] * s.phat[i - 1])


def tensor_T(params: SystemParams, s: FullState, i: int, k: int) -> float:
    check_full(params, s)
    return float(integral_function(params, IntegralId("T", (i, k)))(s.y, s.phat))


def so2_invariants(params: SystemParams, z: ComplexPhase) -> list:
    """Per plane ``(xi, conj(xi), eta)`` built from the complex variables."""
    zz = list(np.asarray(z.z))
    out = []
    for plane in range(params.N):
        xi = complex(_xi(zz, plane))
        out.append((xi, xi.conjugate(), float(_eta(zz, plane))))
    return out


def plane_energy(params: SystemParams, s: FullState, l: int) -> float:
    """Energy in plane ``l`` of the full oscillator."""
    return float(evaluate(params, SystemKind.FULL, s, IntegralId("EFull", (l,))))


def energy_reduced(params: SystemParams, s: ReducedState, l: int) -> float:
    return float(evaluate(params, SystemKind.REDUCED, s, IntegralId("EReduced", (l,))))


def q_reduced(params: SystemParams, s: ReducedState, l: int, normalized: bool = False) -> complex:
    return complex(evaluate(params, SystemKind.REDUCED, s, IntegralId("QReduced", (l,), normalized)))


def q_full(params: SystemParams, s: FullState, l: int, normalized: bool = False) -> complex:
    return complex(evaluate(params, SystemKind.FULL, s, IntegralId("QFull", (l,), normalized)))


def r_integral(params: SystemParams, s: ReducedState, l: int, normalized: bool = False) -> float:
    return float(evaluate(params, SystemKind.REDUCED, s, IntegralId("R", (l,), normalized)))


def i_modulus_identity(params: SystemParams, s: ReducedState, l: int):
    """``(|factor_l|^2, 4(E_l^2 - k_l n_l^2 omega^2))``; the two agree identically."""
    lhs = float(evaluate(params, SystemKind.REDUCED, s, IntegralId("IMod", (l,))))
    e = energy_reduced(params, s, l)
    rhs = 4.0 * (e * e - params.k[l - 1] * (params.n[l - 1] * params.omega) ** 2)
    return lhs, rhs
