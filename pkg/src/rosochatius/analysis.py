"""Superintegrability verdicts: drift, bracket residuals, Jacobian rank and orbit closure."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import combinations, repeat
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__
from .dynamics import Method, SystemKind, Trajectory, acceleration, check_singular, integrate
from .errors import AxisSingularity, NegativeK, SingularState, StepSizeUnderflow
from .invariants import (
    IntegralId,
    evaluate_along,
    integral_function,
    is_conserved,
    reduced_integral_set,
    relative_drift,
)
from .model import FullState, ReducedState, SystemParams, sample_full_state, sample_reduced_state
from .poisson import commutation_report, gradient, sample_state
from .reduction import consistency_check

DRIFT_THRESHOLD = 1e-6
RANK_REL_THRESHOLD = 1e-8
RANK_FRACTION = 0.8
CLOSURE_TOL = 1e-4

_COMPLEX_TAGS = {"C", "Xi", "XiBar", "QFull", "QBarFull", "QReduced", "QBarReduced"}


def _ids(ids):
    return [IntegralId.parse(i) if isinstance(i, str) else i for i in ids]


def conservation_report(params: SystemParams, traj: Trajectory, ids, eval_params=None) -> dict:
    """Max relative drift of each integral along ``traj``, keyed by integral name."""
    ep = eval_params or params
    return {str(iid): relative_drift(evaluate_along(ep, traj, iid)) for iid in _ids(ids)}


def integral_reports(params: SystemParams, traj: Trajectory, ids, eval_params=None) -> list:
    drifts = conservation_report(params, traj, ids, eval_params)
    return [{"id": str(iid), "conserved": is_conserved(params, iid), "max_rel_drift": drifts[str(iid)]}
            for iid in _ids(ids)]


def jacobian(params: SystemParams, ids, state) -> np.ndarray:
    """Rows are phase-space gradients ``(d/dq, d/dp)``; complex integrals give a real and an imaginary row."""
    rows = []
    for iid in _ids(ids):
        _, gq, gp = gradient(integral_function(params, iid), state.q, state.p)
        g = np.concatenate([gq, gp])
        rows.append(g.real)
        if iid.tag in _COMPLEX_TAGS:
            rows.append(g.imag)
    return np.array(rows)


def independence_rank(params: SystemParams, kind, ids, state, rel_threshold: float = RANK_REL_THRESHOLD):
    """Numerical rank of the integrals' Jacobian at ``state`` and its singular values."""
    if SystemKind(kind) is SystemKind.REDUCED:
        check_singular(params, np.asarray(state.q), state.t)
    sv = np.linalg.svd(jacobian(params, ids, state), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > rel_threshold * sv[0])), sv


@dataclass(frozen=True)
class RankVerdict:
    expected: Optional[int]
    majority_rank: int
    fraction: float
    ranks: tuple
    singular_values: tuple
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ranks"] = list(self.ranks)
        d["singular_values"] = list(self.singular_values)
        return d


def rank_verdict(params: SystemParams, kind, ids, samples: int = 20, seed: int = 0,
                 expected: Optional[int] = None, rel_threshold: float = RANK_REL_THRESHOLD,
                 min_fraction: float = RANK_FRACTION) -> RankVerdict:
    """Majority-vote rank over seeded random states.

    Passes when the expected rank (or, without one, the majority rank) is
    reached at no less than ``min_fraction`` of the states.
    """
    rng = np.random.default_rng(seed)
    ranks, spectra = [], []
    attempts = 0
    while len(ranks) < samples:
        attempts += 1
        if attempts > 10 * samples:
            break
        s = sample_state(params, kind, rng)
        try:
            r, sv = independence_rank(params, kind, ids, s, rel_threshold)
        except SingularState:
            continue
        ranks.append(r)
        spectra.append(sv)
    values, counts = np.unique(ranks, return_counts=True)
    majority = int(values[np.argmax(counts)])
    target = majority if expected is None else expected
    fraction = float(np.mean(np.asarray(ranks) == target))
    return RankVerdict(expected, majority, fraction, tuple(ranks), tuple(float(v) for v in spectra[0]),
                       bool(fraction >= min_fraction and (expected is None or majority == expected)))


def phase_distance_sq(params: SystemParams, traj: Trajectory) -> np.ndarray:
    """Squared distance to the initial point, momenta scaled by ``1/omega``."""
    dq = traj.q - traj.q[0]
    dp = (traj.p - traj.p[0]) / params.omega
    return np.sum(dq * dq, axis=1) + np.sum(dp * dp, axis=1)


def _hermite(params: SystemParams, traj: Trajectory, i: int, t: float):
    """Cubic Hermite interpolant of the phase point on ``[t_i, t_{i+1}]`` using the exact vector field."""
    accel = acceleration(params, traj.kind)
    h = traj.t[i + 1] - traj.t[i]
    s = (t - traj.t[i]) / h
    h00, h10 = 2 * s ** 3 - 3 * s ** 2 + 1, s ** 3 - 2 * s ** 2 + s
    h01, h11 = -2 * s ** 3 + 3 * s ** 2, s ** 3 - s ** 2
    q0, q1, p0, p1 = traj.q[i], traj.q[i + 1], traj.p[i], traj.p[i + 1]
    a0, a1 = accel(q0), accel(q1)
    q = h00 * q0 + h10 * h * p0 + h01 * q1 + h11 * h * p1
    p = h00 * p0 + h10 * h * a0 + h01 * p1 + h11 * h * a1
    return q, p


def period_estimate(params: SystemParams, traj: Trajectory, tol: float = CLOSURE_TOL):
    """First return time ``T*`` and closure distance, or ``None`` if the orbit never closes within ``tol``.

    Each local minimum of the squared distance to the start is located by a
    parabola through the three samples around it, then polished by bounded
    parabolic/golden search on a cubic Hermite interpolant of the trajectory.
    The first minimum closing within ``tol`` wins.
    """
    d2 = phase_distance_sq(params, traj)
    t = traj.t
    q0, p0 = traj.q[0], traj.p[0]

    def dist2(tau):
        j = min(max(int(np.searchsorted(t, tau)) - 1, 0), len(t) - 2)
        q, p = _hermite(params, traj, j, tau)
        return float(np.sum((q - q0) ** 2) + np.sum(((p - p0) / params.omega) ** 2))

    inner = np.flatnonzero((d2[1:-1] <= d2[:-2]) & (d2[1:-1] <= d2[2:])) + 1
    for i in inner:
        a, b, _ = np.polyfit(t[i - 1:i + 2] - t[i], d2[i - 1:i + 2], 2)
        guess = t[i] + (-b / (2 * a) if a > 0 else 0.0)
        guess = min(max(guess, t[i - 1]), t[i + 1])
        res = minimize_scalar(dist2, bounds=(t[i - 1], t[i + 1]), method="bounded",
                              options={"xatol": 1e-13 * max(1.0, abs(t[i]))})
        tmin, dmin = (res.x, res.fun) if res.fun <= dist2(guess) else (guess, dist2(guess))
        closure = math.sqrt(max(dmin, 0.0))
        if closure < tol:
            return float(tmin), float(closure)
    return None


def momentum_degree(params: SystemParams, iid, state, scales=(1e3, 1e5)) -> float:
    """Leading polynomial degree in the momenta, from ``|F(q, lam p)|`` at two large ``lam``."""
    fn = integral_function(params, _ids([iid])[0])
    q = np.asarray(state.q)
    p = np.asarray(state.p)
    lo, hi = (abs(fn(q, lam * p)) for lam in scales)
    return float(math.log(hi / lo) / math.log(scales[1] / scales[0]))


# ---------------------------------------------------------------------------
# Suites


@dataclass(frozen=True)
class SuiteConfig:
    kind: str = "reduced"
    method: str = "Yoshida4"
    seed: int = 0
    dt_factor: float = 1e-3
    periods: float = 10.0
    x_range: tuple = (0.3, 2.0)
    p_range: tuple = (-2.0, 2.0)
    initial_state: Optional[dict] = None
    conservation: bool = True
    brackets: bool = True
    rank: bool = True
    period: bool = True
    reduce_check: bool = False
    drift_threshold: float = DRIFT_THRESHOLD
    bracket_samples: int = 100
    bracket_threshold: float = 1e-9
    rank_samples: int = 20
    rank_rel_threshold: float = RANK_REL_THRESHOLD
    rank_fraction: float = RANK_FRACTION
    period_dt_factor: float = 1e-4
    period_periods: float = 2.0
    closure_tol: float = CLOSURE_TOL
    reduce_periods: float = 5.0
    reduce_bound: float = 1e-6
    # test hook: integrals are evaluated with k shifted by this amount
    perturb_k: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown suite options: {sorted(unknown)}")
        d = dict(d)
        for key in ("x_range", "p_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x_range"] = list(self.x_range)
        d["p_range"] = list(self.p_range)
        return d


@dataclass
class VerificationReport:
    params: dict
    seed: int
    kind: str
    drifts: dict = field(default_factory=dict)
    integrals: list = field(default_factory=list)
    bracket_results: list = field(default_factory=list)
    bracket_matrix: dict = field(default_factory=dict)
    rank: Optional[dict] = None
    period: Optional[dict] = None
    reduce: Optional[dict] = None
    checks: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["version"] = __version__
        return d


def suite_integrals(params: SystemParams, kind) -> list:
    """Integrals checked by the suites for each system kind."""
    if SystemKind(kind) is SystemKind.REDUCED:
        return reduced_integral_set(params, normalized=True)
    ids = [IntegralId("EFull", (l,)) for l in range(1, params.N + 1)]
    ids += [IntegralId("L", (2 * l - 1, 2 * l)) for l in range(1, params.N + 1)]
    ids += [IntegralId("QFull", (l,), True) for l in range(1, params.N)]
    return ids


def initial_state(params: SystemParams, config: SuiteConfig):
    kind = SystemKind(config.kind)
    if config.initial_state is not None:
        st = config.initial_state
        if kind is SystemKind.FULL:
            return FullState(st["y"], st["phat"], st.get("t", 0.0))
        return ReducedState(st["x"], st["p"], st.get("t", 0.0))
    rng = np.random.default_rng(config.seed)
    if kind is SystemKind.FULL:
        return sample_full_state(params, rng, p_range=config.p_range)
    return sample_reduced_state(params, rng, config.x_range, config.p_range)


def run_suite(params: SystemParams, config: SuiteConfig) -> VerificationReport:
    """Run every enabled check for one parameter point."""
    kind = SystemKind(config.kind)
    method = Method(config.method)
    report = VerificationReport(params.to_dict(), config.seed, kind.value)
    hamiltonian = IntegralId("HFull" if kind is SystemKind.FULL else "HReduced")
    ids = suite_integrals(params, kind)
    eval_params = params
    if config.perturb_k:
        eval_params = replace(params, k=tuple(v + config.perturb_k for v in params.k))
    T = params.base_period
    try:
        s0 = initial_state(params, config)
        if config.conservation:
            traj = integrate(params, kind, s0, config.dt_factor * T, config.periods * T, method)
            report.integrals = integral_reports(params, traj, [hamiltonian] + ids, eval_params)
            report.drifts = {r["id"]: r["max_rel_drift"] for r in report.integrals}
            report.checks["conservation"] = all(
                r["max_rel_drift"] < config.drift_threshold for r in report.integrals if r["conserved"])
        if config.brackets:
            gated = [(hamiltonian, f) for f in ids]
            energies = [i for i in ids if i.tag in ("EReduced", "EFull")]
            gated += list(combinations(energies, 2))
            every = list(combinations([hamiltonian] + ids, 2))
            results = commutation_report(params, kind, every, config.bracket_samples, config.seed,
                                         config.bracket_threshold, eval_params)
            by_pair = {r.pair: r for r in results}
            report.bracket_results = [by_pair[_ordered(pr, every)].to_dict() for pr in gated]
            report.bracket_matrix = {f"{a}|{b}": r.max_scaled_residual for (a, b), r in by_pair.items()}
            report.checks["brackets"] = all(r["pass"] for r in report.bracket_results)
        if config.rank:
            expected = 2 * params.N - 1 if kind is SystemKind.REDUCED else None
            verdict = rank_verdict(eval_params, kind, ids, config.rank_samples, config.seed, expected,
                                   config.rank_rel_threshold, config.rank_fraction)
            report.rank = verdict.to_dict()
            report.checks["rank"] = verdict.passed
        if config.period:
            ptraj = integrate(params, kind, s0, config.period_dt_factor * T, config.period_periods * T, method)
            est = period_estimate(params, ptraj, config.closure_tol)
            report.period = None if est is None else {"T": est[0], "closure": est[1]}
            report.checks["period"] = est is not None
        if config.reduce_check and kind is SystemKind.REDUCED:
            rep = consistency_check(params, s0, config.reduce_periods * T, config.dt_factor * T, method)
            report.reduce = rep.to_dict()
            report.checks["reduce"] = rep.max_dev < config.reduce_bound
    except (SingularState, StepSizeUnderflow, AxisSingularity, NegativeK) as exc:
        report.errors.append(f"{type(exc).__name__}: {exc}")
    return report


def _ordered(pair, universe):
    return pair if pair in universe else (pair[1], pair[0])


def survey(grid, config: SuiteConfig, workers: int = 1) -> list:
    """Run :func:`run_suite` at every parameter point; failures are recorded, not raised."""
    grid = list(grid)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_safe_suite, grid, repeat(config)))
    return [_safe_suite(p, config) for p in grid]


def _safe_suite(params: SystemParams, config: SuiteConfig) -> VerificationReport:
    try:
        return run_suite(params, config)
    except Exception as exc:  # noqa: BLE001 - a survey keeps going past bad points
        report = VerificationReport(params.to_dict(), config.seed, config.kind)
        report.errors.append(f"{type(exc).__name__}: {exc}")
        return report
