"""Command-line front end.

Exit codes: 0 pass, 1 verification failure, 2 runtime or singularity error,
3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from . import __version__
from .analysis import SuiteConfig, run_suite, survey
from .dynamics import Method, SystemKind, integrate, write_csv
from .errors import AxisSingularity, NegativeK, ParamsError, SingularState, StepSizeUnderflow
from .model import FullState, ReducedState, SystemParams, sample_full_state, sample_reduced_state
from .reduction import consistency_check

EXIT_OK, EXIT_FAIL, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 3

RUN_OPTIONS = ("workers", "tol", "reduce_t_end")
SUITE_FLAGS = ("conservation", "brackets", "rank", "period", "reduce_check")
THRESHOLD_KEYS = {
    "drift": "drift_threshold",
    "bracket": "bracket_threshold",
    "rank_rel": "rank_rel_threshold",
    "rank_fraction": "rank_fraction",
    "closure": "closure_tol",
    "reduce_bound": "reduce_bound",
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """A parsed run configuration; ``raw`` keeps the JSON as given (plus any seed override)."""

    params: SystemParams
    system: SystemKind
    state: Optional[dict]
    sampler: dict
    method: Method
    dt: float
    t_end: float
    suites: dict
    thresholds: dict
    options: dict
    raw: dict = field(repr=False)

    @property
    def seed(self) -> int:
        return int(self.sampler.get("seed", 0))

    @classmethod
    def from_dict(cls, raw: dict, seed: Optional[int] = None) -> "RunConfig":
        raw = json.loads(json.dumps(raw))
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "params" not in raw:
            raise ConfigError("config needs a 'params' object")
        try:
            params = SystemParams.from_dict(raw["params"])
            if "exclusion_radius" in raw:
                params = SystemParams(params.N, params.n, params.k, params.omega, float(raw["exclusion_radius"]))
        except ParamsError as exc:
            raise ConfigError(f"invalid params: {exc}") from None
        try:
            system = SystemKind(raw.get("system", "reduced"))
        except ValueError:
            raise ConfigError("system must be 'full' or 'reduced'") from None
        state = raw.get("initial_state")
        if state is not None and "sampler" in raw:
            raise ConfigError("give either 'initial_state' or 'sampler', not both")
        sampler = dict(raw.get("sampler", {}))
        if seed is not None:
            sampler["seed"] = int(seed)
            if state is None:
                raw["sampler"] = sampler
        integ = raw.get("integrator", {})
        try:
            method = Method(integ.get("method", "Yoshida4"))
        except ValueError:
            raise ConfigError(f"unknown method {integ.get('method')!r}") from None
        T = params.base_period
        dt = float(integ.get("dt", 1e-3 * T))
        t_end = float(integ.get("t_end", 10 * T))
        if not (dt > 0 and t_end > 0):
            raise ConfigError("dt and t_end must be positive")
        suites = {k: bool(raw.get("suites", {}).get(k, k != "reduce_check")) for k in SUITE_FLAGS}
        unknown = set(raw.get("suites", {})) - set(SUITE_FLAGS)
        if unknown:
            raise ConfigError(f"unknown suites: {sorted(unknown)}")
        thresholds = dict(raw.get("thresholds", {}))
        unknown = set(thresholds) - set(THRESHOLD_KEYS)
        if unknown:
            raise ConfigError(f"unknown thresholds: {sorted(unknown)}")
        cfg = cls(params, system, state, sampler, method, dt, t_end, suites, thresholds,
                  dict(raw.get("options", {})), raw)
        cfg.initial_state()
        return cfg

    def initial_state(self):
        if self.state is not None:
            try:
                if self.system is SystemKind.FULL:
                    s = FullState(self.state["y"], self.state["phat"], self.state.get("t", 0.0))
                    ok = s.y.size == 2 * self.params.N
                else:
                    s = ReducedState(self.state["x"], self.state["p"], self.state.get("t", 0.0))
                    ok = s.x.size == self.params.N
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"invalid initial_state: {exc}") from None
            if not ok:
                raise ConfigError("initial_state dimension does not match params")
            return s
        rng = np.random.default_rng(self.seed)
        p_range = tuple(self.sampler.get("p_range", (-2.0, 2.0)))
        if self.system is SystemKind.FULL:
            return sample_full_state(self.params, rng, tuple(self.sampler.get("y_range", (-2.0, 2.0))), p_range)
        return sample_reduced_state(self.params, rng, tuple(self.sampler.get("x_range", (0.3, 2.0))), p_range)

    def suite_config(self) -> SuiteConfig:
        T = self.params.base_period
        kw = dict(
            kind=self.system.value,
            method=self.method.value,
            seed=self.seed,
            dt_factor=self.dt / T,
            periods=self.t_end / T,
            p_range=tuple(self.sampler.get("p_range", (-2.0, 2.0))),
            x_range=tuple(self.sampler.get("x_range", (0.3, 2.0))),
            **self.suites,
        )
        if self.state is not None:
            kw["initial_state"] = self.state
        for key, name in THRESHOLD_KEYS.items():
            if key in self.thresholds:
                kw[name] = float(self.thresholds[key])
        try:
            return SuiteConfig.from_dict({**kw, **{k: v for k, v in self.options.items() if k not in RUN_OPTIONS}})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid options: {exc}") from None


def load_config(path, seed=None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(raw, seed)


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metadata(cfg: RunConfig) -> dict:
    return {
        "config": cfg.raw,
        "params": cfg.params.to_dict(),
        "system": cfg.system.value,
        "method": cfg.method.value,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "version": __version__,
    }


def cmd_simulate(cfg: RunConfig, out: str) -> int:
    s0 = cfg.initial_state()
    if cfg.method is Method.ORACLE_RK54:
        from .dynamics import integrate_oracle

        traj = integrate_oracle(cfg.params, cfg.system, s0, cfg.t_end, float(cfg.options.get("tol", 1e-10)))
    else:
        traj = integrate(cfg.params, cfg.system, s0, cfg.dt, cfg.t_end, cfg.method)
    write_csv(traj, os.path.join(out, "trajectory.csv"))
    _dump({**_metadata(cfg), "steps": len(traj) - 1, "t_final": float(traj.t[-1])},
          os.path.join(out, "run.json"))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: str) -> int:
    report = run_suite(cfg.params, cfg.suite_config())
    _dump({**report.to_dict(), "config": cfg.raw}, os.path.join(out, "report.json"))
    if report.errors:
        for e in report.errors:
            print(e, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_reduce_check(cfg: RunConfig, out: str) -> int:
    s0 = cfg.initial_state()
    if cfg.system is not SystemKind.REDUCED:
        raise ConfigError("reduce-check starts from a reduced state; set system to 'reduced'")
    t_end = float(cfg.options.get("reduce_t_end", 5 * cfg.params.base_period))
    bound = float(cfg.thresholds.get("reduce_bound", 1e-6))
    rep = consistency_check(cfg.params, s0, t_end, cfg.dt, cfg.method)
    passed = rep.max_dev < bound
    _dump({**rep.to_dict(), "bound": bound, "pass": passed, "config": cfg.raw, "version": __version__},
          os.path.join(out, "reduce_report.json"))
    return EXIT_OK if passed else EXIT_FAIL


def grid_points(grid) -> list:
    """Parameter points from a list of param objects or a product over ``n``, ``k`` and ``omega`` lists."""
    if isinstance(grid, list):
        return [SystemParams.from_dict(p) for p in grid]
    if not isinstance(grid, dict) or "n" not in grid:
        raise ConfigError("grid must be a list of params or an object with 'n' (and 'k', 'omega') lists")
    points = []
    omegas = grid.get("omega", [1.0])
    for n, omega in product(grid["n"], omegas):
        ks = [k for k in grid.get("k", [[0.0] * len(n)]) if len(k) == len(n)]
        if not ks:
            raise ConfigError(f"no k vector of length {len(n)} for n={n}")
        for k in ks:
            points.append(SystemParams(len(n), tuple(n), tuple(k), omega))
    return points


def cmd_scan(cfg: RunConfig, out: str) -> int:
    if "grid" not in cfg.raw:
        raise ConfigError("scan needs a 'grid'")
    try:
        grid = grid_points(cfg.raw["grid"])
    except ParamsError as exc:
        raise ConfigError(f"invalid grid point: {exc}") from None
    suite = cfg.suite_config()
    reports = survey(grid, suite, int(cfg.options.get("workers", 1)))
    with open(os.path.join(out, "scan.jsonl"), "w") as fh:
        for rep in reports:
            fh.write(json.dumps({**rep.to_dict(), "suite": suite.to_dict()}, sort_keys=True) + "\n")
    print(f"{'n':<16}{'k':<28}{'checks':<10}status")
    n_pass = 0
    for rep in reports:
        ok = sum(rep.checks.values())
        status = "error" if rep.errors else ("pass" if rep.passed else "FAIL")
        n_pass += rep.passed
        k = ",".join(f"{v:.3g}" for v in rep.params["k"])
        print(f"{str(rep.params['n']):<16}{k:<28}{ok}/{len(rep.checks):<8}{status}")
    print(f"{n_pass}/{len(reports)} points passed")
    if any(rep.errors for rep in reports):
        return EXIT_RUNTIME
    return EXIT_OK if n_pass == len(reports) else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "scan": cmd_scan,
    "reduce-check": cmd_reduce_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rosochatius", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the sampler seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.seed)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularState as exc:
        print(f"singular state at t={exc.time}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (StepSizeUnderflow, AxisSingularity, NegativeK) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
