"""Config-driven experiment runner.

Usage::

    fluctlim run config.json --output out/ [--force] [--threads N] [--seed S]

The config is one JSON object with a ``kind`` of ``moments``, ``dynamics``,
``bounds`` or ``decompose``; see README.md for the fields. Each run writes
``results.csv`` and ``manifest.json`` into its own output directory.

Exit codes: 0 all checks passed, 1 configuration error, 2 a tolerance check
failed, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, convergence
from .dynamics import QuadraticHamiltonian
from .errors import (FluctlimError, LeakageError, PaddingDiverged, ProjectionAnnihilates,
                     TimeOutOfRange, TruncationDiverged)
from .moments import expectation_finite, parse_observable, tensor_observable
from .states import brute_force_decompose, parse_state, random_symmetric_state
from .tolerances import default_dmax

COLUMNS = ["kind", "observable", "lambda", "t", "M", "two_j", "re_finite", "im_finite",
           "re_limit", "im_limit", "abs_error", "status"]
KINDS = ("moments", "dynamics", "bounds", "decompose")
EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL = (TruncationDiverged, ProjectionAnnihilates, PaddingDiverged, LeakageError)


class ConfigError(ValueError):
    code = "config_error"


@dataclass
class Summary:
    label: str
    passed: bool
    text: str


@dataclass
class RunResult:
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)


# -- config parsing ----------------------------------------------------------

def _complex(value, what):
    try:
        re, im = value
        return complex(float(re), float(im))
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a [re, im] pair, got {value!r}") from None


def _ms(spec):
    if isinstance(spec, dict):
        try:
            lo, hi = int(spec["from"]), int(spec["to"])
        except KeyError as exc:
            raise ConfigError(f"Ms range needs 'from' and 'to', missing {exc}") from None
        return list(range(lo, hi + 1, int(spec.get("step", 1))))
    if isinstance(spec, list) and spec:
        return [int(m) for m in spec]
    raise ConfigError("Ms must be a nonempty list or a {'from', 'to'} range")


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"{cfg.get('kind')} config needs '{key}'")
    return cfg[key]


def _lambda(cfg):
    lam = float(_require(cfg, "lambda"))
    if not 0.0 < lam <= 1.0:
        raise ConfigError(
            f"lambda={lam} is outside (0, 1]; the continuum limit needs a polarized reference state")
    return lam


def _observables(cfg):
    if "observables" in cfg:
        specs = cfg["observables"]
    else:
        specs = [_require(cfg, "observable")]
    try:
        return [parse_observable(s) for s in specs]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad observable: {exc}") from None


def _hamiltonian(cfg):
    coeffs = _require(cfg, "hamiltonian")
    if len(coeffs) != 4:
        raise ConfigError("hamiltonian needs four [re, im] coefficients")
    try:
        return QuadraticHamiltonian.from_sequence(
            [_complex(v, "hamiltonian coefficient") for v in coeffs])
    except ValueError as exc:
        raise ConfigError(f"hamiltonian is not self-adjoint: {exc}") from None


def _state(cfg):
    try:
        return parse_state(_require(cfg, "state"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad state: {exc}") from None


def _dmax(cfg):
    if cfg.get("D_max") is not None:
        return int(cfg["D_max"])
    return default_dmax()


def _tolerances(cfg):
    tol = dict(cfg.get("tolerances", {}))
    unknown = set(tol) - {"slope", "slope_tol", "abs_tol", "rate_constant"}
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    return {"expected_slope": float(tol.get("slope", -1.0)),
            "slope_tol": tol.get("slope_tol", 0.1),
            "abs_tol": tol.get("abs_tol"),
            "rate_constant": tol.get("rate_constant")}


# -- row formatting ----------------------------------------------------------

def _num(value):
    if value is None:
        return ""
    return repr(float(value))


def _sweep_rows(kind, report):
    out = []
    for r in report.rows:
        out.append([kind, report.observable, _num(report.lam),
                    "" if report.t is None else _num(report.t), str(r.M),
                    "" if r.two_j is None else str(r.two_j),
                    _num(r.finite.real), _num(r.finite.imag),
                    _num(r.limit.real), _num(r.limit.imag), _num(r.abs_error), r.status])
    return out


def _sweep_summary(kind, report):
    fit = ("fit suppressed" if report.fit is None
           else f"slope={report.fit.slope:.4f}")
    valid = report.valid_rows
    worst = max((r.abs_error for r in valid), default=math.nan)
    label = f"{kind} {report.observable} lambda={report.lam:g}"
    if report.t is not None:
        label += f" t={report.t:g}"
    text = f"{label}: {len(valid)}/{len(report.rows)} rows, {fit}, max error={worst:.3e}"
    return Summary(label, report.passed, text)


# -- experiment kinds --------------------------------------------------------

def _run_sweeps(cfg, kind, threads):
    rho = _state(cfg)
    lam = _lambda(cfg)
    Ms = _ms(_require(cfg, "Ms"))
    observables = _observables(cfg)
    tol = _tolerances(cfg)
    d_max = _dmax(cfg)
    if kind == "dynamics":
        c = _hamiltonian(cfg)
        times = [float(t) for t in _require(cfg, "times")]
    else:
        c, times = None, [None]
    result = RunResult()
    for obs in observables:
        for t in times:
            try:
                report = convergence.sweep(rho, lam, obs, c, t, Ms, threads=threads,
                                           d_max=d_max, **tol)
            except TimeOutOfRange as exc:
                raise ConfigError(str(exc)) from None
            result.rows.extend(_sweep_rows(kind, report))
            result.summaries.append(_sweep_summary(kind, report))
    return result


SUITES = {
    "beta": convergence.verify_beta_bound,
    "hermite": convergence.verify_hermite_growth,
    "csek": convergence.verify_csek,
    "tail": convergence.verify_tail_decay,
    "uniform": convergence.verify_uniform_operator_bound,
    "strong": convergence.verify_strong_convergence,
}


def _suite_params(params):
    out = {}
    for key, value in params.items():
        if key in ("c", "cs"):
            cs = value if key == "cs" else [value]
            hs = [QuadraticHamiltonian.from_sequence([_complex(v, key) for v in h]) for h in cs]
            out[key] = tuple(hs) if key == "cs" else hs[0]
        elif key in ("Ms",):
            out[key] = tuple(math.inf if m == "inf" else int(m) for m in value)
        elif isinstance(value, list):
            out[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            out[key] = value
    return out


def _run_bounds(cfg, threads):
    names = cfg.get("suites", list(SUITES))
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown bound suites {unknown}; choose from {sorted(SUITES)}")
    params = cfg.get("params", {})
    result = RunResult()

    def work(name):
        try:
            return SUITES[name](**_suite_params(params.get(name, {})))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for {name}: {exc}") from None

    reports = _map(work, names, threads)
    for rep in reports:
        lhs, rhs = rep.worst.get("lhs"), rep.worst.get("rhs")
        status = "pass" if rep.passed else "fail"
        result.rows.append(["bounds", rep.name, "", "", "", "", _num(lhs), "0.0",
                            _num(rhs), "0.0", _num(rep.worst_slack), status])
        text = f"bounds {rep.name}: {rep.checks} checks, worst slack={rep.worst_slack:.3e}"
        result.summaries.append(Summary(f"bounds {rep.name}", rep.passed, text))
    return result


def _run_decompose(cfg, threads, seed):
    Ms = _ms(_require(cfg, "Ms"))
    if any(not 1 <= m <= 8 for m in Ms):
        raise ConfigError("decompose supports 1 <= M <= 8")
    lams = cfg.get("lambdas", [cfg.get("lambda", 0.5)])
    lams = [float(v) for v in lams]
    if any(not 0.0 <= v <= 1.0 for v in lams):
        raise ConfigError("decompose lambdas must lie in [0, 1]")
    count = int(cfg.get("count", 20))
    tol = float(cfg.get("tolerances", {}).get("abs_tol", 1e-9))
    if "observables" in cfg or "observable" in cfg:
        observables = _observables(cfg)
    else:
        observables = convergence.words(int(cfg.get("max_degree", 4)))
    rng = np.random.default_rng(seed)
    jobs = [(M, lam, k, random_symmetric_state(M, lam, rng))
            for M in Ms for lam in lams for k in range(count)]

    # the 2^M-dimensional observable matrices are shared by every state of a given (M, lambda)
    full_ops = {(M, lam): [tensor_observable(obs, lam, M) for obs in observables]
                for M in Ms for lam in lams}

    def work(job):
        M, lam, k, rho = job
        state = brute_force_decompose(rho, M)
        rows = []
        for obs, op in zip(observables, full_ops[M, lam]):
            block = expectation_finite(state, obs)
            full = complex(np.einsum("ij,ji->", rho, op))
            err = abs(block - full)
            rows.append(["decompose", str(obs), _num(lam), "", str(M), "",
                         _num(block.real), _num(block.imag), _num(full.real), _num(full.imag),
                         _num(err), "pass" if err <= tol else "fail"])
        return rows

    result = RunResult()
    for rows in _map(work, jobs, threads):
        result.rows.extend(rows)
    failed = sum(r[-1] == "fail" for r in result.rows)
    worst = max(float(r[10]) for r in result.rows)
    text = (f"decompose: {len(jobs)} states, {len(result.rows)} checks, "
            f"{failed} over tolerance, max error={worst:.3e}")
    result.summaries.append(Summary("decompose", failed == 0, text))
    return result


def _map(fn, items, threads):
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(fn, items))


def execute(cfg, threads=1, seed=0):
    """Run one parsed config; returns a :class:`RunResult`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if kind in ("moments", "dynamics"):
        return _run_sweeps(cfg, kind, threads)
    if kind == "bounds":
        return _run_bounds(cfg, threads)
    return _run_decompose(cfg, threads, seed)


# -- persistence -------------------------------------------------------------

def config_hash(cfg):
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_results(out_dir, rows):
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(rows)


def write_manifest(out_dir, cfg, result, wall_time, error=None):
    statuses = {}
    for row in result.rows:
        statuses[row[-1]] = statuses.get(row[-1], 0) + 1
    manifest = {
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "version": __version__,
        "wall_time_s": wall_time,
        "row_status": statuses,
        "rows": len(result.rows),
        "summary": [{"label": s.label, "pass": s.passed, "text": s.text}
                    for s in result.summaries],
        "passed": error is None and all(s.passed for s in result.summaries),
        "error": error,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_output(path, force):
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def run(config_path, output=None, force=False, threads=1, seed=0):
    """Run a config file end to end and return the process exit code."""
    start = time.perf_counter()
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
        out_path = output or (cfg.get("output") if isinstance(cfg, dict) else None)
        if not out_path:
            raise ConfigError("no output directory given (config 'output' or --output)")
        if threads < 0:
            raise ConfigError("--threads must be non-negative")
        out_dir = _prepare_output(out_path, force)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        _report_error(getattr(exc, "code", "config_error"), exc)
        return EXIT_CONFIG

    result = RunResult()
    error, code = None, EXIT_OK
    try:
        result = execute(cfg, threads=threads, seed=seed)
    except NUMERICAL as exc:
        error, code = {"code": exc.code, "message": str(exc)}, EXIT_NUMERICAL
    except (ConfigError, FluctlimError, ValueError, KeyError, TypeError) as exc:
        error = {"code": getattr(exc, "code", "config_error"), "message": str(exc)}
        code = EXIT_CONFIG

    for s in result.summaries:
        print(f"{'PASS' if s.passed else 'FAIL'} {s.text}")
    if error is not None:
        _report_error(error["code"], error["message"])
    if result.rows:
        write_results(out_dir, result.rows)
        write_manifest(out_dir, cfg, result, time.perf_counter() - start, error)
    if code == EXIT_OK and not all(s.passed for s in result.summaries):
        code = EXIT_TOLERANCE
    return code


def _report_error(code, message):
    print(f"error [{code}]: {message}", file=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(prog="fluctlim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="path to the JSON config")
    p.add_argument("--output", help="output directory (overrides the config)")
    p.add_argument("--force", action="store_true", help="allow a non-empty output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized oracle states (decompose)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2 ** 64:
        print("error [config_error]: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.config, args.output, args.force, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
