"""Command line front end: ``smartcd run | check | describe``."""

from __future__ import annotations

import argparse
import dataclasses
import inspect
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .problems import BUILDERS, build_named, metrics
from .solver import SolverConfig, SolverDiverged, initialize, run

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2

_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}
_OUTPUT_KEYS = {"dir", "timing"}
_TOP_KEYS = {"problem", "solver", "output", "runs"}


class ConfigError(ValueError):
    pass


def _builder_params(name):
    if name not in BUILDERS:
        raise ConfigError(f"problem.name: unknown problem {name!r} (choose from {sorted(BUILDERS)})")
    return set(inspect.signature(BUILDERS[name]).parameters)


def _reject_unknown(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}: unknown key")


def load_config(path, seed=None, out=None):
    """Parse and validate a TOML run file.

    Returns ``(problem_name, problem_params, [SolverConfig...], outdir, timing)``.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    _reject_unknown(raw, _TOP_KEYS, "")
    prob = dict(raw.get("problem", {}))
    if "name" not in prob:
        raise ConfigError("problem.name: missing")
    name = prob.pop("name")
    _reject_unknown(prob, _builder_params(name), "problem.")
    solver = dict(raw.get("solver", {}))
    _reject_unknown(solver, _SOLVER_KEYS - {"use_kernels"}, "solver.")
    output = dict(raw.get("output", {}))
    _reject_unknown(output, _OUTPUT_KEYS, "output.")
    if seed is not None:
        solver["seed"] = seed
    runs = raw.get("runs") or [{}]
    configs = []
    for j, override in enumerate(runs):
        _reject_unknown(override, _SOLVER_KEYS - {"use_kernels"}, f"runs[{j}].")
        try:
            configs.append(SolverConfig(**{**solver, **override}))
        except TypeError as exc:
            raise ConfigError(f"solver: {exc}") from None
    outdir = Path(out or output.get("dir", "smartcd_out"))
    return name, prob, configs, outdir, bool(output.get("timing", True))


def _validate(name, params, configs):
    try:
        problem = build_named(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    for j, cfg in enumerate(configs):
        try:
            cfg.validate(problem)
        except ValueError as exc:
            raise ConfigError(f"solver (run {j}): {exc}") from None
    return problem


def _one_run(args):
    name, params, cfg, outdir, timing, tag = args
    problem = build_named(name, **params)
    x, trace = run(problem, cfg)
    trace.timing = timing
    path = outdir / f"trace_{tag}.csv"
    with open(path, "w", newline="") as fh:
        trace.to_csv(fh)
    F, feas, gap = metrics(problem, x)
    last = trace.records[-1]
    return {
        "run": tag, "seed": cfg.seed, "iterations": last["k"], "epochs": last["epoch"],
        "F": F, "subopt": last["subopt"], "feasibility": feas, "duality_gap": gap,
        "trace": path.name, "config": dataclasses.asdict(cfg),
    }


def cmd_run(opts) -> int:
    try:
        name, params, configs, outdir, timing = load_config(opts.config, opts.seed, opts.out)
        _validate(name, params, configs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [(name, params, cfg, outdir, timing, f"{j:03d}_seed{cfg.seed}")
            for j, cfg in enumerate(configs)]
    workers = min(len(jobs), os.cpu_count() or 1)
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_one_run, jobs))
        else:
            results = [_one_run(job) for job in jobs]
    except SolverDiverged as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {"problem": name, "params": params, "runs": results}
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    for r in results:
        print(f"{r['run']}: k={r['iterations']} F={r['F']:.10g} subopt={r['subopt']} "
              f"feas={r['feasibility']} gap={r['duality_gap']}")
    return EXIT_OK


def cmd_check(opts) -> int:
    from .checks import run_checks

    return EXIT_OK if run_checks() else EXIT_CONFIG


def _parse_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def cmd_describe(opts) -> int:
    params = {}
    for item in opts.params:
        if "=" not in item:
            print(f"config error: expected key=value, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        key, val = item.split("=", 1)
        params[key] = _parse_value(val)
    try:
        allowed = _builder_params(opts.problem)
        _reject_unknown(params, allowed, "")
        problem = build_named(opts.problem, **params)
        cfg = SolverConfig(beta1=opts.beta1, alpha=opts.alpha)
        cfg.validate()
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    setup = initialize(problem, cfg)
    with np.printoptions(precision=6, threshold=20, edgeitems=5):
        print(f"problem: {problem.name}")
        print(f"n={problem.n} p={problem.partition.p} m={problem.m}")
        print(f"f: {problem.f.kind}  h: {problem.h.kind}  D_h*={problem.h.d_hstar():.6g}")
        print(f"nnz(A)={problem.A.csc.nnz}"
              + (f" nnz(M)={problem.f.M.csc.nnz}" if problem.f.M is not None else ""))
        if problem.known_Fstar is not None:
            print(f"F*={problem.known_Fstar:.17g} ({problem.note})")
        print(f"beta1={cfg.beta1:g} alpha={cfg.alpha:g}")
        print(f"B0={setup.B0}")
        print(f"q={setup.sampler.q}")
        print(f"tau0={setup.tau0:.17g}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="smartcd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the solver from a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.set_defaults(func=cmd_run)
    p_check = sub.add_parser("check", help="run the invariant suite on small instances")
    p_check.set_defaults(func=cmd_check)
    p_desc = sub.add_parser("describe", help="print instance dimensions and constants")
    p_desc.add_argument("problem")
    p_desc.add_argument("params", nargs="*", help="builder parameters as key=value")
    p_desc.add_argument("--beta1", type=float, default=1.0)
    p_desc.add_argument("--alpha", type=float, default=0.0)
    p_desc.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    return opts.func(opts)


if __name__ == "__main__":
    sys.exit(main())
