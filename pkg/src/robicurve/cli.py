"""Command-line front end emitting deterministic CSV."""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys

import numpy as np

from . import __version__
from ._curves import NeighborhoodSpec
from .exceptions import ConfigError, RobicurveError, SolverNonconvergence
from .models import Location, Regression, RegressionIntercept, RegressionScale, RegressorDist, Scale
from .risk import fmt

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# keys each command accepts, with defaults
_COMMON = {"model": "location", "k": 1, "design": "normal", "kind": "c", "alpha": 1, "output": "-", "seed": 0}
_KEYS = {
    "ic": {"r": 0.5, "target": "joint"},
    "risk": {"r0": "0.5", "r": "0.5"},
    "rminimax": {"lo": 0.1, "hi": 0.9},
    "project": {"r": 0.1},
    "test": {"tau": 1.0, "r0": 0.1, "r1": 0.1, "level": 0.05},
    "estimate": {"r": 0.5, "input": None},
    "simulate": {"r0": 0.5, "r_true": 0.5, "n": 100, "reps": 100, "contamination": "point",
                 "h_loc": 1e6, "h_scale": 1.0},
}
_SECTIONS = {"run", "model", "neighborhood", "grid", "output", "simulation", "test"}


def _float(x):
    return math.inf if str(x).strip().lower() in ("inf", "+inf") else float(x)


def _floats(x):
    return [_float(v) for v in str(x).split(",") if v.strip()]


def _int(x):
    return int(str(x).strip())


def _alpha(x):
    v = _float(x)
    return v if math.isinf(v) else int(v)


_TYPES = {"k": _int, "alpha": _alpha, "seed": _int, "r": _float, "lo": _float, "hi": _float,
          "tau": _float, "r1": _float, "level": _float, "r_true": _float, "n": _int, "reps": _int,
          "h_loc": _float, "h_scale": _float}


def _design(spec: str, k: int):
    """``normal`` or ``two-point:x1,x2,p`` or ``atoms:x1;x2;...`` (each ``x`` comma separated)."""
    if spec == "normal":
        return RegressorDist.standard_normal(k)
    kind, _, rest = spec.partition(":")
    if kind == "two-point":
        x1, x2, p = (float(v) for v in rest.split(","))
        return RegressorDist.two_point(x1, x2, p)
    if kind == "atoms":
        X = np.array([[float(v) for v in row.split(",")] for row in rest.split(";")])
        return RegressorDist.discrete(X)
    raise ConfigError(f"design: cannot parse {spec!r}")


def build_model(cfg):
    name, k = cfg["model"], cfg["k"]
    if name == "location":
        return Location(k)
    if name == "scale":
        return Scale()
    makers = {"regression": Regression, "regression_scale": RegressionScale,
              "regression_intercept": RegressionIntercept}
    if name not in makers:
        raise ConfigError(f"model: unknown model {name!r}")
    return makers[name](_design(cfg["design"], k))


def _read_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    flat = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"[{section}]: unknown section")
        for key, value in parser.items(section):
            flat[key.replace("-", "_")] = value
    return flat


def resolve_config(command, file_values, flags):
    """Merge defaults, file values and flags (flags win); reject unknown keys."""
    allowed = {**_COMMON, **_KEYS[command]}
    cfg = dict(allowed)
    for key, value in file_values.items():
        if key == "command":
            continue
        if key not in allowed:
            raise ConfigError(f"{key}: unknown key for command {command!r}")
        cfg[key] = value
    cfg.update({k: v for k, v in flags.items() if v is not None and k in allowed})
    for key, conv in _TYPES.items():
        if key in cfg and cfg[key] is not None and not (key == "r" and command == "risk"):
            try:
                cfg[key] = conv(cfg[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    return cfg


# -- commands ---------------------------------------------------------------------


def _cmd_ic(cfg):
    from .ic_solver import solve

    model = build_model(cfg)
    ic = solve(model, NeighborhoodSpec(cfg["kind"], cfg["r"], cfg["alpha"]), target=cfg["target"])
    head = "model,k,kind,alpha,r,A,center,clip_lower,clip_upper,bias,variance,maxmse,max_residual"
    scal = lambda v: fmt(v) if np.ndim(v) == 0 else "|".join(fmt(x) for x in np.ravel(v))
    row = [model.name, str(model.k), cfg["kind"], fmt(cfg["alpha"]), fmt(cfg["r"]), scal(ic.A),
           scal(ic.center), scal(ic.clip_lower), scal(ic.clip_upper), fmt(ic.bias), fmt(ic.variance),
           fmt(ic.max_mse()), fmt(ic.max_residual)]
    return head + "\n" + ",".join(row) + "\n"


def _cmd_risk(cfg):
    from .risk import risk_table

    rep = risk_table(build_model(cfg), cfg["kind"], _floats(cfg["r0"]), _floats(cfg["r"]), cfg["alpha"])
    return rep.to_csv()


def _cmd_rminimax(cfg):
    from .radius_minimax import RadiusMinimaxResult, least_favorable_radius

    model = build_model(cfg)
    res = least_favorable_radius(model, cfg["kind"], cfg["lo"], cfg["hi"], cfg["alpha"])
    row = [model.name, cfg["kind"]] + [fmt(v) for v in (res.r_lo, res.r_hi, res.r_star, res.inefficiency)]
    out = RadiusMinimaxResult.HEADER + "\n" + ",".join(row) + "\n"
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return out


def _cmd_project(cfg):
    from .sp_projection import project_ball, tv_equiv_radius

    model = build_model(cfg)
    bp = project_ball(model, cfg["kind"], cfg["r"])
    r_tilde = tv_equiv_radius(cfg["r"], model) if cfg["kind"] == "v" and bp.C.shape[0] == 1 else math.nan
    lines = ["model,kind,r,coord,clip_lo,clip_hi,shift,shrink,r_tilde,ratio"]
    for j in range(bp.C.shape[0]):
        ratio = r_tilde / cfg["r"] if cfg["r"] > 0 and not math.isnan(r_tilde) else math.nan
        lines.append(",".join([model.name, cfg["kind"], fmt(cfg["r"]), str(j), fmt(bp.lower[j]),
                               fmt(bp.upper[j]), fmt(bp.shift), fmt(bp.shrink[j]),
                               _nan(r_tilde), _nan(ratio)]))
    return "\n".join(lines) + "\n"


def _nan(x):
    return "" if math.isnan(x) else fmt(x)


def _cmd_test(cfg):
    from .maxmin_tests import TestPlan, make_plan

    plan = make_plan(cfg["kind"], cfg["tau"], _float(cfg["r0"]), cfg["r1"], cfg["level"], build_model(cfg))
    return TestPlan.HEADER + "\n" + plan.csv_row() + "\n"


def _cmd_estimate(cfg):
    from .estimators import RobustLocation, RobustRegression, RobustScale

    if not cfg["input"]:
        raise ConfigError("input: a CSV file of observations is required")
    data = np.loadtxt(cfg["input"], delimiter=",", ndmin=2, comments="#")
    name = cfg["model"]
    if name == "location":
        est = RobustLocation(cfg["r"], cfg["kind"]).fit(data[:, 0])
        vals = [est.location_]
    elif name == "scale":
        vals = [RobustScale(cfg["r"], cfg["kind"]).fit(data[:, 0]).scale_]
    elif name == "regression":
        vals = list(RobustRegression(cfg["r"], cfg["alpha"]).fit(data[:, :-1], data[:, -1]).coef_)
    else:
        raise ConfigError(f"model: estimation is not available for {name!r}")
    head = "model,kind,r,n," + ",".join(f"estimate_{j}" for j in range(len(vals)))
    return head + "\n" + ",".join([name, cfg["kind"], fmt(cfg["r"]), str(len(data))] + [fmt(v) for v in vals]) + "\n"


def _cmd_simulate(cfg):
    from .estimators import Contamination, MCRecord, SimConfig, monte_carlo_mse
    from .ic_solver import solve

    model = build_model(cfg)
    r0 = _float(cfg["r0"])
    ic = solve(model, NeighborhoodSpec(cfg["kind"], r0, cfg["alpha"]))
    cont = None
    if cfg["r_true"] > 0:
        cont = Contamination(cfg["r_true"], cfg["contamination"], cfg["h_loc"], cfg["h_scale"])
    sim = SimConfig(n=cfg["n"], replications=cfg["reps"], seed=cfg["seed"], contamination=cont)
    rec = monte_carlo_mse(ic, model, sim)
    row = [model.name, cfg["kind"], fmt(r0), fmt(cfg["r_true"]), str(rec.n), str(rec.reps), str(rec.seed),
           fmt(rec.nmse), fmt(rec.mcse)]
    return MCRecord.HEADER + "\n" + ",".join(row) + "\n"


_COMMANDS = {"ic": _cmd_ic, "risk": _cmd_risk, "rminimax": _cmd_rminimax, "project": _cmd_project,
             "test": _cmd_test, "estimate": _cmd_estimate, "simulate": _cmd_simulate}


def _parser():
    p = argparse.ArgumentParser(prog="robicurve", description="Optimally robust influence curves.")
    p.add_argument("--version", action="version", version=f"robicurve {__version__}")
    p.add_argument("--selftest", action="store_true", help="run the acceptance suite")
    sub = p.add_subparsers(dest="command")
    for name, keys in _KEYS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file with [section] headers")
        for key in {**_COMMON, **keys}:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return p


def _header(command, cfg):
    echo = json.dumps({k: (fmt(v) if isinstance(v, float) else v) for k, v in sorted(cfg.items())},
                      sort_keys=True)
    return f"# robicurve {__version__} command={command} seed={cfg['seed']} config={echo}\n"


def selftest(stream=sys.stdout):
    from .acceptance import run_all

    results = run_all(echo=lambda line: print(line, file=stream, flush=True))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.selftest:
        return selftest()
    if not args.command:
        _parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        flags = vars(args)
        file_values = _read_config(flags["config"]) if flags.get("config") else {}
        cfg = resolve_config(args.command, file_values, flags)
        text = _COMMANDS[args.command](cfg)
    except SolverNonconvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        for key, val in sorted(exc.residuals.items()):
            print(f"  residual {key} = {val:.3e}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, NotImplementedError, OSError, RobicurveError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _header(args.command, cfg) + text
    if cfg["output"] in ("-", None):
        sys.stdout.write(out)
    else:
        with open(cfg["output"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out)
    return EXIT_OK


def main():
    sys.exit(run())
