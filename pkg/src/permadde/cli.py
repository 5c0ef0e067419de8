"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 bounds not certified or
verification failed, 3 integrator failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .asymptotics import (DEFAULT_TAIL_FRACTION, random_histories, tail_extrema,
                          verify_gas, verify_permanence, verify_sandwich)
from .bounds import BoundsReport, bounds_report, build_envelopes
from .errors import (BadParamPath, EnvelopeUnavailable, IntegrationError,
                     PermaddeError)
from .integrator import SolverConfig, SolverWarning, integrate, integrate_many
from .serialize import (load_model, model_from_dict, model_from_uri,
                        model_to_dict, parse_history)

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_SOLVER = 0, 1, 2, 3
GAS_TOL = 1e-4


class InputError(PermaddeError):
    pass


def _add_model_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model JSON file")
    src.add_argument("--preset", help="inline preset, e.g. 'preset:nicholson?d=1&beta=sin:2:0.5:1'")


def _add_solver_args(p, T=200.0):
    p.add_argument("--h", type=float, default=0.01, help="step size (default 0.01)")
    p.add_argument("--T", type=float, default=T, help=f"horizon (default {T:g})")
    p.add_argument("--stride", type=int, default=1, help="record every n-th node")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permadde",
        description="Simulate nonautonomous delayed population models and certify "
                    "permanence bounds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    _add_model_args(p)
    _add_solver_args(p, T=100.0)
    p.add_argument("--history", default="1.0",
                   help="const:c | sin:a:b:omega[:phase] | table:t=v;... | JSON file")
    p.add_argument("--with-f", action="store_true", help="add the derivative column")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("bounds", help="write the bounds report as JSON")
    _add_model_args(p)
    p.add_argument("--out", help="JSON path (default stdout)")

    p = sub.add_parser("verify", help="check an ensemble against the certified bounds")
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--N", type=int, default=10, help="ensemble size")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--tail-fraction", type=float, default=DEFAULT_TAIL_FRACTION)
    p.add_argument("--tol", type=float, default=None,
                   help="tolerance (default 1%% of interval width, floor 1e-6)")
    p.add_argument("--bounds", help="use this bounds report instead of computing one")
    p.add_argument("--envelopes", action="store_true",
                   help="co-simulate the envelopes and check the sandwich")
    p.add_argument("--out", help="JSON path (default stdout)")

    p = sub.add_parser("sweep", help="bounds and tails over a range of one parameter")
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--param", required=True,
                   help="dotted path into the model JSON, e.g. recruitment.0.alpha")
    p.add_argument("--range", required=True, dest="range_", metavar="LO:HI:COUNT")
    p.add_argument("--history", default="1.0")
    p.add_argument("--tail-fraction", type=float, default=DEFAULT_TAIL_FRACTION)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", help="CSV path (default stdout)")
    return parser


# ---------------------------------------------------------------------------


def _load(args):
    if args.model:
        return load_model(args.model)
    return model_from_uri(args.preset)


def _solver(args):
    if args.h <= 0 or args.T <= 0 or args.stride < 1:
        raise InputError("need h > 0, T > 0 and stride >= 1")
    return SolverConfig(h=args.h, T=args.T, record_stride=args.stride)


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc):
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def cmd_simulate(args) -> int:
    model = _load(args)
    history = parse_history(args.history)
    traj = integrate(model, history, _solver(args))
    _emit(traj.to_csv(include_f=args.with_f), args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    report = bounds_report(_load(args))
    _emit(_json(report.to_dict()), args.out)
    return EXIT_OK if report.permanent else EXIT_FAIL


def cmd_verify(args) -> int:
    if args.N < 1:
        raise InputError("N must be at least 1")
    model = _load(args)
    cfg = _solver(args)
    if args.bounds:
        with open(args.bounds) as fh:
            try:
                report = BoundsReport.from_dict(json.load(fh))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"cannot read bounds report: {exc}") from None
    else:
        report = bounds_report(model)

    extinction = not report.permanent and report.K_u == 0.0
    if not report.permanent and not extinction:
        print("permadde: permanence is not certified for this model", file=sys.stderr)
        _emit(_json({"pass": False, "certified": False}), args.out)
        return EXIT_FAIL

    if extinction:
        scale = 1.0
    elif math.isfinite(report.certified[1]):
        scale = report.certified[1]
    else:
        scale = report.K_u or 1.0
    histories = random_histories(args.N, args.seed, model.tau_max, scale=scale)
    trajs = integrate_many(model, histories, cfg, workers=4)

    if extinction:
        tol = GAS_TOL if args.tol is None else args.tol
        ok = verify_gas(trajs, 0.0, tol)
        doc = {"pass": ok, "mode": "extinction", "K": 0.0, "tol": tol,
               "final": [float(t.x[-1]) for t in trajs]}
    else:
        verdict = verify_permanence(trajs, report, args.tol, args.tail_fraction)
        ok = verdict.passed
        doc = verdict.to_dict()
        doc["mode"] = "permanence"
        doc["certified"] = [report.certified[0], report.certified[1]]

    if args.envelopes:
        try:
            env = build_envelopes(model)
        except EnvelopeUnavailable as exc:
            raise InputError(str(exc)) from None
        lowers = integrate_many(env.lower, histories, cfg, workers=4)
        uppers = integrate_many(env.upper, histories, cfg, workers=4)
        sw = [verify_sandwich(x, lo, up, 1e-6) for x, lo, up in zip(trajs, lowers, uppers)]
        worst = max(sw, key=lambda v: v.max_violation)
        doc["sandwich"] = {"pass": all(v.passed for v in sw), **worst.to_dict()}
        if not model.cooperative:
            doc["sandwich"]["note"] = ("the capped Ricker lower envelope is a minorant only "
                                       "for states in [0, 1]")
        ok = ok and doc["sandwich"]["pass"]
        doc["pass"] = ok
    _emit(_json(doc), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def parse_range(text: str):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise InputError(f"--range expects lo:hi:count, got {text!r}") from None
    if count < 2:
        raise InputError("sweep count must be at least 2")
    return np.linspace(lo, hi, count)


_META = ("inf", "sup", "tail_liminf", "tail_limsup")


def set_param(doc: dict, path: str, value: float) -> dict:
    """Copy of ``doc`` with the scalar at ``path`` replaced.

    A path ending on a time function makes it the constant ``value``. A path
    into a time function's ``params`` drops its metadata so it is recomputed.
    """
    out = copy.deepcopy(doc)
    keys = path.split(".")
    node, parents = out, []
    try:
        for key in keys[:-1]:
            parents.append(node)
            node = node[int(key)] if isinstance(node, list) else node[key]
        last = keys[-1]
        if isinstance(node, list):
            last = int(last)
        target = node[last]
    except (KeyError, IndexError, ValueError, TypeError):
        raise BadParamPath(f"no such parameter {path!r}") from None

    if isinstance(target, dict) and "kind" in target and "params" in target:
        node[last] = {"kind": "constant", "params": [float(value)]}
        return out
    if isinstance(target, bool) or not isinstance(target, (int, float)):
        raise BadParamPath(f"{path!r} does not address a scalar")
    node[last] = float(value)
    for anc in [node] + parents[::-1]:
        if isinstance(anc, dict) and "kind" in anc and "params" in anc:
            for k in _META:
                anc.pop(k, None)
            break
    return out


def cmd_sweep(args) -> int:
    base = model_to_dict(_load(args))
    values = parse_range(args.range_)
    cfg = _solver(args)
    history = parse_history(args.history)
    docs = [set_param(base, args.param, v) for v in values]
    models = [model_from_dict(d) for d in docs]

    def row(pair):
        value, model = pair
        rep = bounds_report(model)
        lo = hi = float("nan")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SolverWarning)
                est = tail_extrema(integrate(model, history, cfg), args.tail_fraction)
            lo, hi = est.liminf_est, est.limsup_est
        except IntegrationError as exc:
            print(f"permadde: {args.param}={value:g}: {exc}", file=sys.stderr)
        return [value, int(rep.permanent), rep.m0, rep.M0, rep.K_l, rep.K_u, lo, hi]

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        rows = list(pool.map(row, zip(values, models)))

    header = ["value", "permanent", "m0", "M0", "K_l", "K_u", "tail_min", "tail_max"]
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else format(float(v), ".17g") for v in r))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "bounds": cmd_bounds,
            "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except IntegrationError as exc:
        print(f"permadde: integration failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PermaddeError, OSError, ValueError) as exc:
        print(f"permadde: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
