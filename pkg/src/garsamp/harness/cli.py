"""Command line interface.

Exit codes: 0 success, 2 validation failure (bad config, violated
precondition, failed verification), 1 any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from .. import bounds as B
from ..errors import ConfigError, ContractError, ExpressionSyntaxError, GarsampError, ParameterError
from ..model import potential_or_inf
from ..samplers import RandomSource, ars_run, gars_run, gibbs_fixed, gibbs_gars, prior_sampler, rejection_sample_fixed
from .config import load_config
from .experiments import (BOUND_HEADER, CHAIN_HEADER, SAMPLES_HEADER, TRACE_HEADER, acceptance_by_index, outputs,
                          pool_map, run_example, sample_rows, trace_rows)
from .verify import verify_suite

log = logging.getLogger("garsamp")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
VALIDATION_ERRORS = (ConfigError, ContractError, ParameterError, ExpressionSyntaxError)


class ValidationFailure(Exception):
    pass


def _write_rows(header, rows, fh=None):
    w = csv.writer(fh or sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def cmd_bound(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    m = args.method
    if m == "bm1":
        rep = B.bm1_bound(model)
    elif m == "bm2":
        rep = B.bm2_bound(model, k_max=args.iters if args.iters is not None else int(cfg.bound_option("bm2_iterations", 3)))
    elif m == "quad":
        rep = B.quadratic_model_bound(model)
    elif m == "lp":
        p = args.p if args.p is not None else cfg.bound_option("lp_p")
        if p is None:
            raise ConfigError("the lp method needs --p or bounds.lp_p in the config")
        rep = B.lp_model_bound(model, float(p), float(cfg.bound_option("lp_weight", 1.0)))
    elif m == "transform":
        r_inv = cfg.r_inverse()
        if r_inv is None:
            raise ConfigError("the transform method needs bounds.r_inverse in the config")
        rep = B.transform_model_bound(model, r_inv)
    elif m == "tangent":
        rep = B.tangent_model_bound(model)
    else:  # argparse restricts the choices
        raise ConfigError(f"unknown method {m!r}")
    best = min(rep.regions, key=lambda r: r.gamma)
    _write_rows(BOUND_HEADER, [(m, float(rep.gamma), float(rep.L), best.region, float(rep.minimizer))])
    for flag in rep.flags:
        log.info("%s", flag)
    return EXIT_OK


def _rs_job(a):
    raw, n, seed, gamma = a
    from .config import parse_config

    model = parse_config(raw, verify=False).build_model()
    return rejection_sample_fixed(model, prior_sampler(model.prior), math.exp(-gamma), n, RandomSource(seed))


def _gars_job(a):
    raw, n, seed, extra, knots = a
    from .config import parse_config

    model = parse_config(raw, verify=False).build_model()
    return gars_run(model, n, RandomSource(seed), extra, knots)


def _ars_job(a):
    raw, n, seed, s0 = a
    from .config import parse_config

    model = parse_config(raw, verify=False).build_model()
    V = lambda x: potential_or_inf(model, x) - model.c_n  # noqa: E731
    return ars_run(V, s0, n, RandomSource(seed))


def _ars_support(cfg, model):
    s0 = cfg.raw.get("ars_init")
    lo, hi = cfg.domain
    xs = np.linspace(lo, hi, 20_001)
    with np.errstate(all="ignore"):
        v = potential_or_inf(model, xs)
        second = v[:-2] - 2 * v[1:-1] + v[2:]
    fin = np.isfinite(v)
    ok = fin[:-2] & fin[1:-1] & fin[2:]
    if np.any(second[ok] < -1e-9 * np.maximum(1.0, np.abs(v[1:-1][ok]))):
        raise ContractError("ARS needs a log-concave target; this model's potential is not convex")
    if s0 is not None:
        return [float(s) for s in s0]
    x0 = float(xs[np.argmin(v)])
    return [x0 - 1.0, x0 + 1.0]


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    reps = max(1, args.replications)
    ex = cfg.experiment
    if args.algorithm == "rs":
        if model.prior is None:
            raise ContractError("rejection sampling proposes from the prior; the config has none")
        gamma = B.bm2_bound(model, k_max=int(cfg.bound_option("bm2_iterations", 3))).gamma
        jobs = [(cfg.raw, args.n, args.seed + r, gamma) for r in range(reps)]
        traces = pool_map(_rs_job, jobs)
    elif args.algorithm == "gars":
        extra = ex.get("extra_point_rule", "midpoint")
        knots = ex.get("knot_rule", "intersections")
        jobs = [(cfg.raw, args.n, args.seed + r, extra, knots) for r in range(reps)]
        traces = pool_map(_gars_job, jobs)
    else:
        s0 = _ars_support(cfg, model)
        traces = pool_map(_ars_job, [(cfg.raw, args.n, args.seed + r, s0) for r in range(reps)])
    with outputs(args.out) as out:
        out.csv("samples.csv", SAMPLES_HEADER, sample_rows(traces[0].samples))
        out.csv("trace.csv", TRACE_HEADER, trace_rows(traces[0]))
        summary = {"algorithm": args.algorithm, "n": args.n, "seed": args.seed, "replications": reps,
                   "acceptance_rate": [t.acceptance_rate for t in traces][:1000],
                   "mean": float(np.mean(traces[0].samples)) if args.n else math.nan}
        if reps > 1 and args.n > 0:
            pooled, mean_inv = acceptance_by_index(traces, args.n)
            out.csv("curve.csv", ("sample_index", "acceptance_rate", "mean_inverse_proposals"),
                    ((k + 1, float(p), float(m)) for k, (p, m) in enumerate(zip(pooled, mean_inv))))
        out.json("summary.json", summary)
    print(json.dumps({k: v for k, v in summary.items() if k != "acceptance_rate"}))
    return EXIT_OK


def cmd_gibbs(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network()
    ex = cfg.experiment
    if args.algorithm == "gars":
        res = gibbs_gars(net, args.n, RandomSource(args.seed), ex.get("extra_point_rule", "midpoint"),
                         ex.get("knot_rule", "intersections"), burn=args.burn)
    else:
        res = gibbs_fixed(net, args.n, RandomSource(args.seed), burn=args.burn, batch=int(ex.get("fixed_batch", 1)))
    with outputs(args.out) as out:
        out.csv("chain.csv", CHAIN_HEADER, ((i, float(a), float(b)) for i, (a, b) in enumerate(res.chain)))
        for c in (0, 1):
            out.csv(f"trace_x{c + 1}.csv", TRACE_HEADER, trace_rows(res.traces[c]))
        summary = {"algorithm": args.algorithm, "n": args.n, "seed": args.seed, "burn": args.burn,
                   "acceptance_rates": list(res.acceptance_rates()), "acceptance_rate": res.acceptance_rate}
        out.json("summary.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    report = verify_suite(cfg, args.level, args.gamma)
    print(json.dumps(report.as_dict(), indent=2))
    if not report.passed:
        raise ValidationFailure(f"{len(report.failures)} check(s) failed")
    return EXIT_OK


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def cmd_experiment(args) -> int:
    overrides = dict(_parse_override(s) for s in args.set or [])
    summary = run_example(args.id, args.out, overrides)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="garsamp", description="Likelihood bounds and (adaptive) rejection samplers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="compute a lower bound on the system potential")
    b.add_argument("--config", required=True)
    b.add_argument("--method", required=True, choices=["bm1", "bm2", "quad", "lp", "transform", "tangent"])
    b.add_argument("--iters", type=int, help="BM2 iterations")
    b.add_argument("--p", type=float, help="exponent for the lp method")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("sample", help="draw samples from a scalar posterior")
    s.add_argument("--config", required=True)
    s.add_argument("--algorithm", required=True, choices=["rs", "ars", "gars"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replications", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    g = sub.add_parser("gibbs", help="Gibbs chain for a sensor network config")
    g.add_argument("--config", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--algorithm", choices=["gars", "fixed"], default="gars")
    g.add_argument("--burn", type=int, default=0, help="discard this many initial sweeps")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gibbs)

    v = sub.add_parser("verify", help="run invariant checks for a config")
    v.add_argument("--config", required=True)
    v.add_argument("--level", choices=["quick", "full"], default="quick")
    v.add_argument("--gamma", type=float, help="override the bound used by the rejection sampling check")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="reproduce a built-in example")
    e.add_argument("--id", type=int, required=True, choices=[1, 2, 3])
    e.add_argument("--out", required=True)
    e.add_argument("--set", action="append", metavar="KEY=VALUE", help="override an experiment parameter")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for flag in ("n", "burn", "replications"):
        if getattr(args, flag, 0) is not None and getattr(args, flag, 0) < 0:
            print(f"error: --{flag} must be non-negative", file=sys.stderr)
            return EXIT_INVALID
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VALIDATION_ERRORS as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GarsampError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
