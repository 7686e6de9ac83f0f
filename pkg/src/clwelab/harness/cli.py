"""Command-line interface.

Exit codes: 0 success or all criteria pass, 1 a test or criterion failed,
2 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .. import distributions as dist
from .. import reductions as red
from .. import solvers as sol
from ..lattice import Lattice, smoothing_bounds, smoothing_parameter
from ..numerics import ParameterError, poisson_residual
from . import io, plotdata
from .experiments import CAMPAIGNS, ConfigError, ExperimentConfig, run_experiment
from .rng import make_rng

log = logging.getLogger("clwelab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _emit(obj, out: str | None) -> None:
    text = io.dumps(obj)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
        log.info("wrote %s", out)
    else:
        print(text)


def _direction(args, n: int, rng) -> dist.HiddenDirection:
    if getattr(args, "direction", None):
        return dist.HiddenDirection([v for v in args.direction.split(",")])
    return dist.HiddenDirection.random(n, rng)


def cmd_sample(args) -> int:
    rng = make_rng(args.seed, "cli-sample")
    n = args.n
    kind = args.dist
    if kind == "clwe":
        w = _direction(args, n, rng)
        b = dist.sample_clwe(dist.ClweParams(n, args.beta, args.gamma), w, rng, args.count, args.fidelity, args.precision_bits)
    elif kind == "hclwe":
        w = _direction(args, n, rng)
        b = dist.sample_hclwe(dist.ClweParams(n, args.beta, args.gamma), w, rng, args.count)
    elif kind == "hclwe-noiseless":
        w = _direction(args, n, rng)
        b = dist.sample_hclwe_noiseless(args.gamma, w, rng, args.count)
    elif kind == "hclwe-m":
        W = dist.HiddenSubspace.random(n, args.m, rng)
        b = dist.sample_hclwe_m(dist.ClweParams(n, args.beta, args.gamma), W, rng, args.count)
        w = None
    elif kind == "null-clwe":
        b, w = dist.sample_null_clwe(n, rng, args.count), None
    else:
        b, w = dist.sample_null_gaussian(n, rng, args.count), None
    meta = dict(b.meta, seed=args.seed)
    if w is not None:
        meta["direction"] = [float(x) for x in w.w]
    b = b.replace(meta=meta)
    out = args.out or f"{kind}.csv"
    io.write_batch(b, out, args.seed)
    log.info("wrote %d samples to %s", len(b), out)
    return EXIT_OK


def cmd_reduce(args) -> int:
    rng = make_rng(args.seed, "cli-reduce", args.op)
    if args.op == "bdd2clwe":
        rep = CAMPAIGNS["bdd2clwe"](samples=args.count, seed=args.seed)
        _emit(rep.to_dict(), args.out)
        return EXIT_OK if rep.aggregate["ks_ok"] else EXIT_FAIL
    if not args.input:
        raise ConfigError(f"reduce {args.op} needs --input")
    src = io.read_batch(args.input)
    if args.op == "rejection":
        out, stats = red.clwe_to_hclwe_rejection(src, red.RejectionConfig(args.delta), rng)
        params = {"delta": args.delta}
    elif args.op == "rescale":
        out, bt, gt = red.add_noise_rescale(src, args.beta, rng)
        stats, params = {}, {"beta": args.beta, "beta_out": bt, "gamma_out": gt}
    else:
        params = dist.ClweParams(src.n + args.m - 1, args.beta, args.gamma)
        out, _ = red.embed_hybrid(src, args.i, args.m, params, rng)
        stats, params = {}, {"i": args.i, "m": args.m, "beta": args.beta, "gamma": args.gamma}
    target = args.out or f"{args.op}.csv"
    io.write_batch(out, target, args.seed)
    io.write_json(io.provenance(args.op, src, out, params, stats), str(target) + ".provenance.json")
    return EXIT_OK


def cmd_attack(args) -> int:
    if args.method == "lll":
        rep = CAMPAIGNS["lll"](n=args.n, gamma=args.gamma, trials=args.trials, seed=args.seed)
        _emit(rep.to_dict(), args.out)
        return EXIT_OK if rep.aggregate["recovered"] == rep.aggregate["trials"] else EXIT_FAIL
    if args.input:
        batch = io.read_batch(args.input)
        rep = sol.covariance_distinguisher(batch, args.beta, args.gamma)
        _emit(rep.to_dict(), args.out)
        return EXIT_OK
    rep = CAMPAIGNS["covariance"](n=args.n, beta=args.beta, gamma=args.gamma, m=args.m, trials=args.trials, seed=args.seed)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def _lattice_from(args) -> Lattice:
    if args.basis:
        rows = json.loads(Path(args.basis).read_text())
        if isinstance(rows, dict):
            return Lattice(rows["basis"], prec=args.precision_bits)
        return Lattice(rows, prec=args.precision_bits)
    return Lattice(np.eye(args.n), prec=args.precision_bits)


def cmd_analyze(args) -> int:
    q = args.quantity
    if q == "sq-corr":
        v = sol.sq_corr_closed_form(sol.SqCorrParams(args.alpha, args.beta, args.gamma, args.precision_bits))
        res = {"alpha": args.alpha, "beta": args.beta, "gamma": args.gamma, "chi": str(v.chi),
               "bound": v.bound, "bound_kind": v.bound_kind}
        if v.chain_value is not None:
            res["chain_value"] = str(v.chain_value)
    elif q == "sq-bound":
        p = sol.SqBoundParams.for_hclwe(args.tau, args.eta, args.packing_size, args.beta, args.gamma)
        res = {"queries": sol.sq_query_lower_bound(p), "params": p.__dict__}
    elif q == "tv":
        est = sol.hclwe_tv_lower_estimate(args.beta, args.gamma)
        res = {"beta": args.beta, "gamma": args.gamma, "tv": est.value, "step": est.step}
    elif q == "smoothing":
        L = _lattice_from(args)
        b = smoothing_bounds(L, args.epsilon)
        res = {"lower": str(b.lower), "upper_dual": str(b.upper_dual), "upper_primal": str(b.upper_primal),
               "c": b.c, "eta": smoothing_parameter(L, args.epsilon)}
    else:
        L = _lattice_from(args)
        res = {"s": args.s, "residual": str(poisson_residual(L, args.s, args.tol))}
    _emit(res, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from ..acceptance import run_all

    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = run_all(only)
    if args.out:
        io.write_json({r.number: {"passed": r.passed, "summary": r.summary, "detail": r.detail} for r in results}, args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_plot_data(args) -> int:
    out = args.out or "figures"
    paths = plotdata.emit_all(out, args.seed, args.beta, args.gamma, args.count)
    spacing = plotdata.peak_spacing(paths["fig2_density"])
    expected = args.gamma / (args.beta**2 + args.gamma**2)
    log.info("peak spacing %.5f (expected %.5f)", spacing, expected)
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_experiment(args, config: dict | None) -> int:
    data = dict(config or {})
    if args.kind:
        data["kind"] = args.kind
    for item in args.set or []:
        key, _, val = item.partition("=")
        try:
            data[key] = json.loads(val)
        except json.JSONDecodeError:
            data[key] = val
    data.setdefault("seed", args.seed)
    if args.out:
        data.setdefault("out", args.out)
    cfg = ExperimentConfig.from_dict(data)
    cfg.validate()
    report = run_experiment(cfg)
    if cfg.kind == "figures":
        print(io.dumps(report.to_dict()))
    else:
        _emit(report.to_dict(), cfg.out)
        if cfg.out:
            io.write_json(dict(report.timing, wall_clock=report.wall_clock), str(cfg.out) + ".timing.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    def common(parser, default):
        parser.add_argument("--seed", type=int, default=default(0), help="master seed")
        parser.add_argument("--precision-bits", type=int, default=default(256))
        parser.add_argument("--out", default=default(None), help="output file or directory")
        parser.add_argument("--config", default=default(None), help="JSON file with option defaults")
        parser.add_argument("-v", "--verbose", action="store_true", default=default(False))

    # Global flags are accepted before or after the subcommand.
    shared = argparse.ArgumentParser(add_help=False)
    common(shared, lambda d: argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="clwelab", description="Continuous LWE numerical laboratory")
    common(p, lambda d: d)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[shared], **k)

    s = sub.add_parser("sample", help="draw a sample batch")
    s.add_argument("dist", choices=["clwe", "hclwe", "hclwe-noiseless", "hclwe-m", "null-clwe", "null-gaussian"])
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--beta", type=float, default=0.1)
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--fidelity", choices=["float64", "precise"], default="float64")
    s.add_argument("--direction", help="comma-separated hidden direction (normalised)")

    r = sub.add_parser("reduce", help="transform a batch")
    r.add_argument("op", choices=["rejection", "rescale", "bdd2clwe", "hybrid"])
    r.add_argument("--input")
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--beta", type=float, default=0.1)
    r.add_argument("--gamma", type=float, default=1.0)
    r.add_argument("--i", type=int, default=0)
    r.add_argument("--m", type=int, default=2)
    r.add_argument("--count", type=int, default=50_000)

    a = sub.add_parser("attack", help="run an attack")
    a.add_argument("method", choices=["lll", "covariance"])
    a.add_argument("--input")
    a.add_argument("--n", type=int, default=2)
    a.add_argument("--beta", type=float, default=0.1)
    a.add_argument("--gamma", type=float, default=4.0)
    a.add_argument("--m", type=int, default=200_000)
    a.add_argument("--trials", type=int, default=1)

    z = sub.add_parser("analyze", help="evaluate a calculator")
    z.add_argument("quantity", choices=["sq-corr", "sq-bound", "tv", "smoothing", "poisson"])
    z.add_argument("--alpha", type=float, default=0.0)
    z.add_argument("--beta", type=float, default=0.1)
    z.add_argument("--gamma", type=float, default=2.0)
    z.add_argument("--tau", type=float)
    z.add_argument("--eta", type=float, default=0.9)
    z.add_argument("--packing-size", type=int, default=1000)
    z.add_argument("--epsilon", type=float, default=math.exp(-math.pi))
    z.add_argument("--basis", help="JSON lattice basis (rows of B)")
    z.add_argument("--n", type=int, default=1)
    z.add_argument("--s", type=float, default=1.0)
    z.add_argument("--tol", type=float, default=1e-12)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--only", help="comma-separated criterion numbers")

    f = sub.add_parser("plot-data", help="write figure CSVs")
    f.add_argument("--beta", type=float, default=0.05)
    f.add_argument("--gamma", type=float, default=2.0)
    f.add_argument("--count", type=int, default=4000)

    e = sub.add_parser("experiment", help="run a configured experiment")
    e.add_argument("--kind", choices=sorted(CAMPAIGNS))
    e.add_argument("--set", action="append", metavar="KEY=VALUE", help="experiment option")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    config = None
    try:
        if args.config:
            config = json.loads(Path(args.config).read_text())
            if args.command != "experiment":
                # Config values act as defaults; explicit flags still win.
                explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
                for key, val in config.items():
                    key = key.replace("-", "_")
                    if hasattr(args, key) and key not in explicit:
                        setattr(args, key, val)
        if args.command == "analyze" and args.quantity == "sq-bound" and args.tau is None:
            args.tau = 4 * math.exp(-math.pi * args.gamma**2 / 4)
        handlers = {
            "sample": cmd_sample,
            "reduce": cmd_reduce,
            "attack": cmd_attack,
            "analyze": cmd_analyze,
            "verify": cmd_verify,
            "plot-data": cmd_plot_data,
        }
        if args.command == "experiment":
            return cmd_experiment(args, config)
        return handlers[args.command](args)
    except (ConfigError, ParameterError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
