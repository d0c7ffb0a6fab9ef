"""Command-line entry point: ``drstqp <module> <action> [flags]``.

Exit codes: 0 on success, 1 on a domain error (message on stderr), 2 on a
usage error.  The resolved configuration is echoed to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import calibrate, cliquelab, d3ro, dro, randmat, stqp
from .errors import DrstqpError
from .symlin import sym_from_json
from .transport import AmbiguitySpec, parse_norm

RADIUS_KINDS = {
    "expdecay": "expdecay",
    "transport": "transport",
    "subgauss": "subgauss",
    "subexp": "subexp",
    "martingale": "martingale",
    "subexp-martingale": "martingale",
}


def _read_json(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _read_matrix(path: str) -> np.ndarray:
    return sym_from_json(_read_json(path))


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to floats, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return "inf" if math.isinf(v) else v
    return obj


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(_clean(payload), sort_keys=True))
    else:
        print(text)


def _fmt_x(x) -> str:
    return "[" + ", ".join(f"{v:.6f}" for v in x) + "]"


# -- handlers


def cmd_stqp_solve(args) -> int:
    Q = _read_matrix(args.matrix)
    sol = stqp.solve_stqp(Q, engine=args.engine, rng=randmat.RngSpec(args.seed), starts=args.starts)
    _emit(args, sol.to_json(), f"value {sol.value:.6f}\nx {_fmt_x(sol.x)}\nsupport {list(sol.support)}\nengine {sol.engine}")
    return 0


def _radius_source(args):
    if args.theta is not None:
        return dro.Direct(args.theta)
    if args.chance_goe is not None:
        beta, alpha = args.chance_goe
        return dro.ChanceGOE(beta, alpha)
    beta, k, alpha = args.chance_wishart
    return dro.ChanceWishart(beta, int(k), alpha)


def cmd_dro_solve(args) -> int:
    unified = dro.unify_radius(_radius_source(args))
    if args.ensemble:
        ens = randmat.EmpiricalEnsemble.from_json(_read_json(args.ensemble))
    else:
        ens = randmat.EmpiricalEnsemble(_read_matrix(args.matrix)[None], None, None)
    model = dro.DroModel(ens, AmbiguitySpec(parse_norm(args.norm), 2.0, unified.value))
    sol = dro.solve_dro(model, engine=args.engine, rng=randmat.RngSpec(args.seed))
    payload = {**sol.to_json(), "radius": unified.to_json(), "norm": args.norm}
    _emit(args, payload, f"theta {sol.theta:.6f}\nvalue {sol.value:.6f}\nx {_fmt_x(sol.x)}\nsupport {list(sol.stqp.support)}")
    return 0


def _parse_radius(text: str):
    kind, _, arg = text.partition(":")
    if not arg:
        raise argparse.ArgumentTypeError(f"radius needs the form kind:value, got {text!r}")
    if kind == "const":
        return d3ro.Const(float(arg))
    if kind == "invnorm":
        return d3ro.InvNormSq(float(arg))
    if kind == "invquad":
        try:
            return d3ro.InvQuad(_read_matrix(arg))
        except OSError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
    if kind == "goq":
        return d3ro.GammaOverQ(float(arg))
    raise argparse.ArgumentTypeError(f"unknown radius kind {kind!r}")


def cmd_d3ro_solve(args) -> int:
    Q = _read_matrix(args.matrix)
    sol = d3ro.solve_d3(Q, args.radius, starts=args.starts, rng=randmat.RngSpec(args.seed))
    _emit(args, sol.to_json(), f"value {sol.value:.6f}\nx {_fmt_x(sol.x)}\nsupport {list(sol.support)}\nlabel {sol.meta.get('label', 'exact')}")
    return 0


def _bound_from_args(args) -> calibrate.RadiusBound:
    kind = RADIUS_KINDS[args.kind]
    params = {
        "expdecay": {"c1": args.c1, "c2": args.c2, "a": args.a, "m": args.m},
        "transport": {"c": args.c},
        "subgauss": {"C": args.C, "K": args.K, "m": args.m},
        "subexp": {"C": args.C, "K": args.K, "m": args.m},
        "martingale": {"R": args.R},
    }[kind]
    return calibrate.RadiusBound(kind, params)


def cmd_calibrate_radius(args) -> int:
    bound = _bound_from_args(args)
    theta = bound.evaluate(args.N, args.beta)
    _emit(args, {"bound": bound.to_json(), "N": args.N, "beta": args.beta, "theta": theta}, f"theta {theta:.6f}")
    return 0


def cmd_calibrate_coverage(args) -> int:
    if args.model == "goe":
        model = randmat.goe_model(args.n)
    else:
        model = randmat.wishart_model(args.n, args.k or args.n)
    bound = args.theta if args.theta is not None else _bound_from_args(args)
    rep = calibrate.coverage_mc(model, args.N, args.trials, args.beta, bound, randmat.RngSpec(args.seed),
                                event=args.event)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep.write_csv(out / "coverage.csv")
    text = (f"coverage {rep.coverage:.4f} ({rep.hits}/{rep.trials}), target {rep.target:.4f}, "
            f"theta {rep.theta_used:.6f}, wilson [{rep.wilson_low:.4f}, {rep.wilson_high:.4f}]")
    _emit(args, rep.to_json(), text)
    return 0


def cmd_calibrate_orlicz(args) -> int:
    sampler = calibrate.normal_sampler() if args.dist == "normal" else calibrate.chi2_sampler(args.k)
    est = calibrate.orlicz_estimate(sampler, args.psi, args.mc, randmat.RngSpec(args.seed))
    payload = {"dist": args.dist, "psi": args.psi, "t": est.t, "top_share": est.top_share, "diverged": est.diverged}
    _emit(args, payload, "diverged" if est.diverged else f"{args.psi} {est.t:.4f}")
    return 0


def cmd_cliquelab_run(args) -> int:
    cfg = cliquelab.load_config(args.config)
    if args.seed_given:
        cfg = cliquelab.RunConfig(cfg.graph, cliquelab.ExperimentGrid(
            cfg.grid.model, args.seed, cfg.grid.N, cfg.grid.trials, cfg.grid.starts), cfg.output_dir)
    out = args.out or cfg.output_dir
    records = cliquelab.run_config(cfg, out, args.threads)
    _emit(args, {"records": len(records), "output_dir": str(out)}, f"{len(records)} records written to {out}")
    return 0


def cmd_cliquelab_demo(args) -> int:
    out = args.out or f"demo-{args.example}"
    res = cliquelab.run_demo(args.example, out, args.seed, args.threads)
    count = sum(len(r) for r in res.values())
    _emit(args, {"example": args.example, "records": count, "output_dir": str(out)},
          f"example {args.example}: {count} records written to {out}")
    return 0


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite != "all" and args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(['all', *SUITES])}", file=sys.stderr)
        return 2
    checks = run_suite(args.suite)
    ok = all(c.ok for c in checks)
    payload = {"ok": ok, "checks": [c.__dict__ for c in checks]}
    lines = [f"{'PASS' if c.ok else 'FAIL'} {c.suite}: {c.name} ({c.detail})" for c in checks]
    _emit(args, payload, "\n".join(lines))
    return 0 if ok else 1


# -- parser


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 0)
    p.add_argument("--threads", type=int, default=d if suppress else (os.cpu_count() or 1))
    p.add_argument("--out", default=d)
    p.add_argument("--json", action="store_true", default=d if suppress else False)
    return p


def _bound_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=sorted(RADIUS_KINDS), default="transport")
    p.add_argument("--c", type=float, default=calibrate.GOE_TRANSPORT_C, help="transport constant")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--a", type=float, default=calibrate.DEFAULT_A)
    p.add_argument("--m", type=int, default=1, help="dimension of the vectorized data")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--K", type=float, default=1.0, help="Orlicz norm of the data")
    p.add_argument("--R", type=float, default=1.0, help="almost-sure bound for the martingale radius")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="drstqp", parents=[_global_flags(False)],
                                  description="Distributionally robust standard quadratic optimization")
    g = _global_flags(True)
    mods = top.add_subparsers(dest="module", required=True)

    def action(group, name, fn, help_text):
        p = group.add_parser(name, parents=[g], help=help_text)
        p.set_defaults(fn=fn)
        return p

    s = mods.add_parser("stqp", help="standard quadratic programs").add_subparsers(dest="action", required=True)
    p = action(s, "solve", cmd_stqp_solve, "minimize x^T Q x over the simplex")
    p.add_argument("--matrix", required=True, help='JSON {"n", "upper"}')
    p.add_argument("--engine", choices=["auto", "enum", "replicator"], default="auto")
    p.add_argument("--starts", type=int, default=stqp.AUTO_LOCAL_STARTS)

    s = mods.add_parser("dro", help="decision-independent DRStQP").add_subparsers(dest="action", required=True)
    p = action(s, "solve", cmd_dro_solve, "solve the deterministic equivalent")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ensemble", help="ensemble JSON")
    src.add_argument("--matrix", help="sample mean (or nominal matrix) JSON")
    p.add_argument("--norm", choices=["frob", "linf"], default="frob")
    rad = p.add_mutually_exclusive_group(required=True)
    rad.add_argument("--theta", type=float)
    rad.add_argument("--chance-goe", type=float, nargs=2, metavar=("BETA", "ALPHA"))
    rad.add_argument("--chance-wishart", type=float, nargs=3, metavar=("BETA", "K", "ALPHA"))
    p.add_argument("--engine", choices=["auto", "enum", "replicator"], default="auto")

    s = mods.add_parser("d3ro", help="decision-dependent radius").add_subparsers(dest="action", required=True)
    p = action(s, "solve", cmd_d3ro_solve, "minimize x^T Q x + theta(x) x^T x")
    p.add_argument("--matrix", required=True)
    p.add_argument("--radius", type=_parse_radius, required=True,
                   help="const:THETA | invnorm:GAMMA | invquad:R.json | goq:GAMMA")
    p.add_argument("--starts", type=int, default=20)

    s = mods.add_parser("calibrate", help="radius calibration").add_subparsers(dest="action", required=True)
    p = action(s, "radius", cmd_calibrate_radius, "evaluate a finite-sample radius")
    _bound_flags(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p = action(s, "coverage", cmd_calibrate_coverage, "Monte-Carlo coverage of a calibrated radius")
    _bound_flags(p)
    p.add_argument("--model", choices=["goe", "wishart"], default="goe")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=None, help="Wishart degrees of freedom (default n)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--theta", type=float, default=None, help="fixed radius instead of a bound")
    p.add_argument("--event", choices=list(calibrate.EVENTS), default="frobenius")
    p = action(s, "orlicz", cmd_calibrate_orlicz, "Monte-Carlo Orlicz norm")
    p.add_argument("--dist", choices=["normal", "chi2"], default="normal")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--psi", choices=["psi1", "psi2"], default="psi2")
    p.add_argument("--mc", type=int, default=calibrate.ORLICZ_MC)

    s = mods.add_parser("cliquelab", help="clique experiments").add_subparsers(dest="action", required=True)
    p = action(s, "run", cmd_cliquelab_run, "run an experiment config")
    p.add_argument("--config", required=True)
    p = action(s, "demo", cmd_cliquelab_demo, "desk-scale demo experiment")
    p.add_argument("--example", choices=["5.1", "5.2", "5.3", "5.4", "5.5"], required=True)

    p = mods.add_parser("verify", parents=[g], help="run oracle checks")
    p.add_argument("--suite", default="all")
    p.set_defaults(fn=cmd_verify)
    return top


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    resolved = {k: v for k, v in vars(args).items() if k not in ("fn", "seed_given")}
    print(json.dumps(_clean({k: (repr(v) if not isinstance(v, (int, float, str, bool, type(None), list)) else v)
                             for k, v in resolved.items()}), sort_keys=True), file=sys.stderr)
    try:
        return args.fn(args)
    except (DrstqpError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
