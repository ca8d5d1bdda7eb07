"""Command-line interface: run / account / sweep / report."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .accountant import AccountantConstants, ApproxDpBudget, pipeline_report
from .harness import (
    ExperimentConfig,
    check_report,
    fit_loglog_slope,
    run_experiment,
    write_loglog_svg,
)


def _add_run_args(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--task", default="hinge",
                   choices=["hinge", "strongly-convex-hinge", "quadratic"])
    p.add_argument("--algo", default="erm-general",
                   choices=["private-acsa", "erm-general", "localize",
                            "sco-strongly", "dpsgd-baseline"])
    if sweep:
        p.add_argument("--n", type=str, required=True,
                       help="comma-separated sample sizes, e.g. 256,512,1024")
        p.add_argument("--dim", type=str, required=True,
                       help="comma-separated dimensions")
        p.add_argument("--eps", type=str, required=True,
                       help="comma-separated epsilons")
    else:
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--dim", type=int, required=True)
        p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--mu", type=float, default=1.0,
                   help="strong-convexity modulus for strongly-convex tasks")
    p.add_argument("--label-flip", type=float, default=0.1)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=AccountantConstants().c1)
    p.add_argument("--c2", type=float, default=AccountantConstants().c2)
    p.add_argument("--step-cap", type=int, default=4_000_000,
                   help="DP-SGD baseline step ceiling; 0 disables the cap")
    p.add_argument("--population-mc", type=int, default=0,
                   help="evaluate excess population loss on this many fresh samples")
    p.add_argument("--redraw-data", action="store_true",
                   help="draw a fresh dataset per trial (population experiments)")
    p.add_argument("--check", action="store_true",
                   help="exit nonzero if any report consistency check fails")


def _config_from(args, N: int, d: int, eps: float) -> ExperimentConfig:
    return ExperimentConfig(
        task=args.task, algo=args.algo, N=N, d=d, eps=eps, delta=args.delta,
        trials=args.trials, seed=args.seed, out=args.out,
        radius=args.radius, label_flip=args.label_flip, mu=args.mu,
        c1=args.c1, c2=args.c2,
        step_cap=(None if args.step_cap == 0 else args.step_cap),
        population_mc=args.population_mc, redraw_data=args.redraw_data,
    )


def _cmd_run(args) -> int:
    cfg = _config_from(args, args.n, args.dim, args.eps)
    report = run_experiment(cfg)
    print(json.dumps(report["aggregates"], indent=1, sort_keys=True))
    if args.check:
        failures = check_report(report)
        for f in failures:
            print(f"CHECK FAILED: {f}", file=sys.stderr)
        return 1 if failures else 0
    return 0


def _cmd_account(args) -> int:
    budget = ApproxDpBudget(args.eps, args.delta)
    consts = AccountantConstants(args.c1, args.c2)
    report = pipeline_report(args.g, args.batch, args.steps, args.n, budget, consts)
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    ns = [int(v) for v in args.n.split(",")]
    ds = [int(v) for v in args.dim.split(",")]
    es = [float(v) for v in args.eps.split(",")]
    rows = []
    failures = []
    for d in ds:
        for eps in es:
            for N in ns:
                cfg = _config_from(args, N, d, eps)
                report = run_experiment(cfg)
                agg = report["aggregates"]
                rows.append({"N": N, "d": d, "eps": eps, **agg})
                if args.check:
                    failures.extend(check_report(report))
    print(json.dumps(rows, indent=1, sort_keys=True))
    if len(ns) > 1 and len(ds) == 1 and len(es) == 1:
        risks = [r["mean_excess_empirical_risk"] for r in rows]
        if all(v > 0 for v in risks):
            print(f"# slope of excess risk vs N: {fit_loglog_slope(ns, risks):+.3f}")
        counts = [r["mean_gradient_count"] for r in rows]
        print(f"# slope of gradient count vs N: {fit_loglog_slope(ns, counts):+.3f}")
    if args.out:
        _write_sweep(Path(args.out), rows, args)
    for f in failures:
        print(f"CHECK FAILED: {f}", file=sys.stderr)
    return 1 if failures else 0


def _write_sweep(out: Path, rows: list[dict], args) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cols = sorted({k for r in rows for k in r})
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(repr(r.get(c, "")) for c in cols))
    (out / f"sweep_{args.task}_{args.algo}.csv").write_text("\n".join(lines) + "\n")


def _cmd_report(args) -> int:
    paths = sorted(Path(args.results).glob("*.json"))
    if not paths:
        print(f"no reports under {args.results}", file=sys.stderr)
        return 1
    failures = []
    points = []
    for p in paths:
        report = json.loads(p.read_text())
        agg = report["aggregates"]
        cfg = report["config"]
        points.append((cfg["N"], cfg["d"], cfg["eps"], agg))
        print(f"{p.name}: excess={agg['mean_excess_empirical_risk']:.5g} "
              f"count={agg['mean_gradient_count']:.0f}")
        failures.extend(check_report(report))
    ns = sorted({pt[0] for pt in points})
    if len(ns) > 1 and len({(pt[1], pt[2]) for pt in points}) == 1:
        by_n = {pt[0]: pt[3]["mean_excess_empirical_risk"] for pt in points}
        ys = [by_n[n] for n in ns]
        if all(v > 0 for v in ys):
            slope = fit_loglog_slope(ns, ys)
            print(f"slope of excess risk vs N: {slope:+.3f}")
        if args.svg:
            write_loglog_svg(Path(args.results) / "rates.svg", ns,
                             {"mean excess risk": ys}, title="excess risk vs N")
    for f in failures:
        print(f"CHECK FAILED: {f}", file=sys.stderr)
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpcopt",
        description="Differentially private non-smooth convex optimization benchmarks",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one experiment configuration")
    _add_run_args(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_acc = sub.add_parser("account", help="print the budget pipeline as JSON")
    p_acc.add_argument("--g", type=float, default=1.0)
    p_acc.add_argument("--batch", type=int, required=True)
    p_acc.add_argument("--steps", type=int, required=True)
    p_acc.add_argument("--n", type=int, required=True)
    p_acc.add_argument("--eps", type=float, required=True)
    p_acc.add_argument("--delta", type=float, required=True)
    p_acc.add_argument("--c1", type=float, default=AccountantConstants().c1)
    p_acc.add_argument("--c2", type=float, default=AccountantConstants().c2)
    p_acc.set_defaults(fn=_cmd_account)

    p_sweep = sub.add_parser("sweep", help="run a grid over N / dim / eps")
    _add_run_args(p_sweep, sweep=True)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_rep = sub.add_parser("report", help="aggregate written reports and fit rates")
    p_rep.add_argument("--results", type=str, required=True)
    p_rep.add_argument("--svg", action="store_true")
    p_rep.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
