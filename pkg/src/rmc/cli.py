"""``rmc`` command line: solve a MatrixMarket file, run the synthetic sweeps,
benchmark runtime.

Exit status: 0 success, 1 solver abort, 2 usage or I/O error.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__, datagen, mmio, solver
from .estimators import LossSpec, ParameterError

EXIT_OK, EXIT_ABORT, EXIT_USAGE = 0, 1, 2

BENCH_CASES = {
    1: (300, 200, 5),
    2: (600, 400, 10),
    3: (900, 600, 15),
    4: (1200, 800, 20),
}

RESULT_FIELDS = [
    "method", "snr_db", "observe_fraction", "trial",
    "rmse", "iterations", "stop_reason", "seconds",
]
SUMMARY_FIELDS = [
    "method", "snr_db", "observe_fraction", "trials",
    "mean_rmse", "std_rmse", "mean_iterations", "mean_seconds",
]
BENCH_FIELDS = [
    "case", "m", "n", "r", "method", "trials",
    "mean_seconds", "std_seconds", "mean_iterations", "seconds_per_iteration",
]
TIMING_FIELDS = {
    "seconds", "mean_seconds", "std_seconds", "seconds_per_iteration",
    "wall_time_seconds", "timestamp",
}


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _solver_flags(p):
    p.add_argument("--rank", type=int, default=None, help="factorization rank r")
    p.add_argument("--p", type=float, default=None, help="exponent for the hop loss")
    p.add_argument("--sigma", type=float, default=None, help="fixed Welsch scale (how)")
    p.add_argument("--gamma", type=float, default=None, help="fixed Cauchy scale (hoc)")
    p.add_argument("--xi", type=float, default=2.0)
    p.add_argument("--zeta", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument(
        "--warmup-iters", type=int, default=100,
        help="iterations with the knot held at its first value (0 disables)",
    )
    p.add_argument("--sweeps", type=int, default=1, help="SASD sweeps per iteration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="rmc_output", help="output directory")


def _experiment_flags(p, snr_default, fraction_default):
    p.add_argument("--m", type=int, default=300)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--snr-db", type=float, default=snr_default)
    p.add_argument("--observe-fraction", type=float, default=fraction_default)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--ratio", type=float, default=100.0, help="outlier variance ratio")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--methods", type=lambda s: s.split(","), default=list(datagen.METHODS))
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="rmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="complete a MatrixMarket coordinate file")
    p.add_argument("input", help="observed entries, MatrixMarket coordinate format")
    p.add_argument("--loss", choices=["how", "hoc", "hop", "huber"], default="how")
    p.add_argument("--dense", action="store_true", help="also write the dense completion")
    _solver_flags(p)

    p = sub.add_parser("sweep-snr", help="RMSE versus SNR")
    p.add_argument("--snr-grid", type=_float_list, default=[float(v) for v in range(0, 21, 2)])
    _experiment_flags(p, 10.0, 0.3)
    _solver_flags(p)

    p = sub.add_parser("sweep-fraction", help="RMSE versus fraction observed")
    p.add_argument("--fractions", type=_float_list, default=[0.2, 0.3, 0.4, 0.5, 0.6])
    _experiment_flags(p, 10.0, 0.3)
    _solver_flags(p)

    p = sub.add_parser("bench", help="runtime on the four matrix-size cases")
    p.add_argument("--cases", type=_int_list, default=sorted(BENCH_CASES))
    _experiment_flags(p, 10.0, 0.5)
    _solver_flags(p)
    return parser


def _manifest(command, config):
    return {
        "subcommand": command,
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, fields, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in fields})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _solver_overrides(args):
    return dict(
        xi=args.xi,
        zeta=args.zeta,
        max_iters=args.max_iters,
        warmup_iters=args.warmup_iters,
        sweeps=args.sweeps,
    )


def _loss_from_args(args):
    p = args.p
    if args.loss == "hop" and p is None:
        p = 0.6
    return LossSpec(args.loss, sigma=args.sigma, gamma=args.gamma, p=p)


def cmd_solve(args):
    try:
        x = mmio.read_observed(args.input)
    except (OSError, mmio.MatrixMarketError) as exc:
        raise UsageError(str(exc))
    if args.rank is None:
        raise UsageError("solve needs --rank")
    rank = args.rank
    cfg = solver.SolverConfig(
        rank=rank, loss=_loss_from_args(args), seed=args.seed, **_solver_overrides(args)
    )
    if rank > min(x.m, x.n):
        raise UsageError(f"rank {rank} exceeds min({x.m}, {x.n})")
    report = solver.solve(x, cfg)

    os.makedirs(args.out, exist_ok=True)
    np.savetxt(os.path.join(args.out, "U.txt"), report.factors.U, fmt="%.17g")
    np.savetxt(os.path.join(args.out, "V.txt"), report.factors.V, fmt="%.17g")
    if args.dense:
        np.savetxt(os.path.join(args.out, "completion.txt"), report.product(), fmt="%.17g")
    config = {"input": args.input, "m": x.m, "n": x.n, "observed": x.nnz, **cfg.to_dict()}
    config["dense"] = bool(args.dense)
    manifest = _manifest("solve", config)
    out = report.to_dict()
    out["manifest"] = manifest
    _write_json(os.path.join(args.out, "report.json"), out)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    if report.stop_reason == solver.STOP_RANK:
        print(f"rmc: solver aborted: {report.message}", file=sys.stderr)
        return EXIT_ABORT
    print(
        f"rmc: {report.stop_reason} after {report.warmup_iterations} warm-up + "
        f"{report.iterations} iterations; wrote {args.out}"
    )
    return EXIT_OK


def _loss_params(args):
    return {"p": 0.6 if args.p is None else args.p, "sigma": args.sigma, "gamma": args.gamma}


def _job(payload):
    spec, trial, methods, overrides = payload
    return datagen.run_trial(spec, trial, methods=methods, **overrides)


def _run_jobs(payloads, jobs):
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_job, payloads))
    return [_job(pl) for pl in payloads]


def _check_methods(methods):
    bad = [m for m in methods if m not in datagen.METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {bad}; choose from {list(datagen.METHODS)}")


def _sweep(args, command, grid_name, grid):
    _check_methods(args.methods)
    rank = args.rank if args.rank is not None else 5
    overrides = {**_solver_overrides(args), **_loss_params(args)}
    specs = []
    for value in grid:
        fields = dict(
            m=args.m, n=args.n, r=rank, observe_fraction=args.observe_fraction,
            snr_db=args.snr_db, tau=args.tau, variance_ratio=args.ratio,
            trials=args.trials, seed=args.seed,
        )
        fields[grid_name] = value
        specs.append(datagen.ExperimentSpec(**fields))
    payloads = [(s, t, args.methods, overrides) for s in specs for t in range(s.trials)]
    results = _run_jobs(payloads, args.jobs)

    rows = []
    for (spec, _, _, _), trial_results in zip(payloads, results):
        for res in trial_results:
            rows.append(dict(
                method=res.method, snr_db=spec.snr_db,
                observe_fraction=spec.observe_fraction, trial=res.trial,
                rmse=res.rmse, iterations=res.iterations,
                stop_reason=res.stop_reason, seconds=res.wall_time_seconds,
            ))
    summary = []
    for spec in specs:
        for method in args.methods:
            sel = [r for r in rows if r["method"] == method
                   and r["snr_db"] == spec.snr_db
                   and r["observe_fraction"] == spec.observe_fraction]
            err = np.array([r["rmse"] for r in sel])
            summary.append(dict(
                method=method, snr_db=spec.snr_db,
                observe_fraction=spec.observe_fraction, trials=len(sel),
                mean_rmse=float(err.mean()), std_rmse=float(err.std()),
                mean_iterations=float(np.mean([r["iterations"] for r in sel])),
                mean_seconds=float(np.mean([r["seconds"] for r in sel])),
            ))

    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "results.csv"), RESULT_FIELDS, rows)
    _write_csv(os.path.join(args.out, "summary.csv"), SUMMARY_FIELDS, summary)
    config = {
        "grid_name": grid_name, "grid": list(grid), "methods": list(args.methods),
        "m": args.m, "n": args.n, "rank": rank, "snr_db": args.snr_db,
        "observe_fraction": args.observe_fraction, "tau": args.tau,
        "variance_ratio": args.ratio, "trials": args.trials, "seed": args.seed,
        **overrides,
    }
    _write_json(os.path.join(args.out, "manifest.json"), _manifest(command, config))
    for row in summary:
        print(
            f"{row['method']:>15}  snr={row['snr_db']:g}dB  frac={row['observe_fraction']:g}"
            f"  rmse={row['mean_rmse']:.4g}"
        )
    return EXIT_OK


def cmd_sweep_snr(args):
    return _sweep(args, "sweep-snr", "snr_db", args.snr_grid)


def cmd_sweep_fraction(args):
    return _sweep(args, "sweep-fraction", "observe_fraction", args.fractions)


def cmd_bench(args):
    _check_methods(args.methods)
    unknown = [c for c in args.cases if c not in BENCH_CASES]
    if unknown:
        raise UsageError(f"unknown case(s) {unknown}; choose from {sorted(BENCH_CASES)}")
    overrides = {**_solver_overrides(args), **_loss_params(args)}
    rows = []
    for case in args.cases:
        m, n, r = BENCH_CASES[case]
        spec = datagen.ExperimentSpec(
            m=m, n=n, r=r, observe_fraction=args.observe_fraction, snr_db=args.snr_db,
            tau=args.tau, variance_ratio=args.ratio, trials=args.trials, seed=args.seed,
        )
        results = [datagen.run_trial(spec, t, methods=args.methods, **overrides)
                   for t in range(spec.trials)]
        for method in args.methods:
            sel = [res for trial in results for res in trial if res.method == method]
            secs = np.array([res.wall_time_seconds for res in sel])
            iters = np.array([res.iterations for res in sel], dtype=float)
            rows.append(dict(
                case=case, m=m, n=n, r=r, method=method, trials=len(sel),
                mean_seconds=float(secs.mean()), std_seconds=float(secs.std()),
                mean_iterations=float(iters.mean()),
                seconds_per_iteration=float(secs.sum() / max(iters.sum(), 1.0)),
            ))
            print(f"case {case} ({m}x{n}, r={r})  {method:>15}  {secs.mean():.4f} s")
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "bench.csv"), BENCH_FIELDS, rows)
    config = {
        "cases": {str(c): list(BENCH_CASES[c]) for c in args.cases},
        "methods": list(args.methods), "snr_db": args.snr_db,
        "observe_fraction": args.observe_fraction, "tau": args.tau,
        "variance_ratio": args.ratio, "trials": args.trials, "seed": args.seed,
        **overrides,
    }
    _write_json(os.path.join(args.out, "manifest.json"), _manifest("bench", config))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep-snr": cmd_sweep_snr,
    "sweep-fraction": cmd_sweep_fraction,
    "bench": cmd_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, ValueError, OSError) as exc:
        print(f"rmc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
