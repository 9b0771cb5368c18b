"""Command-line entry point: ``sbfp <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error (a report is still written),
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict

from .. import __version__
from ..errors import ParseError, EmptySeries, SbfpError
from ..game import load_game, payoff_from_analytics, solve_mixed
from ..hstar import (HstarProblem, failure_record, feasibility, plot_data, solve_direct,
                     solve_paper, uva_constants)
from ..process import (Deterministic, DriftSchedule, Exponential, ObservationModel,
                       ProcessParams, mc_estimate)
from .data import load_csv
from .fit import fit_params
from .reconcile import reconcile
from .report import PredictConfig, dumps, predict

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_process_flags(p):
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--drift", type=_floats, required=True, help="w1,w2,...")
    p.add_argument("--drift-ext", choices=("hold", "cycle"), default="hold")
    p.add_argument("--delta-mean", type=float, default=1.0)
    p.add_argument("--delta0-mean", type=float, default=None,
                   help="mean initial delay (default: --delta-mean; 0 = no delay)")
    p.add_argument("--deterministic", action="store_true",
                   help="fixed spacing delta-mean instead of exponential")
    p.add_argument("--shape", choices=("concave", "convex"), default="concave")
    p.add_argument("--threshold", choices=("zero", "paper"), default="zero")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)


def _process_from(args):
    params = ProcessParams(args.sigma, args.a0, DriftSchedule(args.drift, args.drift_ext),
                           args.shape, args.threshold)
    law = Deterministic(args.delta_mean) if args.deterministic else Exponential(args.delta_mean)
    d0 = args.delta_mean if args.delta0_mean is None else args.delta0_mean
    delay = Exponential(d0) if d0 > 0 else None
    return params, ObservationModel(law, delay)


def _add_hstar_flags(p, with_params=True):
    if with_params:
        p.add_argument("--delta-mean", type=float, required=True)
        p.add_argument("--w-bar", type=float, required=True)
        p.add_argument("--w-prev", type=float, required=True)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--delta0-mean", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-9)


def _add_fit_flags(p):
    p.add_argument("--csv", required=True)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--time-unit", choices=("obs", "sec", "day"), default="obs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbfp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo turning-point statistics")
    _add_process_flags(p)
    for name in ("u", "v", "vartheta", "theta"):
        p.add_argument(f"--{name}", type=float, default=0.0)
    p.add_argument("--out")

    p = sub.add_parser("hstar", help="optimal turning-point moment")
    _add_hstar_flags(p)
    p.add_argument("--mode", choices=("paper", "direct", "both"), default="both")
    p.add_argument("--plot-data")
    p.add_argument("--out")

    p = sub.add_parser("game", help="solve the Hold/Action vs Up/Down game")
    p.add_argument("--payoff", help="JSON file with payoff1/payoff2")
    p.add_argument("--a-prev", type=float)
    p.add_argument("--a-exit", type=float)
    p.add_argument("--mean-step", type=float)
    p.add_argument("--cost", type=float, default=0.0)
    p.add_argument("--zero-sum", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("fit", help="estimate parameters from a CSV series")
    _add_fit_flags(p)
    p.add_argument("--out")

    p = sub.add_parser("predict", help="full pipeline on a CSV series")
    _add_fit_flags(p)
    _add_hstar_flags(p, with_params=False)
    p.add_argument("--payoff")
    p.add_argument("--cost", type=float, default=0.0)
    p.add_argument("--zero-sum", action="store_true")
    p.add_argument("--mc-reps", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot-data")
    p.add_argument("--out")

    p = sub.add_parser("reconcile", help="analytic functional vs Monte Carlo events")
    _add_process_flags(p)
    p.add_argument("--u-grid", type=_floats, default=(0.0, 0.25, 0.5, 1.0))
    p.add_argument("--h-grid", type=_floats, default=(0.5, 1.0, 2.0, 5.0))
    p.add_argument("--out")
    return parser


def _emit(payload: dict, out) -> None:
    text = dumps(payload)
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"--out: cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _write_plot(problem: HstarProblem, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h", "m_h", "g_h"])
            for row in plot_data(problem):
                w.writerow(["nan" if v != v else f"{v:.17g}" for v in row])
    except OSError as exc:
        raise UsageError(f"--plot-data: cannot write {path}: {exc}") from exc


def _run_hstar(args) -> int:
    problem = HstarProblem(args.delta_mean, args.w_bar, args.w_prev, args.a0, args.delta0_mean)
    feas = feasibility(problem)
    out = {"version": __version__, "problem": asdict(problem), "feasibility": asdict(feas)}
    try:
        out["constants"] = asdict(uva_constants(problem))
    except SbfpError as exc:
        out["constants"] = failure_record(exc)
    code = EXIT_OK
    modes = ("paper", "direct") if args.mode == "both" else (args.mode,)
    for mode in modes:
        try:
            res = solve_paper(problem, args.tol) if mode == "paper" else solve_direct(problem)
            out[mode] = res.to_dict()
        except SbfpError as exc:
            out[mode] = failure_record(exc)
            code = EXIT_DOMAIN
    if args.plot_data:
        _write_plot(problem, args.plot_data)
    _emit(out, args.out)
    return code


def _run_game(args) -> int:
    if args.payoff:
        try:
            game = load_game(args.payoff)
        except OSError as exc:
            raise UsageError(f"--payoff: cannot read {args.payoff}: {exc}") from exc
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"--payoff: malformed game file: {exc}") from exc
    else:
        missing = [f for f in ("a_prev", "a_exit", "mean_step") if getattr(args, f) is None]
        if missing:
            raise UsageError("--payoff or all of --a-prev --a-exit --mean-step required "
                             f"(missing --{missing[0].replace('_', '-')})")
        game = payoff_from_analytics(args.a_prev, args.a_exit, args.mean_step, args.cost,
                                     zero_sum=args.zero_sum)
    _emit({"version": __version__, "game": game.to_dict(),
           "equilibrium": solve_mixed(game).to_dict()}, args.out)
    return EXIT_OK


def _load_series(path):
    try:
        return load_csv(path)
    except OSError as exc:
        raise UsageError(f"--csv: cannot read {path}: {exc}") from exc


def _run_fit(args) -> int:
    series = _load_series(args.csv)
    try:
        fit = fit_params(series, args.window, args.time_unit)
    except SbfpError as exc:
        _emit({"version": __version__, "fit": failure_record(exc)}, args.out)
        return EXIT_DOMAIN
    _emit({"version": __version__, "fit": fit.to_dict()}, args.out)
    return EXIT_OK


def _run_predict(args) -> int:
    series = _load_series(args.csv)
    payoff = None
    if args.payoff:
        try:
            payoff = load_game(args.payoff).to_dict()
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"--payoff: {exc}") from exc
    config = PredictConfig(window=args.window, time_unit=args.time_unit, tol=args.tol,
                           a0=args.a0, delta0_mean=args.delta0_mean, cost=args.cost,
                           zero_sum=args.zero_sum, payoff=payoff, mc_reps=args.mc_reps,
                           workers=args.workers)
    report = predict(series, config, seed=args.seed)
    _emit(report, args.out)
    if args.plot_data and isinstance(report["fit"], dict) and "delta_hat" in report["fit"]:
        fit = report["fit"]
        _write_plot(HstarProblem(fit["delta_hat"], fit["w_bar_hat"], fit["w_prev_hat"],
                                 args.a0, args.delta0_mean), args.plot_data)
    stages = ("fit", "hstar_paper", "hstar_direct", "moments", "game", "equilibrium")
    failed = any(report[k].get("status") in ("failed", "skipped") for k in stages)
    return EXIT_DOMAIN if failed else EXIT_OK


def _run_simulate(args) -> int:
    params, obs = _process_from(args)
    try:
        summary = mc_estimate(params, obs, args.u, args.v, args.vartheta, args.theta,
                              args.reps, args.seed, args.max_steps, args.workers)
        payload = {"version": __version__, "seed": args.seed, "mc": summary.to_dict()}
        code = EXIT_OK
    except SbfpError as exc:
        payload = {"version": __version__, "seed": args.seed, "mc": failure_record(exc)}
        code = EXIT_DOMAIN
    _emit(payload, args.out)
    return code


def _run_reconcile(args) -> int:
    params, obs = _process_from(args)
    if not obs.memoryless:
        raise UsageError("--deterministic: reconciliation needs exponential spacing")
    rep = reconcile(params, obs, args.u_grid, args.h_grid, args.reps, args.seed,
                    args.max_steps, args.workers)
    rep["version"] = __version__
    _emit(rep, args.out)
    return EXIT_OK


RUNNERS = {"simulate": _run_simulate, "hstar": _run_hstar, "game": _run_game,
           "fit": _run_fit, "predict": _run_predict, "reconcile": _run_reconcile}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return RUNNERS[args.command](args)
    except UsageError as exc:
        print(f"sbfp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, EmptySeries) as exc:
        print(f"sbfp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"sbfp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
