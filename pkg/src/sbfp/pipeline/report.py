"""End-to-end turning-point pipeline and its JSON report."""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .. import __version__
from ..errors import SbfpError
from ..game import Game2x2, payoff_from_analytics, solve_mixed
from ..hstar import HstarProblem, failure_record, feasibility, solve_direct, solve_paper
from ..process import (DriftSchedule, Exponential, ObservationModel, ProcessParams,
                       mc_estimate)
from ..transform.functional import restricted_moments
from .data import SeriesData
from .fit import DEFAULT_WINDOW, fit_params

REPORT_KEYS = ("version", "seed", "config", "fit", "feasibility", "hstar_paper",
               "hstar_direct", "moments", "game", "equilibrium", "mc", "diagnostics")


@dataclass(frozen=True)
class PredictConfig:
    window: int = DEFAULT_WINDOW
    time_unit: str = "obs"
    tol: float = 1e-9
    # analytic positions are relative to the last observed level
    a0: float = 0.0
    delta0_mean: Optional[float] = None
    cost: float = 0.0
    zero_sum: bool = False
    payoff: Optional[dict] = None
    mc_reps: int = 2000
    max_steps: int = 10_000
    workers: int = 1


def skipped(reason: str) -> dict:
    return {"status": "skipped", "reason": reason}


def _clean(obj):
    """JSON-safe copy: tuples to lists, numpy scalars to Python, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(report))


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def predict(series: SeriesData, config: PredictConfig = PredictConfig(), seed: int = 0) -> dict:
    """Fit, solve for the turning point, evaluate moments and solve the game.

    Stage failures are recorded in the report; later stages still run when
    their inputs exist.  Paper-mode ``h*`` drives the moment and game stages
    when available, direct mode otherwise.
    """
    report = dict.fromkeys(REPORT_KEYS)
    report["version"] = __version__
    report["seed"] = seed
    report["config"] = asdict(config)
    diagnostics = {"source": series.source, "n_points": len(series)}
    report["diagnostics"] = diagnostics

    try:
        fit = fit_params(series, config.window, config.time_unit)
    except SbfpError as exc:
        report["fit"] = failure_record(exc)
        for key in REPORT_KEYS[4:11]:
            report[key] = skipped("fit failed")
        return report
    report["fit"] = fit.to_dict()

    problem = HstarProblem(fit.delta_hat, fit.w_bar_hat, fit.w_prev_hat,
                           a0=config.a0, delta0_mean=config.delta0_mean)
    feas = feasibility(problem)
    report["feasibility"] = asdict(feas)

    paper = None
    if not feas.feasible:
        report["hstar_paper"] = skipped("turning-point condition not satisfied")
    else:
        try:
            paper = solve_paper(problem, config.tol)
            report["hstar_paper"] = paper.to_dict()
        except SbfpError as exc:
            report["hstar_paper"] = failure_record(exc)

    direct = None
    lst = problem.lst_params(sigma=fit.sigma_hat)
    try:
        direct = solve_direct(problem, lst)
        report["hstar_direct"] = direct.to_dict()
    except SbfpError as exc:
        report["hstar_direct"] = failure_record(exc)

    chosen = paper or direct
    if chosen is None:
        diagnostics["driver"] = None
        report["moments"] = skipped("no turning-point moment available")
        report["game"] = skipped("no turning-point moment available")
        report["equilibrium"] = skipped("no turning-point moment available")
    else:
        diagnostics["driver"] = chosen.mode
        moments = restricted_moments(lst, chosen.h_star)
        report["moments"] = moments.to_dict()
        if config.payoff is not None:
            game = Game2x2.from_dict(config.payoff)
        else:
            game = payoff_from_analytics(moments.a_prev, moments.a_exit,
                                         fit.w_bar_hat * fit.delta_hat, config.cost,
                                         zero_sum=config.zero_sum)
        report["game"] = game.to_dict()
        report["equilibrium"] = solve_mixed(game).to_dict()

    if config.mc_reps > 0:
        params = ProcessParams(fit.sigma_hat, config.a0,
                               DriftSchedule(tuple(w.drift for w in fit.drift_windows)))
        delta0 = problem.delta0_mean
        obs = ObservationModel(Exponential(fit.delta_hat),
                               Exponential(delta0) if delta0 > 0 else None)
        try:
            report["mc"] = mc_estimate(params, obs, reps=config.mc_reps, seed=seed,
                                       max_steps=config.max_steps,
                                       workers=config.workers).to_dict()
        except SbfpError as exc:
            report["mc"] = failure_record(exc)
    else:
        report["mc"] = skipped("mc_reps = 0")
    return report


def report_schema() -> dict:
    """JSON schema (draft 2020-12) for :func:`predict` reports."""
    text = resources.files("sbfp").joinpath("data", "report_schema.json").read_text("utf-8")
    return json.loads(text)
