from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import (
    RHO_CHOICES,
    FitConfig,
    MetricConfig,
    SimulationConfig,
    StoreConfig,
    parse_grid,
)
from .data import PairCounts, aggregate, load_games_path, team_records
from .errors import (
    EXIT_INPUT,
    EXIT_OK,
    ConfigError,
    ConvergenceError,
    GameLogError,
    PairedRocError,
)
from .fit import StrengthEstimates, fit_mle, get_link
from .inference import (
    TrueModel,
    check_wl_ge_sw,
    limiting_c_stats,
    limiting_c_stats_design,
    limiting_curve,
    moments,
    parity_bound,
    se_c_sw_taylor,
    se_c_wl,
    true_curves,
)
from .metricsim import (
    DISTANCE_COLUMNS,
    convergence_experiment,
    default_strengths,
    default_teams,
    loglog_slopes,
    simulate_se_decay,
    trend_test,
)
from .plot import render_svg
from .roc import RocAnalysis, RocCurve, analyze
from .storage import ResultStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParityReport:
    league: str
    G: int
    asd: float
    isd: float
    rsd: float
    auwlc: float
    auswc: float
    std_auwlc: float
    std_auswc: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def standardize_auc(auc: float, G: int) -> float:
    if G < 1:
        raise ConfigError(f"games per team must be >= 1, got {G}")
    return (auc - 0.5) * math.sqrt(G)


def parity(
    counts: PairCounts,
    analysis: RocAnalysis,
    league: str = "",
    games_per_team: Optional[int] = None,
) -> ParityReport:
    """Spread of win percentages against the coin-flip spread, with standardized AUCs."""
    records = team_records(counts)
    idle = [record.team for record in records if record.games == 0]
    if idle:
        raise GameLogError(f"teams without games: {', '.join(idle)}")
    games = np.array([record.games for record in records])
    if games_per_team is None:
        games_per_team = int(games.max())
        if np.any(games != games_per_team):
            logger.warning(
                "unbalanced schedule (%d to %d games); using G=%d",
                games.min(), games.max(), games_per_team,
            )
    if analysis.c_sw is None:
        raise ConfigError("parity needs the SW analysis")
    pct = np.array([record.win_pct for record in records])
    asd = float(np.std(pct))
    isd = 0.5 / math.sqrt(games_per_team)
    return ParityReport(
        league=league,
        G=games_per_team,
        asd=asd,
        isd=isd,
        rsd=asd / isd,
        auwlc=analysis.c_wl,
        auswc=analysis.c_sw,
        std_auwlc=standardize_auc(analysis.c_wl, games_per_team),
        std_auswc=standardize_auc(analysis.c_sw, games_per_team),
    )


def _vector(text: str) -> np.ndarray:
    path = Path(text)
    try:
        if path.is_file():
            return pd.read_csv(path, header=None).to_numpy(dtype=np.float64).ravel()
        return np.array([float(part) for part in text.split(",") if part.strip()])
    except ValueError:
        raise ConfigError(f"cannot read numbers from {text!r}") from None


def _read_strengths(path: str, teams: Optional[Sequence[str]] = None) -> Tuple[Tuple[str, ...], np.ndarray]:
    frame = pd.read_csv(path, dtype={"team": str}, skipinitialspace=True)
    if list(frame.columns[:2]) != ["team", "mu"]:
        raise ConfigError(f"{path}: strengths need a team,mu header")
    table = dict(zip(frame["team"].str.strip(), frame["mu"].astype(float)))
    if teams is None:
        teams = tuple(table)
    missing = [team for team in teams if team not in table]
    if missing:
        raise ConfigError(f"{path}: no strength for {', '.join(missing)}")
    return tuple(teams), np.array([table[team] for team in teams])


def _read_design(path: str) -> Tuple[Tuple[str, ...], np.ndarray]:
    frame = pd.read_csv(path, dtype={"team_a": str, "team_b": str}, skipinitialspace=True)
    if list(frame.columns[:3]) != ["team_a", "team_b", "games"]:
        raise ConfigError(f"{path}: design needs a team_a,team_b,games header")
    teams: List[str] = []
    for team in pd.concat([frame["team_a"], frame["team_b"]], ignore_index=True).str.strip():
        if team not in teams:
            teams.append(team)
    index = {team: i for i, team in enumerate(teams)}
    n = np.zeros((len(teams), len(teams)), dtype=np.int64)
    for a, b, games in frame[["team_a", "team_b", "games"]].itertuples(index=False, name=None):
        i, j = index[a.strip()], index[b.strip()]
        n[i, j] += int(games)
        n[j, i] += int(games)
    return tuple(teams), n


def _fit_config(args: argparse.Namespace) -> FitConfig:
    base = FitConfig.from_env()
    return FitConfig(
        tolerance=args.tolerance if args.tolerance is not None else base.tolerance,
        max_iterations=args.max_iter if args.max_iter is not None else base.max_iterations,
    )


def _game_paths(args: argparse.Namespace, many: bool = False) -> List[str]:
    paths = list(args.games) + list(args.inputs)
    if not paths:
        raise ConfigError("no game log given, pass --input CSV")
    if len(paths) > 1 and not many:
        raise ConfigError(f"{args.command} takes one game log, got {len(paths)}")
    return paths


def _league_labels(args: argparse.Namespace, paths: Sequence[str]) -> List[str]:
    labels = args.league or [Path(path).stem for path in paths]
    if len(labels) != len(paths):
        raise ConfigError(f"{len(labels)} --league labels for {len(paths)} game logs")
    return labels


def _load_and_fit(args: argparse.Namespace, path: str) -> Tuple[PairCounts, StrengthEstimates]:
    counts = aggregate(load_games_path(path))
    estimates = fit_mle(counts, get_link(args.link), _fit_config(args))
    return counts, estimates


def _require_converged(estimates: StrengthEstimates) -> None:
    if not estimates.converged:
        raise ConvergenceError(f"fit stopped after {estimates.iterations} iterations")


def cmd_fit(args: argparse.Namespace) -> Dict[str, Any]:
    counts, estimates = _load_and_fit(args, _game_paths(args)[0])
    records = {record.team: record for record in team_records(counts)}
    return {
        "link": estimates.link.value,
        "log_likelihood": estimates.log_likelihood,
        "iterations": estimates.iterations,
        "converged": estimates.converged,
        "teams": [
            {"team": team, "mu_hat": mu, "wins": records[team].wins, "games": records[team].games}
            for team, mu in estimates.ranking()
        ],
    }


def _method_curves(analysis: RocAnalysis, method: str) -> List[Tuple[str, RocCurve]]:
    curves: List[Tuple[str, RocCurve]] = []
    if method in ("wl", "both"):
        curves.append(("WL", analysis.wl))
    if method in ("sw", "both") and analysis.sw is not None:
        curves.append(("SW", analysis.sw))
    return curves


def write_knots(path: str, curves: Sequence[Tuple[str, RocCurve]]) -> None:
    """Knot CSV with ``fpr,tpr`` columns, led by a ``curve`` column when there are several."""
    frames = [pd.DataFrame(curve.knots, columns=["fpr", "tpr"]) for _, curve in curves]
    if len(frames) > 1:
        frames = [
            frame.assign(curve=label.lower())[["curve", "fpr", "tpr"]]
            for (label, _), frame in zip(curves, frames)
        ]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    logger.info("wrote %s", path)


def _write_svg(path: Optional[str], svg: bytes) -> None:
    if path:
        Path(path).write_bytes(svg)
        logger.info("wrote %s", path)
    else:
        sys.stdout.buffer.write(svg)


def cmd_roc(args: argparse.Namespace) -> Dict[str, Any]:
    counts, estimates = _load_and_fit(args, _game_paths(args)[0])
    _require_converged(estimates)
    analysis = analyze(counts, estimates, get_link(args.link), method=args.method)
    ranked = analysis.ranked
    payload: Dict[str, Any] = {
        "c_wl": analysis.c_wl,
        "c_sw": analysis.c_sw,
        "W_hat": ranked.W_hat,
        "N": ranked.N,
        "R0": ranked.R0,
        "N0": ranked.N0,
        "tie_groups": [list(group) for group in ranked.tie_groups if len(group) > 1],
    }
    if analysis.report is not None:
        payload["identity_residual"] = analysis.report.identity_residual
    if args.knots:
        payload["wl_knots"] = analysis.wl.knots.tolist()
        if analysis.sw is not None:
            payload["sw_knots"] = analysis.sw.knots.tolist()
    curves = _method_curves(analysis, args.method)
    if args.out_knots:
        write_knots(args.out_knots, curves)
    if args.out_svg:
        _write_svg(args.out_svg, render_svg(curves, title=args.title))
    return payload


def _true_model(args: argparse.Namespace) -> TrueModel:
    q = _vector(args.q)
    n = _vector(args.n) if args.n else np.ones(len(q))
    if len(n) == 1:
        n = np.full(len(q), n[0])
    if len(n) != len(q):
        raise ConfigError(f"--q has {len(q)} entries but --n has {len(n)}")
    order = np.argsort(q, kind="stable")
    try:
        return TrueModel(q=q[order], n_q=n[order])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_inference(args: argparse.Namespace) -> Dict[str, Any]:
    model = _true_model(args)
    if args.stat == "limits":
        equal = bool(np.all(model.n_q == model.n_q[0]))
        c_wl, c_sw = limiting_c_stats(model.q) if equal else limiting_c_stats_design(model)
        comparison = check_wl_ge_sw(model.q)
        U, bound = parity_bound(model.q)
        return {
            "c_wl": c_wl,
            "c_sw": c_sw,
            "equal_design": equal,
            "margin": comparison.margin if equal else c_wl - c_sw,
            "U": U,
            "U_bound": bound,
        }
    if args.stat == "se-wl":
        return {"se_c_wl": se_c_wl(model), "N": model.N}
    moment_set = moments(model)
    if args.stat == "se-sw":
        return {"se_c_sw_taylor": se_c_sw_taylor(moment_set, model.N), "N": model.N}
    return moment_set.to_dict()


def cmd_parity(args: argparse.Namespace) -> Dict[str, Any]:
    paths = _game_paths(args, many=True)
    reports = []
    for path, league in zip(paths, _league_labels(args, paths)):
        counts, estimates = _load_and_fit(args, path)
        _require_converged(estimates)
        analysis = analyze(counts, estimates, get_link(args.link))
        reports.append(parity(counts, analysis, league, args.games_per_team).to_dict())
    return {"leagues": reports}


def _simulation_config(args: argparse.Namespace) -> SimulationConfig:
    base = SimulationConfig.from_env()
    return SimulationConfig(
        teams=args.teams if args.teams is not None else base.teams,
        n_grid=parse_grid(args.n) if args.n else base.n_grid,
        reps=args.reps if args.reps is not None else base.reps,
        seed=args.seed if args.seed is not None else base.seed,
        workers=args.workers if args.workers is not None else base.workers,
        fit=base.fit,
    )


def cmd_simulate(args: argparse.Namespace) -> Dict[str, Any]:
    config = _simulation_config(args)
    link = get_link(args.link)
    if args.experiment == "se-decay":
        mu = _read_strengths(args.mu)[1] if args.mu else None
        if mu is not None and len(mu) != config.teams:
            config = SimulationConfig(
                teams=len(mu), n_grid=config.n_grid, reps=config.reps,
                seed=config.seed, workers=config.workers, fit=config.fit,
            )
        result = simulate_se_decay(config, mu, link)
        payload = result.to_dict()
        if len(result.table) > 1:
            payload["loglog_slopes"] = loglog_slopes(result.table)
    else:
        if args.design:
            teams, design = _read_design(args.design)
        else:
            teams = default_teams(config.teams)
            design = np.ones((config.teams, config.teams), dtype=np.int64)
            np.fill_diagonal(design, 0)
        mu = _read_strengths(args.mu, teams)[1] if args.mu else default_strengths(len(teams))
        metric = MetricConfig(rho=args.rho, z=args.z)
        scales = parse_grid(args.grid)
        result = convergence_experiment(
            mu, design, scales, metric, reps=config.reps, seed=config.seed,
            link=link, workers=config.workers, fit_config=config.fit, teams=teams,
        )
        payload = result.to_dict()
        if len(scales) > 2:
            payload["trend"] = {column: trend_test(result.table, column) for column in DISTANCE_COLUMNS}
    if args.out:
        result.table.to_csv(args.out, index=False)
        logger.info("wrote %s", args.out)
    payload["table"] = result.table
    return payload


def cmd_plot(args: argparse.Namespace) -> Dict[str, Any]:
    paths = _game_paths(args, many=True)
    if args.mu and len(paths) > 1:
        raise ConfigError("--mu needs a single game log")
    link = get_link(args.link)
    curves: List[Tuple[str, RocCurve]] = []
    for path, league in zip(paths, _league_labels(args, paths)):
        counts, estimates = _load_and_fit(args, path)
        _require_converged(estimates)
        analysis = analyze(counts, estimates, link)
        prefix = f"{league} " if len(paths) > 1 else ""
        curves += [(f"{prefix}WL", analysis.wl), (f"{prefix}SW", analysis.sw)]
    if args.mu:
        _, mu = _read_strengths(args.mu, counts.teams)
        truth = true_curves(counts, mu, link)
        curves += [("true WL", truth.wl), ("true SW", truth.sw)]
        model = TrueModel.from_strengths(mu, counts, link)
        curves += [("limiting WL", limiting_curve(model, "wl")), ("limiting SW", limiting_curve(model, "sw"))]
    _write_svg(args.out, render_svg(curves, title=args.title))
    return {"out": args.out, "curves": [label for label, _ in curves]}


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("games", nargs="*", metavar="GAMES", help="game log CSV with winner,loser[,date] columns")
    parser.add_argument("--input", dest="inputs", action="append", default=[], metavar="CSV", help="game log CSV")
    parser.add_argument("--link", choices=("logistic", "probit"), default="logistic")
    parser.add_argument("--tol", "--tolerance", dest="tolerance", type=float, default=None)
    parser.add_argument("--max-iter", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcroc", description="ROC analysis of paired comparison models")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--json", action="store_true", help="print full-precision JSON")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--store", metavar="KEY", default=None, help="persist the result under KEY")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit team strengths")
    _add_fit_options(fit)
    fit.set_defaults(handler=cmd_fit)

    roc = sub.add_parser("roc", help="WL and SW c-statistics")
    _add_fit_options(roc)
    roc.add_argument("--method", choices=("wl", "sw", "both"), default="both")
    roc.add_argument("--knots", action="store_true")
    roc.add_argument("--out-knots", default=None, metavar="CSV", help="write curve knots as fpr,tpr")
    roc.add_argument("--out-svg", default=None, metavar="PATH", help="render the curves to SVG")
    roc.add_argument("--title", default=None)
    roc.set_defaults(handler=cmd_roc)

    inference = sub.add_parser("inference", help="limiting c-statistics and standard errors")
    inference.add_argument("--q", required=True, help="stronger-side probabilities (list or file)")
    inference.add_argument("--n", default=None, help="games per pair (list, file or one value)")
    inference.add_argument("--stat", choices=("limits", "se-wl", "se-sw", "moments"), default="limits")
    inference.set_defaults(handler=cmd_inference)

    par = sub.add_parser("parity", help="ASD/ISD/RSD and standardized AUCs")
    _add_fit_options(par)
    par.add_argument("--league", action="append", default=None, help="label per game log, in order")
    par.add_argument("--games-per-team", type=int, default=None)
    par.set_defaults(handler=cmd_parity)

    sim = sub.add_parser("simulate", help="Monte Carlo experiments")
    sim.add_argument("experiment", choices=("se-decay", "convergence"))
    sim.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    sim.add_argument("--teams", type=int, default=None)
    sim.add_argument("--n", default=None, help="games per pair grid, start:stop:step or list")
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--mu", default=None, help="team,mu CSV of true strengths")
    sim.add_argument("--design", default=None, help="team_a,team_b,games CSV")
    sim.add_argument("--grid", default="1,2,4,8,16", help="schedule multipliers")
    sim.add_argument("--rho", choices=RHO_CHOICES, default="euclidean")
    sim.add_argument("--z", type=float, default=2.0)
    sim.add_argument("--link", choices=("logistic", "probit"), default="logistic")
    sim.add_argument("--out", default=None, help="CSV file for the result table")
    sim.set_defaults(handler=cmd_simulate)

    plot = sub.add_parser("plot", help="render ROC curves to SVG")
    _add_fit_options(plot)
    plot.add_argument("--league", action="append", default=None, help="label per game log, in order")
    plot.add_argument("--mu", default=None, help="team,mu CSV to add true and limiting curves")
    plot.add_argument("--title", default=None)
    plot.add_argument("--out", default=None)
    plot.set_defaults(handler=cmd_plot)
    return parser


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def _print(payload: Dict[str, Any], as_json: bool) -> None:
    table = payload.pop("table", None)
    if as_json:
        if table is not None:
            payload.setdefault("rows", table.to_dict(orient="records"))
        print(json.dumps(payload, indent=2))
        return
    if table is not None:
        print(table.to_string(index=False, float_format=lambda x: f"{x:.4g}"))
        payload = {k: v for k, v in payload.items() if k not in ("rows", "events")}
    for key, value in payload.items():
        if isinstance(value, list) and value and isinstance(value[0], dict):
            print(pd.DataFrame(value).to_string(index=False, float_format=lambda x: f"{x:.3f}"))
        elif isinstance(value, dict):
            print(f"{key}: " + ", ".join(f"{k}={_format(v)}" for k, v in value.items()))
        else:
            print(f"{key}: {_format(value)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        payload = args.handler(args)
        if args.store:
            store_config = StoreConfig.from_env()
            store = ResultStore(store_config.results_dir, store_config.redis_url)
            stored = {k: v for k, v in payload.items() if k != "table"}
            store.save_run(args.store, args.command, stored)
        if args.command != "plot" or args.out:
            _print(dict(payload), args.json)
        if payload.get("converged") is False:
            raise ConvergenceError(f"fit stopped after {payload['iterations']} iterations")
    except PairedRocError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    return EXIT_OK
