"""Command-line frontend: ``gamechain validate|price|study --config PATH``.

Exit codes: 0 success, 1 validation failure (or unusable config),
2 infeasible under caps, 3 internal error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .config import ConfigError, RunConfig, build_law, build_model, build_payoff, load_config
from .diagnostics import (UnsupportedLawError, cf_distance, coarse_error, exp_moment,
                          rate_regression, rows_to_csv, strong_error, value_convergence)
from .dynkin import (InfeasibleError, PayoffEvaluationError, american_value, backward_value,
                     brute_force_value, build_tree, european_value, extract_strategies)
from .model import _jsonable, validate_innovations, validate_model, validate_payoffs
from .scheme import simulate_path

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3
ORACLE_TOL = 1e-12


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _manifest(out: Path, command: str, cfg: RunConfig, run: dict, started: float, status: int,
              files: list):
    doc = dict(
        artifact="gamechain", version=__version__, command=command, exit_status=status,
        seed=run["seed"], streams=dict(chain=_rng.CHAIN, bridge=_rng.BRIDGE, mc=_rng.MC,
                                       probe=_rng.PROBE, cf=_rng.CF),
        config=cfg.to_dict(), resolved_run=run, files=sorted(files),
        python=platform.python_version(), numpy=np.__version__,
        started=_dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        wall_time=time.time() - started,
    )
    _write(out / "manifest.json", _dump(doc))


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #

def cmd_validate(cfg: RunConfig, run: dict, out: Path) -> tuple:
    model, law = build_model(cfg.model), build_law(cfg.law)
    reports = [validate_model(model, run["probe_count"], run["probe_radius"], run["seed"]),
               validate_innovations(law)]
    if cfg.payoff:
        pair = build_payoff(cfg.payoff)
        paths = [simulate_path(model, law, run["N"], run["seed"], k)
                 for k in range(run["sample_paths"])]
        reports.append(validate_payoffs(pair, paths))
    ok = all(r.passed for r in reports)
    _write(out / "validation.json", _dump(dict(passed=ok, reports=[r.to_dict() for r in reports])))
    for r in reports:
        bad = r.first_failure()
        if bad is None:
            print(f"{r.subject}: ok")
        else:
            witness = json.dumps(_jsonable(bad.witness))
            print(f"{r.subject}: FAILED {bad.name} (margin {bad.margin!r}) witness {witness}")
    return (EXIT_OK if ok else EXIT_INVALID), ["validation.json"]


def _oracle(tree, pair, report, budget) -> dict:
    bf = brute_force_value(tree, pair, budget)
    diff = max(abs(bf.inf_sup - report.value), abs(bf.sup_inf - report.value))
    return dict(inf_sup=bf.inf_sup, sup_inf=bf.sup_inf, stopping_times=bf.n_stopping_times,
                max_abs_difference=diff, tolerance=ORACLE_TOL, agree=diff <= ORACLE_TOL)


def cmd_price(cfg: RunConfig, run: dict, out: Path, oracle: bool) -> tuple:
    model, law, pair = build_model(cfg.model), build_law(cfg.law), build_payoff(cfg.payoff)
    if not law.is_finite:
        raise ConfigError("pricing needs a finite-support innovation law")
    N = run["N"]
    recombine = bool(run["recombine"]) and pair.sufficient is not None
    tree = build_tree(model, law, N, run["node_cap"], recombine=recombine, payoffs=pair)
    report = backward_value(tree, pair)
    report.metadata.update(american_value=american_value(tree, pair),
                           european_value=european_value(tree, pair))
    if oracle:
        report.oracle = _oracle(tree, pair, report, run["budget"])
    _write(out / "value.json", report.to_json(tree, bool(run["node_dump"])) + "\n")
    strat = extract_strategies(tree, report)
    cols = ["n", "t", "nodes", "value_min", "value_max", "min_player_stops", "max_player_stops"]
    rows = []
    for row in report.level_summaries():
        row["t"] = tree.time(row["n"])
        rows.append(row)
    rows.append(dict(n="first_stop", t="",
                     min_player_stops=strat.minimizer.first_stop_level(),
                     max_player_stops=strat.maximizer.first_stop_level()))
    _write(out / "strategies.csv", rows_to_csv("strategies", rows, cols))
    audit = report.sandwich_audit()
    print(f"value {report.value!r} nodes {tree.node_count} sandwich "
          f"{'ok' if audit['passed'] else 'VIOLATED'}")
    status = EXIT_OK
    if oracle:
        o = report.oracle
        print(f"oracle inf-sup {o['inf_sup']!r} sup-inf {o['sup_inf']!r} "
              f"{'agree' if o['agree'] else 'DISAGREE'}")
        if not o["agree"]:
            status = EXIT_INVALID
    if not audit["passed"]:
        status = EXIT_INVALID
    return status, ["value.json", "strategies.csv"]


def _study_rows(name: str, cfg: RunConfig, run: dict) -> tuple:
    """Rows for one study plus an optional rate summary row list."""
    model, law = build_model(cfg.model), build_law(cfg.law)
    seed, jobs = run["seed"], run["jobs"]
    rows, rate = [], None

    def each(Ns, fn):
        for N in Ns:
            try:
                rows.append(fn(N).row())
            except (ValueError, RuntimeError) as exc:
                rows.append(dict(N=N, status=f"error: {exc}"))

    if name == "strong-error":
        each(run["N_list"], lambda N: strong_error(model, N, run["refine"] * N, run["reps"], seed,
                                                   law=law, jobs=jobs))
    elif name == "coarse-error":
        each(run["N_list"], lambda N: coarse_error(model, law, N, run["reps"], seed, jobs))
    elif name == "exp-moment":
        each(run["N_list"], lambda N: exp_moment(model, law, N, run["M"], run["reps"],
                                                 run["delta"], seed, jobs))
    elif name == "cf":
        sig = model.sigma_at(np.asarray(model.x0, dtype=float))
        for n in run["cf_n"]:
            try:
                rows.append(cf_distance(sig, law, n, run["w_samples"], seed).row())
            except (ValueError, RuntimeError) as exc:
                rows.append(dict(n=n, status=f"error: {exc}"))
    elif name == "value-convergence":
        pair = build_payoff(cfg.payoff)
        try:
            rows = value_convergence(model, law, pair, run["N_list"], run["node_cap"]).rows()
        except (ValueError, RuntimeError) as exc:
            rows = [dict(N=N, status=f"error: {exc}") for N in run["N_list"]]
    if name in ("strong-error", "coarse-error"):
        pts = [(r["N"], r["estimate"], r["std_error"]) for r in rows if r.get("status") == "ok"]
        try:
            rs = rate_regression(pts)
            rate = [dict(rs.row(), status="ok")]
        except ValueError as exc:
            rate = [dict(points=len(pts), status=f"error: {exc}")]
    return rows, rate


def cmd_study(cfg: RunConfig, run: dict, out: Path) -> tuple:
    if not run["N_list"]:
        raise ConfigError("'run.N_list' must be nonempty")
    studies = list(run["studies"])
    # studies run concurrently; each owns its own files
    with ThreadPoolExecutor(max_workers=max(1, min(run["jobs"], len(studies)))) as ex:
        results = list(ex.map(lambda s: _study_rows(s, cfg, run), studies))
    files = []
    for name, (rows, rate) in zip(studies, results):
        _write(out / f"{name}.csv", rows_to_csv(name, rows))
        files.append(f"{name}.csv")
        bad = sum(1 for r in rows if r.get("status") != "ok")
        print(f"{name}: {len(rows)} rows, {bad} errors")
        if rate is not None:
            _write(out / f"{name}-rate.csv", rows_to_csv(f"{name}-rate", rate))
            files.append(f"{name}-rate.csv")
            r = rate[0]
            if r["status"] == "ok":
                print(f"{name}: slope {r['slope']:.4f} r2 {r['r2']:.4f}")
    return EXIT_OK, files


# --------------------------------------------------------------------------- #
# Entry point
# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gamechain",
                                description="Game-option pricing on a discrete-time chain.")
    p.add_argument("--version", action="version", version=f"gamechain {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate", "check model, law and payoff assumptions"),
                        ("price", "price a game option by backward recursion"),
                        ("study", "run diagnostic studies over N")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int, help="override run.seed")
        s.add_argument("--out", type=Path, help="override run.out")
        s.add_argument("--jobs", type=int, help="worker threads for replications")
        if name == "price":
            s.add_argument("--oracle", action="store_true",
                           help="cross-check against exhaustive stopping-time enumeration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    run = cfg.resolved_run()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_INVALID
        run["seed"] = args.seed
    if args.jobs is not None:
        run["jobs"] = max(1, args.jobs)
    out = args.out if args.out is not None else Path(run["out"])
    run["out"] = str(out)
    files = []
    try:
        if args.command == "validate":
            status, files = cmd_validate(cfg, run, out)
        elif args.command == "price":
            status, files = cmd_price(cfg, run, out, args.oracle)
        else:
            status, files = cmd_study(cfg, run, out)
    except (ConfigError, UnsupportedLawError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        status = EXIT_INFEASIBLE
    except PayoffEvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_INTERNAL
    try:
        _manifest(out, args.command, cfg, run, started, status, files)
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_INTERNAL if status == EXIT_OK else status
    return status


if __name__ == "__main__":
    sys.exit(main())
