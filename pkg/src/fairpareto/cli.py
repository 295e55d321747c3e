"""Command-line entry points: search, eval-embeddings, pareto, report,
reeval.

Exit codes: 0 success, 2 configuration/usage error, 3 backend failure
(a search or re-evaluation that produced zero successful results).
Diagnostics go to stderr at the level set by FAIRPARETO_LOG
(error|info|debug).
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from fairpareto import metrics as fm
from fairpareto import pareto as ps
from fairpareto.backends import (BackendError, BackendFailure, BuiltinBackend,
                                 parse_backend)
from fairpareto.records import (STATUS_FAILED, STATUS_REPORTED, TrialRecord,
                                highest_fidelity_per_config)
from fairpareto.runlog import RunLog, load_many, load_records
from fairpareto.search import SearchBudget, extract_front, run_search
from fairpareto.space import config_key, get_space

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}


def _setup_logging() -> None:
    raw = os.environ.get("FAIRPARETO_LOG", "error").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        level = logging.ERROR
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if raw not in _LOG_LEVELS and raw:
        log.error("unknown FAIRPARETO_LOG value %r; using 'error'", raw)


def _fmt(value: float | None) -> str:
    return "undefined" if value is None else repr(float(value))


# ---------------------------------------------------------------------------
# search

def _record_point(record: TrialRecord) -> ps.AggregatedPoint:
    names = sorted(record.objectives)
    return ps.AggregatedPoint(
        config_key=config_key(record.config),
        mean={k: float(record.objectives[k]) for k in names},
        standard_error={k: 0.0 for k in names},
        n_seeds=1)


def cmd_search(args) -> int:
    space = get_space(args.space)
    budget = SearchBudget(
        max_trials=args.budget_trials,
        max_fidelity_equivalents=args.budget_equivalents,
        wall_clock_limit_s=args.wall_clock_limit)
    backend = parse_backend(args.backend, space, args.max_fidelity)
    result = run_search(
        space, backend, budget,
        min_fidelity=args.min_fidelity, max_fidelity=args.max_fidelity,
        eta=args.eta, rho=args.rho, n_workers=args.workers, seed=args.seed,
        log_path=args.out)
    if result.n_reported == 0:
        log.error("no trial reported successfully; see %s", args.out)
        return EXIT_BACKEND
    names = list(result.objective_names)
    points = [_record_point(r) for r in result.front]
    ps.write_front_csv(sys.stdout, names, points, [True] * len(points))
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval-embeddings

def cmd_eval_embeddings(args) -> int:
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for name in wanted:
        if name not in fm.METRICS:
            raise fm.MetricError(
                f"unknown metric {name!r} (choose from {fm.METRICS})")
    embedding_set = fm.EmbeddingSet.load(args.file)
    report = fm.compute_ranks(embedding_set)
    scored = sorted(report.per_group)
    if len(scored) < 2:
        raise fm.MetricError(
            f"need at least two groups with scored probes, have {scored}")

    writer = csv.writer(sys.stdout)
    writer.writerow(["metric", "value"])
    if args.multi_group:
        for name in wanted:
            writer.writerow([name,
                             _fmt(fm.multi_group_metric(report, name,
                                                        scored).value)])
        return EXIT_OK
    if args.groups:
        pair = [g.strip() for g in args.groups.split(",")]
        if len(pair) != 2:
            raise fm.MetricError(
                f"--groups needs exactly two names, got {args.groups!r}")
        a, b = pair
    elif len(scored) == 2:
        a, b = scored
    else:
        raise fm.MetricError(
            f"{len(scored)} groups present; pass --groups A,B or --multi-group")
    for name in wanted:
        writer.writerow([name, _fmt(fm.fairness_metric(report, name,
                                                       a, b).value)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# pareto / report

def _load_filtered(run_paths, filter_expr: str | None,
                   needed_names) -> list[TrialRecord]:
    records = [r for r in load_many(run_paths) if r.status == STATUS_REPORTED]
    if not records:
        raise ps.ParetoError("run logs contain no reported records")
    seen_names = set()
    for r in records:
        seen_names.update(r.objectives)
    for name in needed_names:
        if name not in seen_names:
            raise ps.ParetoError(
                f"unknown objective {name!r}; logs have {sorted(seen_names)}")
    if filter_expr:
        clauses = ps.parse_filter(filter_expr)
        for name, _ in clauses:
            if name not in seen_names:
                raise ps.ParetoError(
                    f"filter references unknown objective {name!r}; "
                    f"logs have {sorted(seen_names)}")
        records = [r for r in records
                   if ps.passes_filter(r.objectives, clauses)]
        if not records:
            raise ps.ParetoError("filter excluded every record")
    return records


def cmd_pareto(args) -> int:
    names = [n.strip() for n in args.objectives.split(",") if n.strip()]
    if len(names) < 2:
        raise ps.ParetoError("need at least two objective names")
    records = _load_filtered(args.runs, args.filter, names)
    at_fidelity = args.at_fidelity if args.at_fidelity is not None \
        else max(r.fidelity for r in records)
    if args.aggregate_seeds:
        points = ps.aggregate_seeds(records, at_fidelity)
    else:
        points = [_record_point(r) for r in records
                  if r.fidelity == at_fidelity
                  and all(v is not None for v in r.objectives.values())]
    if not points:
        raise ps.ParetoError(
            f"no usable records at fidelity {at_fidelity}")
    vectors = [p.point(names) for p in points]
    mask = ps.non_dominated_mask(vectors)
    if args.out:
        ps.write_front_csv_path(args.out, names, points, list(mask))
        log.info("wrote %d rows (%d on front) to %s",
                 len(points), int(mask.sum()), args.out)
    else:
        ps.write_front_csv(sys.stdout, names, points, list(mask))
    return EXIT_OK


def cmd_report(args) -> int:
    names = [n.strip() for n in args.correlation.split(",") if n.strip()]
    if len(names) != 2:
        raise ps.ParetoError(
            f"--correlation needs exactly two objectives, got {args.correlation!r}")
    records = _load_filtered(args.runs, args.filter, names)
    representatives = [
        r for r in highest_fidelity_per_config(records)
        if all(r.objectives.get(n) is not None for n in names)]
    if len(representatives) < 2:
        raise ps.ParetoError(
            f"need at least 2 configurations with defined {names}, "
            f"have {len(representatives)}")
    xs = [float(r.objectives[names[0]]) for r in representatives]
    ys = [float(r.objectives[names[1]]) for r in representatives]
    rho = fm.pearson(xs, ys)
    writer = csv.writer(sys.stdout)
    writer.writerow(["objective_x", "objective_y", "pearson_rho", "n_points"])
    writer.writerow([names[0], names[1], _fmt(rho), len(representatives)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# reeval

def cmd_reeval(args) -> int:
    records = load_records(args.runs)
    front, _, front_names = extract_front(records)
    if not front:
        raise ps.ParetoError(f"{args.runs}: no front to re-evaluate")
    space = get_space(args.space) if args.space else None
    backend = parse_backend(args.backend, space, args.max_fidelity)
    if isinstance(backend, BuiltinBackend) and space is None:
        raise BackendError("builtin backends need --space")
    fidelity = front[0].fidelity
    next_id = max(r.trial_id for r in records) + 1
    fresh: list[TrialRecord] = []
    with RunLog(args.out) as out_log:
        for member in front:
            for s in range(args.seeds):
                seed = args.base_seed + s
                try:
                    result = backend.evaluate(member.config, fidelity, seed,
                                              trial_id=next_id)
                    record = TrialRecord(
                        trial_id=next_id, config=member.config, seed=seed,
                        fidelity=fidelity, status=STATUS_REPORTED,
                        objectives=result.objectives,
                        wall_time_s=result.wall_time_s)
                except BackendFailure as exc:
                    log.warning("re-evaluation of trial %d failed: %s",
                                next_id, exc)
                    record = TrialRecord(
                        trial_id=next_id, config=member.config, seed=seed,
                        fidelity=fidelity, status=STATUS_FAILED,
                        objectives=None, wall_time_s=0.0)
                out_log.append(record)
                fresh.append(record)
                next_id += 1
    points = ps.aggregate_seeds(fresh, fidelity)
    if not points:
        log.error("every re-evaluation failed")
        return EXIT_BACKEND
    names = list(front_names)
    vectors = [p.point(names) for p in points]
    mask = ps.non_dominated_mask(vectors)
    ps.write_front_csv(sys.stdout, names, points, list(mask))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairpareto",
        description="Multi-objective, multi-fidelity search for accurate "
                    "and fair face-identification models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run a multi-fidelity search")
    p.add_argument("--space", default="dpn_fair_v1",
                   help="preset name or search-space JSON file")
    p.add_argument("--backend", required=True,
                   help="builtin:NAME | worker:CMD | embeddings:TEMPLATE")
    p.add_argument("--min-fidelity", type=int, default=25)
    p.add_argument("--max-fidelity", type=int, default=100)
    p.add_argument("--eta", type=int, default=2)
    p.add_argument("--rho", type=float, default=0.05)
    p.add_argument("--budget-trials", type=int, default=None)
    p.add_argument("--budget-equivalents", type=float, default=None,
                   help="total fidelity budget in full-fidelity equivalents")
    p.add_argument("--wall-clock-limit", type=float, default=None,
                   help="seconds before the search stops dispatching")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run.jsonl", help="run log path")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval-embeddings",
                       help="fairness metrics for one embedding file")
    p.add_argument("--file", required=True)
    p.add_argument("--metrics", default=",".join(fm.METRICS))
    p.add_argument("--groups", default=None,
                   help="two group names: numerator,denominator")
    p.add_argument("--multi-group", action="store_true",
                   help="worst pairwise value over all groups")
    p.set_defaults(func=cmd_eval_embeddings)

    p = sub.add_parser("pareto", help="extract a Pareto front from run logs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--objectives", default="error,rank_disparity")
    p.add_argument("--aggregate-seeds", action="store_true")
    p.add_argument("--filter", default=None,
                   help="e.g. \"error < 0.3 && rank_disparity < 2\"")
    p.add_argument("--at-fidelity", type=int, default=None,
                   help="rung to read (default: highest present)")
    p.add_argument("--out", default=None, help="front CSV path (default stdout)")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("report", help="correlation between two objectives")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--correlation", default="error,rank_disparity")
    p.add_argument("--filter", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reeval",
                       help="re-evaluate front members under several seeds")
    p.add_argument("--runs", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--space", default=None)
    p.add_argument("--max-fidelity", type=int, default=100)
    p.add_argument("--seeds", type=int, default=4)
    p.add_argument("--base-seed", type=int, default=1000)
    p.add_argument("--out", required=True, help="log for re-evaluation records")
    p.set_defaults(func=cmd_reeval)

    return parser


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
