"""Command-line entry point: ``trajsanitize <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from trajsanitize.errors import ConfigError, ParseError, SanitizeError, UndefinedStatisticsError
from trajsanitize.evaluation import evaluate
from trajsanitize.mechanism import MOST_FREQUENT, STRATEGIES
from trajsanitize.pipeline import ALLOCATORS, RunConfig, allocations_for, prepare, run, run_baseline, sweep
from trajsanitize.regions import read_sensitive_sets, regions_from_audit
from trajsanitize.stats import DEFAULT_GUESS_FLOOR, CorrelationStats, build_stats
from trajsanitize.synthetic import gen_synthetic, write_sensitive
from trajsanitize.trajectory import (
    DEFAULT_DELTA_SPEED,
    DEFAULT_SESSION_GAP,
    parse_checkins,
    read_trajectories,
    segment_trajectories,
    write_checkins,
    write_trajectories,
)

log = logging.getLogger("trajsanitize")

EXIT_PARSE, EXIT_CONFIG, EXIT_STATS, EXIT_OTHER = 2, 3, 4, 1


def _load_dataset(args):
    with open(args.checkins, encoding="utf-8") as fh:
        checkins, diags = parse_checkins(fh, strict=args.strict)
    for d in diags:
        log.warning("skipped line %d: %s", d.line_no, d.reason)
    return segment_trajectories(checkins, args.session_gap)


def _load_sensitive(path):
    with open(path, encoding="utf-8") as fh:
        return read_sensitive_sets(fh)


def _config(args) -> RunConfig:
    return RunConfig(
        epsilon=args.epsilon,
        delta_speed=args.delta_speed,
        session_gap=args.session_gap,
        allocator=args.allocator,
        strategy=args.strategy,
        guess_floor=args.guess_floor,
        seed=args.seed,
    )


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, ensure_ascii=False)
        fh.write("\n")


def _prepare(args):
    dataset = _load_dataset(args)
    config = _config(args)
    stats = None
    if getattr(args, "stats", None):
        with open(args.stats, encoding="utf-8") as fh:
            stats = CorrelationStats.from_json(json.load(fh))
    regions = None
    if getattr(args, "regions", None):
        with open(args.regions, encoding="utf-8") as fh:
            regions = regions_from_audit(json.load(fh)["regions"], dataset)
    return prepare(dataset, _load_sensitive(args.sensitive), config, stats, regions), config


def cmd_ingest(args) -> None:
    dataset = _load_dataset(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_trajectories(dataset.trajectories, fh)
    if args.stats_out:
        with open(args.stats_out, "w", encoding="utf-8") as fh:
            build_stats(dataset, args.guess_floor).dump(fh)
    log.info("%d trajectories from %d users", len(dataset.trajectories), dataset.user_count)


def _audit(plan) -> dict:
    entries = []
    for key in sorted(plan.candidate_sets):
        for cs in plan.candidate_sets[key]:
            entries.append({**cs.region.to_json(), "K": cs.K})
    return {"regions": entries}


def cmd_sanitize(args) -> None:
    plan, config = _prepare(args)
    result = run_baseline(plan, config) if args.baseline else run(plan, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_trajectories(result.sanitized.trajectories, fh)
    if args.report:
        _write_json(args.report, result.report.to_json())
    if args.regions_out:
        _write_json(args.regions_out, _audit(plan))
    log.info("total DKL %.6f, outcomes %s", result.report.total_dkl, result.report.outcome_counts)


def cmd_evaluate(args) -> None:
    plan, config = _prepare(args)
    with open(args.sanitized, encoding="utf-8") as fh:
        sanitized = plan.dataset.with_trajectories(read_trajectories(fh))
    allocations = None if args.baseline else allocations_for(plan, config.epsilon, config.allocator)
    params = {**config.params(), **({"allocator": "baseline"} if args.baseline else {})}
    report = evaluate(plan.dataset, sanitized, plan.candidate_sets, allocations, config.strategy,
                      plan.index, params=params, seed=config.seed)
    _write_json(args.report, report.to_json())


def cmd_sweep(args) -> None:
    plan, config = _prepare(args)
    epsilons = [float(x) for x in args.epsilons.split(",") if x.strip()]
    rows = sweep(plan, config, epsilons, args.trials)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "allocator", "mean_total_dkl", "mean_trajsim", "se_trajsim", "trials"])
        for r in rows:
            w.writerow([r.epsilon, r.allocator, repr(r.mean_dkl), repr(r.mean_trajsim), repr(r.se_trajsim), args.trials])


def cmd_gen_synthetic(args) -> None:
    corpus = gen_synthetic(
        users=args.users, pois=args.pois, traj_per_user=args.traj_per_user,
        sensitive_fraction=args.sensitive_fraction, seed=args.seed, traj_len=args.traj_len,
    )
    with open(args.out_checkins, "w", encoding="utf-8") as fh:
        write_checkins(corpus.checkins, fh)
    with open(args.out_sensitive, "w", encoding="utf-8") as fh:
        write_sensitive(corpus.sensitive, fh)


def _add_input(p, sensitive=True):
    p.add_argument("--checkins", required=True, type=Path, help="check-in TSV")
    if sensitive:
        p.add_argument("--sensitive", required=True, type=Path, help="user_id<TAB>location_id TSV")
    p.add_argument("--session-gap", type=float, default=DEFAULT_SESSION_GAP)
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")


def _add_run(p):
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta-speed", type=float, default=DEFAULT_DELTA_SPEED, help="max speed, m/s")
    p.add_argument("--allocator", choices=ALLOCATORS, default="br")
    p.add_argument("--strategy", choices=STRATEGIES, default=MOST_FREQUENT)
    p.add_argument("--guess-floor", type=float, default=DEFAULT_GUESS_FLOOR)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", type=Path, help="reuse a stats dump instead of recounting")
    p.add_argument("--regions", type=Path, help="reuse a region audit instead of re-detecting")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="trajsanitize", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="segment check-ins into a trajectory TSV")
    _add_input(p, sensitive=False)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--stats-out", type=Path)
    p.add_argument("--guess-floor", type=float, default=DEFAULT_GUESS_FLOOR)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sanitize", parents=[common], help="replace sensitive regions")
    _add_input(p)
    _add_run(p)
    p.add_argument("--baseline", action="store_true", help="publish the suppression baseline instead")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--report", type=Path)
    p.add_argument("--regions-out", type=Path)
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("evaluate", parents=[common], help="utility report for a sanitized trajectory file")
    _add_input(p)
    _add_run(p)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--sanitized", required=True, type=Path)
    p.add_argument("--report", required=True, type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="average metrics over budgets and allocators")
    _add_input(p)
    _add_run(p)
    p.add_argument("--epsilons", default="0.1,0.3,0.5,0.7")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic corpus")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--pois", type=int, default=100)
    p.add_argument("--traj-per-user", type=int, default=10)
    p.add_argument("--traj-len", type=int, default=10)
    p.add_argument("--sensitive-fraction", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-checkins", required=True, type=Path)
    p.add_argument("--out-sensitive", required=True, type=Path)
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ParseError as exc:
        print(f"error[parse]: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UndefinedStatisticsError as exc:
        print(f"error[statistics]: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (SanitizeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return 0


if __name__ == "__main__":
    sys.exit(main())
