"""Command-line entry point: ``evasim {run,trial,latin,stats,validate}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import EPOCHS, ConfigError, load_config
from .harness.design import CONDITIONS, build_plan, latin_square
from .harness.experiment import analysis_epoch, calibration_checks, run_experiment
from .harness.report import emit_outputs
from .harness.trial import TrialDivergence, run_trial
from .metrics import trial_metrics
from .stats import ComparisonPolicy, Sample, StatsError, compare_groups

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

log = logging.getLogger("evasim")


def _common(p: argparse.ArgumentParser, out: bool = True):
    p.add_argument("--config", help="YAML config file (defaults apply for missing keys)")
    p.add_argument("--seed", type=int, help="master seed, overrides experiment.master_seed")
    p.add_argument("--epoch", choices=EPOCHS, help="zero point for response times")
    if out:
        p.add_argument("--out", default="out", help="output directory (default: out)")


def _load(args):
    return load_config(args.config).with_overrides(seed=args.seed, epoch=args.epoch)


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_experiment(cfg, jobs=args.jobs)
    emit_outputs(report, args.out)
    checks = calibration_checks(report)
    for k, v in checks.items():
        print(f"{k}: {v}")
    print(f"wrote outputs to {args.out}")
    if report.failures:
        for f in report.failures:
            print(f"FAILED: {f}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_trial(args) -> int:
    cfg = _load(args)
    if args.condition not in CONDITIONS:
        raise ConfigError(f"condition must be one of {sorted(CONDITIONS)}")
    plan = build_plan(cfg.experiment.master_seed, cfg.experiment.n_subjects, cfg.agents)
    if not 1 <= args.subject <= len(plan.subjects):
        raise ConfigError(f"subject must be in 1..{len(plan.subjects)}")
    profile = plan.subjects[args.subject - 1]
    trace = run_trial(CONDITIONS[args.condition], profile, cfg)
    m = trial_metrics(trace, cfg.vehicle, cfg.analysis.swa_threshold_deg, analysis_epoch(cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{trace.meta['trial_id']}.csv"
    path.write_text(trace.to_csv())
    print(json.dumps({"trial_id": trace.meta["trial_id"], **m.__dict__}, indent=2))
    print(f"trace written to {path}")
    return EXIT_OK


def cmd_latin(args) -> int:
    if args.n < 1:
        raise ConfigError("n must be >= 1")
    for row in latin_square(args.n):
        print(" ".join(str(v) for v in row))
    return EXIT_OK


def _column(rows, name):
    try:
        return [float(r[name]) for r in rows if r[name] != ""]
    except KeyError:
        raise ConfigError(f"no column {name!r} in CSV") from None


def cmd_stats(args) -> int:
    cfg = load_config(args.config)
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    a, b = _column(rows, args.column_a), _column(rows, args.column_b)
    try:
        res = compare_groups(Sample(a, args.column_a), Sample(b, args.column_b), ComparisonPolicy(cfg.analysis.alpha))
    except StatsError as exc:
        print(f"comparison not possible: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"test: {res.test_name}")
    print(f"statistic: {res.statistic!r}")
    print(f"p_value: {res.p_value!r}")
    for name, p in res.provenance:
        print(f"  {name}: p={p!r}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"config ok (sha256 {cfg.digest()})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evasim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full 12-subject x 7-condition experiment")
    _common(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical for any value)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trial", help="run one subject x condition trial")
    _common(p)
    p.add_argument("--subject", type=int, required=True)
    p.add_argument("--condition", type=int, required=True)
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("latin", help="print a counterbalanced Latin square")
    p.add_argument("n", type=int, nargs="?", default=6)
    p.set_defaults(func=cmd_latin)

    p = sub.add_parser("stats", help="compare two columns of a CSV with the analysis pipeline")
    p.add_argument("csv")
    p.add_argument("column_a")
    p.add_argument("column_b")
    p.add_argument("--config")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", help="check a config file")
    _common(p, out=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrialDivergence as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
