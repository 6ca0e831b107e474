"""Command line entry point: ``qgram-art simulate | webgen | report``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from . import simulation as sim
from . import stats
from .navmodel import bundled_models
from .webgen import TECHNIQUES, TechniqueConfig, run_campaign, write_campaign

log = logging.getLogger("qgram_art")

SIM_FIELDS = ("strategy", "L", "theta_nominal", "measure", "value", "rse", "reps", "seed",
              "distance_calls", "diversity_evals")
REPORT_METRICS = ("coverage_pct", "auc", "auc_at_20", "unique_targets", "exec_tests", "mean_length")


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="ART vs random testing on the palindrome simulation")
    p.add_argument("--L", type=int, default=100, help="maximum string length")
    p.add_argument("--strategy", choices=("rand", "dist", "qgram"), default="rand")
    p.add_argument("--measure", choices=("P", "F", "T"), default="F")
    p.add_argument("--delay-ms", type=float, default=0.0, help="delay injected into each execution")
    p.add_argument("--W", type=int, default=10, help="candidate set size")
    p.add_argument("--Q", type=int, default=2, help="q-gram length")
    p.add_argument("--mode", default="characters")
    p.add_argument("--diversity", choices=("entropy", "gini"), default="entropy")
    p.add_argument("--failure-model", default="length1",
                   help="length1, always, never or qgram-region:<prefix>:<maxlen>")
    p.add_argument("--alphabet", default=sim.DEFAULT_ALPHABET)
    p.add_argument("--n-tests", type=int, default=50, help="test budget of the P measure")
    p.add_argument("--rse-threshold", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=None, help="fixed repetitions instead of the RSE rule")
    p.add_argument("--max-reps", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help=".csv or .json output path (default: stdout CSV)")
    p.set_defaults(func=cmd_simulate)


def _add_webgen(sub):
    p = sub.add_parser("webgen", help="test generation campaign over navigation models")
    p.add_argument("--models", nargs="+", default=None,
                   help="model files, directories or bundled names (default: all bundled)")
    p.add_argument("--techniques", default=",".join(TECHNIQUES))
    p.add_argument("--reps", type=int, default=5)
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--max-executions", type=int, default=None)
    budget.add_argument("--budget-secs", type=float, default=None)
    p.add_argument("--W", type=int, default=30)
    p.add_argument("--Q", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", type=Path, default=Path("webgen-out"))
    p.set_defaults(func=cmd_webgen)


def _add_report(sub):
    p = sub.add_parser("report", help="pairwise Wilcoxon p-values and A12 from a campaign summary")
    p.add_argument("summary", type=Path, help="summary.csv written by webgen")
    p.add_argument("--metrics", default=",".join(REPORT_METRICS))
    p.add_argument("--out", type=Path, default=None, help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_report)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qgram-art", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_webgen(sub)
    _add_report(sub)
    return ap


def cmd_simulate(args) -> int:
    config = sim.SimConfig(L=args.L, strategy=args.strategy, failure_model=args.failure_model, W=args.W,
                           Q=args.Q, mode=args.mode, diversity=args.diversity, delay=args.delay_ms / 1000.0,
                           alphabet=args.alphabet, seed=args.seed)
    theta = config.theta()
    common = dict(reps=args.reps, threshold=args.rse_threshold, max_reps=args.max_reps, workers=args.workers)
    if args.measure == "P":
        rec = sim.measure_P(config, n_tests=args.n_tests, **common)
    elif args.measure == "F":
        rec = sim.measure_F(config, **common)
    else:
        rec = sim.measure_T(config, **common)
    if args.reps is None and rec.flagged:
        log.warning("RSE %.4f did not fall below %.4f within %d repetitions",
                    rec.rse, args.rse_threshold, rec.repetitions)
    row = {"strategy": args.strategy, "L": args.L, "theta_nominal": theta, "measure": args.measure,
           "value": rec.value, "rse": rec.rse, "reps": rec.repetitions, "seed": args.seed,
           "distance_calls": rec.distance_calls, "diversity_evals": rec.diversity_evals}
    if args.out is not None and args.out.suffix == ".json":
        args.out.write_text(json.dumps({**row, "samples": rec.samples, "censored": rec.censored}, indent=2))
    else:
        _write_rows([row], SIM_FIELDS, args.out)
    return 0


def cmd_webgen(args) -> int:
    names = [t.strip() for t in args.techniques.split(",") if t.strip()]
    budget = {"max_executions": args.max_executions, "budget_secs": args.budget_secs}
    if args.max_executions is None and args.budget_secs is None:
        budget["max_executions"] = 2000
    if args.budget_secs is not None:
        budget["max_executions"] = None
    techs = [TechniqueConfig(n, W=args.W, Q=args.Q, **budget) for n in names]
    models = args.models
    if models is None:
        models = bundled_models()
    campaign = run_campaign(models, techs, repetitions=args.reps, seed=args.seed, workers=args.workers)
    out = write_campaign(campaign, args.out_dir)
    for m in campaign.models():
        for t in campaign.techniques():
            log.info("%s %s coverage %.1f%% auc %.3f", m, t, campaign.mean(m, t, "coverage_pct"),
                     campaign.mean(m, t, "auc"))
    print(out / "summary.csv")
    for name, err in campaign.errors.items():
        print(f"error: {name}: {err}", file=sys.stderr)
    return 1 if campaign.errors and not campaign.cells else 0


def pairwise_report(rows, metrics=REPORT_METRICS) -> list[dict]:
    """Wilcoxon p-value and A12 for every technique pair, per model and metric."""
    groups = defaultdict(list)
    for row in rows:
        groups[(row["model"], row["technique"])].append(row)
    out = []
    models = sorted({m for m, _ in groups})
    for model in models:
        techs = [t for m, t in groups if m == model]
        for a, b in itertools.combinations(techs, 2):
            for metric in metrics:
                x = [float(r[metric]) for r in groups[(model, a)]]
                y = [float(r[metric]) for r in groups[(model, b)]]
                test = stats.wilcoxon_rank_sum(x, y)
                eff = stats.vargha_delaney(x, y)
                out.append({"model": model, "metric": metric, "technique_a": a, "technique_b": b,
                            "mean_a": sum(x) / len(x), "mean_b": sum(y) / len(y), "p_value": test.p_value,
                            "method": test.method, "a12": eff.a12, "magnitude": eff.magnitude})
    return out


def cmd_report(args) -> int:
    with open(args.summary, newline="") as fh:
        rows = list(csv.DictReader(fh))
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    report = pairwise_report(rows, metrics)
    fields = ("model", "metric", "technique_a", "technique_b", "mean_a", "mean_b", "p_value", "method",
              "a12", "magnitude")
    _write_rows(report, fields, args.out)
    return 0


def _write_rows(rows, fields, path):
    fh = open(path, "w", newline="") if path is not None else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    finally:
        if path is not None:
            fh.close()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
