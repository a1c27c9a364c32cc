"""Command-line operator surface.

Subcommands: run (the full loop), report (tables from a ledger), sweep
(threshold sensitivity), correlate (rank correlation of paired scores),
diff-apply / diff-make (standalone patch tools), dedup-score (novelty of
a file against a signature corpus).

Exit status: 0 on success, 1 for usage or configuration problems, 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import novelty
from .admission import PER_DATASET
from .config import apply_overrides, load_config
from .diffs import DiffError, apply_diff, compute_diff, parse_diff, render_diff
from .errors import BadConfig, PatchLoopError
from .ledger import read_ledger
from .pipeline import run_pipeline
from .render import render_report, render_sweep
from .stats import (
    DEFAULT_TAU_GRID,
    StatsError,
    kendall_tau,
    spearman,
    tau_sweep,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchloop")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the search loop")
    run.add_argument("--config", required=True, help="run config JSON")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--cycles", type=int, default=None)
    run.add_argument("--per-cycle", type=int, default=None)
    run.add_argument("--tau", type=float, default=None, help="fixed accuracy threshold")
    run.add_argument("--tau-nov", type=float, default=None)
    run.add_argument("--policy", choices=["fixed", "per-dataset"], default=None)
    run.add_argument("--timeout-secs", type=float, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--replay", default=None, help="replay file overriding the generator")
    run.add_argument("--endpoint", default=None, help="HTTP generator endpoint")
    run.add_argument("--resume", action="store_true")

    report = sub.add_parser("report", help="render tables from a ledger")
    report.add_argument("ledger")
    report.add_argument("--tau", type=float, default=0.40)
    report.add_argument("--policy", choices=["fixed", "per-dataset"], default="fixed")
    report.add_argument("--json", dest="json_out", default=None)

    sweep = sub.add_parser("sweep", help="admission rate across thresholds")
    sweep.add_argument("ledger")
    sweep.add_argument(
        "--taus", default=None, help="comma-separated thresholds, e.g. 0.25,0.40"
    )

    correlate = sub.add_parser("correlate", help="rank correlation of paired scores")
    correlate.add_argument("pairs", help="file with one 'x y' pair per line")

    diff_apply = sub.add_parser("diff-apply", help="apply a unified diff to a file")
    diff_apply.add_argument("source")
    diff_apply.add_argument("patch")
    diff_apply.add_argument("--fuzz", type=int, default=0)

    diff_make = sub.add_parser("diff-make", help="unified diff between two files")
    diff_make.add_argument("old")
    diff_make.add_argument("new")

    dedup = sub.add_parser(
        "dedup-score", help="novelty of a file against a signature corpus"
    )
    dedup.add_argument("file")
    dedup.add_argument("--corpus", required=True, help="signature JSONL")

    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    config = apply_overrides(
        config,
        global_seed=args.seed,
        cycles=args.cycles,
        per_cycle=args.per_cycle,
        tau_acc=args.tau,
        tau_nov=args.tau_nov,
        policy_mode=PER_DATASET if args.policy == "per-dataset" else args.policy,
        timeout_secs=args.timeout_secs,
        eval_workers=args.workers,
        replay=args.replay,
        endpoint=args.endpoint,
    )
    report = run_pipeline(config, resume=args.resume)
    sys.stdout.write(render_report(report.to_json_dict()))
    sys.stdout.write(f"Report written to {config.report_path}\n")
    return EXIT_OK


def _load_report_dict(args) -> dict | None:
    from .admission import ThresholdPolicy
    from .stats import aggregate_run

    records = read_ledger(args.ledger)
    if not records:
        return None
    if args.policy == "per-dataset":
        policy = ThresholdPolicy.preset("khalid-v7-extended")
    else:
        policy = ThresholdPolicy.fixed(args.tau)
    return aggregate_run(records, tau=args.tau, policy=policy).to_json_dict()


def _cmd_report(args) -> int:
    report = _load_report_dict(args)
    if report is None:
        sys.stdout.write("no records\n")
        return EXIT_OK
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    sys.stdout.write(render_report(report))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    records = read_ledger(args.ledger)
    pool = [r.accuracy for r in records if r.accuracy is not None]
    if not pool:
        sys.stdout.write("no records\n")
        return EXIT_OK
    taus = DEFAULT_TAU_GRID
    if args.taus:
        taus = tuple(float(part) for part in args.taus.split(","))
    sys.stdout.write(render_sweep(tau_sweep(pool, taus)))
    return EXIT_OK


def _read_pairs(path: str) -> list[tuple[float, float]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip().replace(",", " ")
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise BadConfig(f"pairs file: expected two values per line, got {line!r}")
            pairs.append((float(parts[0]), float(parts[1])))
    return pairs


def _cmd_correlate(args) -> int:
    pairs = _read_pairs(args.pairs)
    rho, p_value = spearman(pairs)
    tau = kendall_tau(pairs)
    sys.stdout.write(f"spearman_rho {rho:.4f}\n")
    sys.stdout.write(f"spearman_p {p_value:.4f}\n")
    sys.stdout.write(f"kendall_tau {tau:.4f}\n")
    return EXIT_OK


def _cmd_diff_apply(args) -> int:
    source = Path(args.source).read_text(encoding="utf-8")
    patch = Path(args.patch).read_text(encoding="utf-8")
    sys.stdout.write(apply_diff(source, parse_diff(patch), fuzz=args.fuzz))
    return EXIT_OK


def _cmd_diff_make(args) -> int:
    old = Path(args.old).read_text(encoding="utf-8")
    new = Path(args.new).read_text(encoding="utf-8")
    diff = compute_diff(old, new, old_name=args.old, new_name=args.new)
    sys.stdout.write(render_diff(diff))
    return EXIT_OK


def _cmd_dedup_score(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    index = novelty.CorpusIndex.load_jsonl(args.corpus)
    sig = novelty.signature(novelty.shingle(text), index.permutation_seed)
    score = novelty.novelty_score(sig, index)
    sys.stdout.write(f"{score:.4f}\n")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "report": _cmd_report,
    "sweep": _cmd_sweep,
    "correlate": _cmd_correlate,
    "diff-apply": _cmd_diff_apply,
    "diff-make": _cmd_diff_make,
    "dedup-score": _cmd_dedup_score,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BadConfig as exc:
        sys.stderr.write(f"patchloop: config error: {exc}\n")
        return EXIT_USAGE
    except (DiffError, StatsError, PatchLoopError) as exc:
        sys.stderr.write(f"patchloop: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    except OSError as exc:
        sys.stderr.write(f"patchloop: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
