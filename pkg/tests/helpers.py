"""Shared test machinery: replay-file builders and canned completions.

The replay builder runs a twin of the pipeline's own bookkeeping: same
per-cycle seeds, same draw order, same admission gates (echo-worker
scores, novelty index, thresholds), and the same pool growth at cycle
boundaries.  Recorded deltas therefore land on the baseline the real run
will pick at that position, keeping the valid rate near the requested
share for the whole run instead of collapsing once admissions start
reshaping the pool.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from patchloop.admission import FailureClass, ThresholdPolicy, accuracy_threshold, decide
from patchloop.baselines import load_bundled
from patchloop.diffs import compute_diff, render_diff
from patchloop.echo_worker import score as echo_score
from patchloop.novelty import CorpusIndex, novelty_score, shingle, signature
from patchloop.pipeline import derive_cycle_seed, derive_eval_seed, sample_baseline
from patchloop.records import GENERATED, CandidateRecord, CorpusEntry, EvalResult


def wrap_completion(delta_body: str, hp: str | None = None, tr: str | None = None) -> str:
    parts = ["Here is a refinement."]
    if hp is not None:
        parts.append(f"<hp>\n{hp}\n</hp>")
    if tr is not None:
        parts.append(f"<tr>\n{tr}\n</tr>")
    parts.append(f"<delta>\n{delta_body}\n</delta>")
    return "\n".join(parts)


def mutate_source(source: str, variant: int, breaking: bool = False) -> str:
    """Insert one plausible layer line after the last constructor line.

    ``breaking`` instead inserts a line that cannot compile, for
    exercising the evaluator's syntax gate.
    """
    lines = source.split("\n")
    anchor = max(
        i for i, line in enumerate(lines) if line.strip().startswith("self.")
    )
    if breaking:
        new_line = "        def (broken"
    else:
        rate = (variant % 9 + 1) / 20
        new_line = f"        self.extra{variant} = nn.Dropout({rate})"
    return "\n".join(lines[: anchor + 1] + [new_line] + lines[anchor + 1 :])


def delta_for(baseline_source: str, variant: int, breaking: bool = False) -> str:
    mutated = mutate_source(baseline_source, variant, breaking=breaking)
    return render_diff(compute_diff(baseline_source, mutated))


MALFORMED_KINDS = (
    "missing_tag",
    "unclosed_tag",
    "duplicate_tag",
    "bad_hunk",
    "wrong_context",
    "out_of_range",
)


def malformed_completion(kind: str) -> str:
    if kind == "missing_tag":
        return "I could not produce a structured patch this time."
    if kind == "unclosed_tag":
        return "<delta>\n--- a\n+++ b\n@@ -1 +1 @@\n-x\n+y"
    if kind == "duplicate_tag":
        body = "--- a\n+++ b\n@@ -1 +1 @@\n-x\n+y"
        return f"<delta>\n{body}\n</delta>\n<delta>\n{body}\n</delta>"
    if kind == "bad_hunk":
        return wrap_completion("--- a\n+++ b\n@@ broken header @@\n-x\n+y")
    if kind == "wrong_context":
        body = (
            "--- a\n+++ b\n@@ -3,3 +3,4 @@\n"
            " import nothing\n here = True\n+inserted = 1\n done()"
        )
        return wrap_completion(body)
    if kind == "out_of_range":
        body = "--- a\n+++ b\n@@ -900,2 +900,3 @@\n x\n+y\n z"
        return wrap_completion(body)
    raise ValueError(kind)


def build_replay(
    path: Path,
    cycles: int,
    per_cycle: int,
    global_seed: int = 42,
    balanced: bool = False,
    valid_share: float = 0.7,
    breaking_share: float = 0.04,
    variant_period: int = 11,
    tau_nov: float = 0.90,
    policy: ThresholdPolicy | None = None,
) -> Path:
    """Write a replay JSONL for a run of ``cycles`` x ``per_cycle``."""
    if policy is None:
        policy = ThresholdPolicy.fixed(0.40)
    pool = list(load_bundled())
    corpus = CorpusIndex(permutation_seed=global_seed)
    hp_body = json.dumps({"batch": 64, "lr": 0.01, "momentum": 0.9})
    tr_body = "transforms.Compose([transforms.ToTensor()])"
    with open(path, "w", encoding="utf-8") as fh:
        for cycle in range(cycles):
            cycle_seed = derive_cycle_seed(global_seed, cycle)
            rng = random.Random(cycle_seed)
            chooser = random.Random(derive_cycle_seed(global_seed ^ 0x5EED, cycle))
            staged = []
            for index in range(per_cycle):
                baseline = sample_baseline(pool, rng, balanced)
                if chooser.random() < valid_share:
                    breaking = chooser.random() < breaking_share
                    variant = (cycle * per_cycle + index) % variant_period
                    patched = mutate_source(
                        baseline.source, variant, breaking=breaking
                    )
                    body = render_diff(compute_diff(baseline.source, patched))
                    text = wrap_completion(body, hp=hp_body, tr=tr_body)
                    if not breaking:
                        accuracy = echo_score(
                            patched, derive_eval_seed(cycle_seed, index)
                        )
                        if accuracy >= accuracy_threshold(baseline.dataset, policy):
                            sig = signature(shingle(patched), global_seed)
                            if novelty_score(sig, corpus) >= tau_nov:
                                entry = CorpusEntry(
                                    entry_id=f"gen-{cycle:04d}-{index:04d}",
                                    origin=GENERATED,
                                    patched_source=patched,
                                    dataset=baseline.dataset,
                                    accuracy=accuracy,
                                    signature_ref=f"gen-{cycle:04d}-{index:04d}",
                                    cycle_admitted=cycle,
                                    hp=baseline.hp,
                                    transform_ref=baseline.transform_ref,
                                )
                                staged.append((entry, sig))
                else:
                    kind = MALFORMED_KINDS[chooser.randrange(len(MALFORMED_KINDS))]
                    text = malformed_completion(kind)
                fh.write(
                    json.dumps(
                        {"cycle": cycle, "index": index, "output_text": text}
                    )
                    + "\n"
                )
            for entry, sig in staged:
                corpus.add(entry.entry_id, sig)
                pool.append(entry.as_baseline())
    return path


# Accuracy pool whose >=tau counts over the standard threshold grid are
# 760, 718, 648, 627, 625, 610, 532, 481 out of 828, with mean 0.658 and
# best 0.995.  Rates and intervals over it are frozen in the tests.
TABLE4_SPEC = (
    (68, 0.10),
    (42, 0.27),
    (70, 0.32),
    (21, 0.37),
    (2, 0.42),
    (15, 0.47),
    (78, 0.52),
    (51, 0.57),
    (480, 0.871),
    (1, 0.995),
)


def table4_pool() -> list[float]:
    pool: list[float] = []
    for count, accuracy in TABLE4_SPEC:
        pool.extend([accuracy] * count)
    return pool


_TINY_OLD = "x = 0\n"
_TINY_NEW = "x = 1\n"
_TINY_DIFF = compute_diff(_TINY_OLD, _TINY_NEW)


def trained_record(
    cycle: int,
    index: int,
    accuracy: float,
    dataset: str = "cifar10",
    policy: ThresholdPolicy | None = None,
    tau_nov: float = 0.90,
    novelty: float = 1.0,
    lines: int | None = 9,
) -> CandidateRecord:
    """Ledger entry for a candidate that applied cleanly and evaluated ok."""
    if policy is None:
        policy = ThresholdPolicy.fixed(0.40)
    decision = decide(accuracy, dataset, novelty, policy, tau_nov=tau_nov)
    return CandidateRecord(
        candidate_id=f"cand-{cycle:04d}-{index:04d}",
        cycle=cycle,
        index=index,
        baseline_id="lemur-cifar10-small",
        dataset=dataset,
        raw_output="<delta>\n@@ -1 +1 @@\n-x = 0\n+x = 1\n</delta>",
        delta=_TINY_DIFF,
        patched_source=_TINY_NEW,
        eval=EvalResult(status="ok", accuracy=accuracy, failure=None, wall_seconds=0.0),
        decision=decision,
        failure=decision.failure,
        lines=lines,
    )


def apply_failure_record(
    cycle: int,
    index: int,
    failure: FailureClass = FailureClass.APPLY_MALFORMED_PATCH,
    dataset: str = "cifar10",
    lines: int | None = None,
) -> CandidateRecord:
    """Ledger entry for a candidate that never cleared the apply phase."""
    return CandidateRecord(
        candidate_id=f"cand-{cycle:04d}-{index:04d}",
        cycle=cycle,
        index=index,
        baseline_id="lemur-cifar10-small",
        dataset=dataset,
        raw_output="no structured patch here",
        delta=None,
        patched_source=None,
        eval=None,
        decision=None,
        failure=failure,
        lines=lines,
    )


def eval_failure_record(
    cycle: int,
    index: int,
    failure: FailureClass = FailureClass.SYNTAX_ERROR,
    dataset: str = "cifar10",
    lines: int | None = 9,
) -> CandidateRecord:
    """Ledger entry for a candidate whose evaluation failed."""
    return CandidateRecord(
        candidate_id=f"cand-{cycle:04d}-{index:04d}",
        cycle=cycle,
        index=index,
        baseline_id="lemur-cifar10-small",
        dataset=dataset,
        raw_output="<delta>\n@@ -1 +1 @@\n-x = 0\n+x = 1\n</delta>",
        delta=_TINY_DIFF,
        patched_source=_TINY_NEW,
        eval=EvalResult(
            status="failed", accuracy=None, failure=failure, wall_seconds=0.0
        ),
        decision=None,
        failure=failure,
        lines=lines,
    )


def write_config(
    path: Path,
    replay: Path,
    out_dir: Path,
    cycles: int,
    per_cycle: int,
    **extra,
) -> Path:
    data = {
        "out_dir": str(out_dir),
        "generator": {"replay": str(replay)},
        "cycles": cycles,
        "per_cycle": per_cycle,
    }
    data.update(extra)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path
