"""The search loop: sample, generate, patch, evaluate, admit, repeat.

One cycle draws per_cycle baselines from the sampling pool, asks the
generator for a delta against each, applies the delta, evaluates the
patched source in an isolated worker, and gates survivors on accuracy
then novelty.  Admissions are staged during the cycle and merged into the
corpus and the sampling pool only at the cycle boundary, so novelty within
a cycle is always measured against the corpus as it stood when the cycle
began.

Determinism contract: with a replay generator and a deterministic
evaluator, equal configs produce byte-identical ledgers, corpora and
reports.  Everything random flows from per-cycle seeds; nothing in the
persisted artifacts depends on wall time or host state.
"""

from __future__ import annotations

import json
import random
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import novelty
from .admission import FailureClass, accuracy_threshold, decide
from .baselines import load_bundled, load_manifest
from .config import PipelineConfig
from .diffs import (
    ContextMismatch,
    DiffError,
    OutOfRange,
    UnifiedDiff,
    apply_diff,
    parse_diff,
)
from .errors import BadConfig, EmptyPool, PatchLoopError
from .ledger import LedgerWriter, complete_cycles, read_ledger, truncate_to_cycles
from .records import (
    GENERATED,
    BaselineRecord,
    CandidateRecord,
    CorpusEntry,
    EvalRequest,
)
from .stats import CycleStats, RunReport, aggregate_cycle, aggregate_run
from .structured_output import TagError, parse_generator_output
from .workers import (
    EndpointError,
    EvaluatorRunner,
    GeneratorRequest,
    HttpClient,
    ReplayClient,
    ReplayExhausted,
    SpawnFailure,
    evaluate,
)

_MASK64 = (1 << 64) - 1


class GeneratorUnavailable(PatchLoopError):
    """The generator cannot produce the next completion; the cycle aborts."""


class EvaluatorSpawnFailure(PatchLoopError):
    """Worker processes cannot be started; the cycle aborts."""


def _mix64(x: int) -> int:
    """Finalizer of the splitmix64 generator: full-avalanche 64-bit mix."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_cycle_seed(global_seed: int, cycle: int) -> int:
    """Per-cycle seed: the cycle index is rotated into the upper word so
    small seeds and small cycle indexes never collide before mixing."""
    return _mix64((global_seed & _MASK64) ^ ((cycle & 0xFFFFFFFF) << 32))


def derive_eval_seed(cycle_seed: int, index: int) -> int:
    return _mix64(cycle_seed ^ (index + 1))


def sample_baseline(
    pool: list[BaselineRecord],
    rng: random.Random,
    balanced: bool = False,
) -> BaselineRecord:
    """Draw one baseline; balanced mode stratifies uniformly over datasets
    first, then uniformly within the chosen dataset."""
    if not pool:
        raise EmptyPool("sampling pool is empty")
    if not balanced:
        return pool[rng.randrange(len(pool))]
    datasets = sorted({b.dataset for b in pool})
    dataset = datasets[rng.randrange(len(datasets))]
    members = [b for b in pool if b.dataset == dataset]
    return members[rng.randrange(len(members))]


@dataclass
class PipelineState:
    """Mutable loop state: the sampling pool plus the admitted corpus."""

    pool: list[BaselineRecord]
    corpus_entries: list[CorpusEntry] = field(default_factory=list)
    corpus_index: novelty.CorpusIndex | None = None

    @classmethod
    def fresh(cls, pool: list[BaselineRecord], permutation_seed: int) -> "PipelineState":
        return cls(
            pool=list(pool),
            corpus_index=novelty.CorpusIndex(permutation_seed=permutation_seed),
        )


@dataclass(frozen=True, slots=True)
class _Prelim:
    """A candidate that has been generated, parsed and patched (or failed
    on the way), but not yet evaluated."""

    index: int
    baseline: BaselineRecord
    raw_output: str
    delta: UnifiedDiff | None
    patched_source: str | None
    failure: FailureClass | None
    lines: int | None


def make_generator_client(config: PipelineConfig):
    spec = config.generator
    if spec.replay_path is not None:
        try:
            return ReplayClient(spec.replay_path)
        except OSError as exc:
            raise GeneratorUnavailable(
                f"cannot open replay file {spec.replay_path}: {exc}"
            ) from exc
    return HttpClient(spec.endpoint)


def make_runner(config: PipelineConfig) -> EvaluatorRunner:
    return EvaluatorRunner(
        command=config.evaluator.resolved_command(),
        timeout_secs=config.evaluator.timeout_secs,
    )


def load_pool(config: PipelineConfig) -> list[BaselineRecord]:
    if config.baselines_manifest is not None:
        pool = load_manifest(config.baselines_manifest)
    else:
        pool = load_bundled()
    for baseline in pool:
        if baseline.dataset not in config.datasets:
            raise BadConfig(
                f"baselines: {baseline.baseline_id} uses dataset "
                f"{baseline.dataset!r} outside the configured set"
            )
    return pool


def _prepare(
    cycle: int,
    index: int,
    baseline: BaselineRecord,
    raw: str,
    fuzz: int,
) -> _Prelim:
    """Parse and apply one completion, classifying any failure."""
    try:
        output = parse_generator_output(raw)
    except TagError:
        return _Prelim(
            index, baseline, raw, None, None,
            FailureClass.APPLY_MALFORMED_PATCH, None,
        )
    try:
        delta = parse_diff(output.delta_text)
    except DiffError:
        return _Prelim(
            index, baseline, raw, None, None,
            FailureClass.APPLY_MALFORMED_PATCH, output.total_lines,
        )
    try:
        patched = apply_diff(baseline.source, delta, fuzz=fuzz)
    except ContextMismatch:
        return _Prelim(
            index, baseline, raw, delta, None,
            FailureClass.APPLY_CONTEXT_MISMATCH, output.total_lines,
        )
    except OutOfRange:
        return _Prelim(
            index, baseline, raw, delta, None,
            FailureClass.APPLY_HALLUCINATED_REF, output.total_lines,
        )
    return _Prelim(index, baseline, raw, delta, patched, None, output.total_lines)


def _generate_prelims(
    cycle: int,
    config: PipelineConfig,
    state: PipelineState,
    client,
    rng: random.Random,
) -> tuple[list[_Prelim], Exception | None]:
    """Serially sample and generate all candidates for the cycle.

    On generator failure the prelims built so far are returned together
    with the error, so they can still be evaluated and flushed before the
    cycle aborts.
    """
    prelims: list[_Prelim] = []
    error: Exception | None = None
    for index in range(config.per_cycle):
        baseline = sample_baseline(state.pool, rng, config.balanced_sampling)
        request = GeneratorRequest(
            baseline_source=baseline.source,
            dataset=baseline.dataset,
            params=config.generator.sampling,
            cycle=cycle,
            index=index,
        )
        try:
            raw = client.generate(request)
        except (ReplayExhausted, EndpointError) as exc:
            error = GeneratorUnavailable(str(exc))
            break
        prelims.append(_prepare(cycle, index, baseline, raw, config.fuzz))
    return prelims, error


def _candidate_id(cycle: int, index: int) -> str:
    return f"cand-{cycle:04d}-{index:04d}"


def _entry_id(cycle: int, index: int) -> str:
    return f"gen-{cycle:04d}-{index:04d}"


def run_cycle(
    cycle: int,
    config: PipelineConfig,
    state: PipelineState,
    client,
    runner: EvaluatorRunner,
    writer: LedgerWriter,
) -> tuple[CycleStats, list[CandidateRecord]]:
    """Process one full cycle and merge admissions at the end.

    Evaluations run concurrently up to ``config.eval_workers`` processes,
    but records are decided, written and flushed strictly in index order
    so the ledger is reproducible.
    """
    cycle_seed = derive_cycle_seed(config.global_seed, cycle)
    rng = random.Random(cycle_seed)
    prelims, generator_error = _generate_prelims(cycle, config, state, client, rng)

    records: list[CandidateRecord] = []
    staged: list[tuple[CorpusEntry, novelty.MinHashSignature]] = []
    spawn_error: Exception | None = None

    def _eval_one(prelim: _Prelim):
        request = EvalRequest(
            candidate_id=_candidate_id(cycle, prelim.index),
            patched_source=prelim.patched_source,
            dataset=prelim.baseline.dataset,
            hp=prelim.baseline.hp,
            transform_ref=prelim.baseline.transform_ref,
            eval_seed=derive_eval_seed(cycle_seed, prelim.index),
            mode=config.evaluator.mode,
        )
        return evaluate(runner, request)

    with ThreadPoolExecutor(max_workers=config.eval_workers) as executor:
        futures = {
            p.index: executor.submit(_eval_one, p)
            for p in prelims
            if p.patched_source is not None
        }
        for prelim in prelims:
            eval_result = None
            decision = None
            failure = prelim.failure
            if prelim.index in futures:
                try:
                    eval_result = futures[prelim.index].result()
                except SpawnFailure as exc:
                    spawn_error = EvaluatorSpawnFailure(str(exc))
                    for future in futures.values():
                        future.cancel()
                    break
                if eval_result.status == "ok":
                    signature = novelty.signature(
                        novelty.shingle(prelim.patched_source),
                        state.corpus_index.permutation_seed,
                    )
                    score = novelty.novelty_score(signature, state.corpus_index)
                    decision = decide(
                        accuracy=eval_result.accuracy,
                        dataset=prelim.baseline.dataset,
                        novelty=score,
                        policy=config.policy,
                        tau_nov=config.tau_nov,
                    )
                    failure = decision.failure
                    if decision.admitted:
                        entry = CorpusEntry(
                            entry_id=_entry_id(cycle, prelim.index),
                            origin=GENERATED,
                            patched_source=prelim.patched_source,
                            dataset=prelim.baseline.dataset,
                            accuracy=eval_result.accuracy,
                            signature_ref=_entry_id(cycle, prelim.index),
                            cycle_admitted=cycle,
                            hp=prelim.baseline.hp,
                            transform_ref=prelim.baseline.transform_ref,
                        )
                        staged.append((entry, signature))
                else:
                    failure = eval_result.failure
            record = CandidateRecord(
                candidate_id=_candidate_id(cycle, prelim.index),
                cycle=cycle,
                index=prelim.index,
                baseline_id=prelim.baseline.baseline_id,
                dataset=prelim.baseline.dataset,
                raw_output=prelim.raw_output,
                delta=prelim.delta,
                patched_source=prelim.patched_source,
                eval=eval_result,
                decision=decision,
                failure=failure,
                lines=prelim.lines,
            )
            writer.write(record)
            records.append(record)

    if spawn_error is not None:
        raise spawn_error
    if generator_error is not None:
        raise generator_error

    for entry, signature in staged:
        state.corpus_entries.append(entry)
        state.corpus_index.add(entry.entry_id, signature)
        state.pool.append(entry.as_baseline())

    stats = aggregate_cycle(records, tau=config.policy.fixed_tau)
    return stats, records


def _persist_corpus(config: PipelineConfig, state: PipelineState) -> None:
    corpus_tmp = config.corpus_path.with_suffix(".tmp")
    with open(corpus_tmp, "w", encoding="utf-8") as fh:
        for entry in state.corpus_entries:
            fh.write(json.dumps(entry.to_json_dict(), sort_keys=True) + "\n")
    corpus_tmp.replace(config.corpus_path)
    state.corpus_index.dump_jsonl(config.signature_path)


def _record_event(config: PipelineConfig, event: dict) -> None:
    with open(config.events_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(event, sort_keys=True) + "\n")


def _finetune_hook(config: PipelineConfig, cycle: int) -> None:
    """Line-16 stand-in: run the configured command with the cycle index,
    or just record the event when none is configured."""
    command = list(config.finetune_command)
    if command:
        subprocess.run(command + [str(cycle)], check=False)
    _record_event(
        config,
        {"event": "finetune", "cycle": cycle, "command": command},
    )


def _rebuild_state(
    config: PipelineConfig,
    pool: list[BaselineRecord],
    records: list[CandidateRecord],
) -> PipelineState:
    """Reconstruct loop state from the ledger alone.

    The ledger is the source of truth on resume; corpus files are rewritten
    at the next cycle boundary, so a crash between ledger and corpus writes
    cannot leave them disagreeing.
    """
    state = PipelineState.fresh(pool, permutation_seed=config.global_seed)
    for record in sorted(records, key=lambda r: (r.cycle, r.index)):
        if not record.admitted:
            continue
        signature = novelty.signature(
            novelty.shingle(record.patched_source),
            state.corpus_index.permutation_seed,
        )
        # The baseline may itself be an earlier admission, so look it up in
        # the growing pool, which already holds every entry rebuilt so far.
        parent = next(
            (b for b in state.pool if b.baseline_id == record.baseline_id), None
        )
        entry = CorpusEntry(
            entry_id=_entry_id(record.cycle, record.index),
            origin=GENERATED,
            patched_source=record.patched_source,
            dataset=record.dataset,
            accuracy=record.eval.accuracy,
            signature_ref=_entry_id(record.cycle, record.index),
            cycle_admitted=record.cycle,
            hp=parent.hp if parent is not None else {},
            transform_ref=parent.transform_ref if parent is not None else "",
        )
        state.corpus_entries.append(entry)
        state.corpus_index.add(entry.entry_id, signature)
        state.pool.append(entry.as_baseline())
    return state


def _truncate_events(config: PipelineConfig, cycles_done: int) -> None:
    if not config.events_path.exists():
        return
    kept = []
    with open(config.events_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            if event.get("cycle", -1) < cycles_done:
                kept.append(line)
    with open(config.events_path, "w", encoding="utf-8") as fh:
        for line in kept:
            fh.write(line + "\n")


def run_pipeline(config: PipelineConfig, resume: bool = False) -> RunReport:
    """Execute the full loop and persist ledger, corpus and report.

    With ``resume=True`` and an existing ledger, completed cycles are kept
    and execution restarts at the first incomplete cycle; a partial cycle's
    records are discarded and the cycle re-runs from its own seed, which
    does not depend on anything the partial attempt did.
    """
    config.out_dir.mkdir(parents=True, exist_ok=True)
    pool = load_pool(config)

    start_cycle = 0
    all_records: list[CandidateRecord] = []
    if resume and config.ledger_path.exists():
        existing = read_ledger(config.ledger_path)
        start_cycle = complete_cycles(existing, config.per_cycle)
        all_records = truncate_to_cycles(config.ledger_path, start_cycle)
        _truncate_events(config, start_cycle)
        state = _rebuild_state(config, pool, all_records)
    else:
        state = PipelineState.fresh(pool, permutation_seed=config.global_seed)
        if config.events_path.exists():
            config.events_path.unlink()

    client = make_generator_client(config)
    runner = make_runner(config)

    with LedgerWriter(config.ledger_path, append=start_cycle > 0) as writer:
        for cycle in range(start_cycle, config.cycles):
            _, records = run_cycle(cycle, config, state, client, runner, writer)
            all_records.extend(records)
            _persist_corpus(config, state)
            _finetune_hook(config, cycle)

    report = aggregate_run(
        all_records, tau=config.policy.fixed_tau, policy=config.policy
    )
    with open(config.report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report
