"""patchloop: an LLM-in-the-loop architecture search harness.

The loop samples baseline model sources, asks a generator for unified-diff
edits, applies and evaluates each patched candidate in an isolated worker,
and admits survivors to a growing corpus gated on accuracy and structural
novelty.  Each subpackage stands alone: the diff engine, the novelty
index, the admission rules and the statistics helpers are importable
without touching the orchestrator.
"""

from .admission import (
    AdmissionDecision,
    FailureClass,
    ThresholdPolicy,
    accuracy_threshold,
    decide,
)
from .config import PipelineConfig, load_config
from .diffs import (
    ContextMismatch,
    DiffError,
    OutOfRange,
    UnifiedDiff,
    apply_diff,
    compute_diff,
    diff_stats,
    parse_diff,
    render_diff,
)
from .errors import BadConfig, EmptyPool, PatchLoopError
from .novelty import (
    CorpusIndex,
    MinHashSignature,
    ShingleSet,
    jaccard_estimate,
    novelty_score,
    shingle,
    signature,
)
from .pipeline import (
    derive_cycle_seed,
    run_cycle,
    run_pipeline,
    sample_baseline,
)
from .records import (
    BaselineRecord,
    CandidateRecord,
    CorpusEntry,
    EvalRequest,
    EvalResult,
)
from .stats import (
    CycleStats,
    RunReport,
    WilsonInterval,
    aggregate_cycle,
    aggregate_run,
    kendall_tau,
    kruskal_wallis,
    spearman,
    tau_sweep,
    wilson_ci,
)
from .structured_output import GeneratorOutput, parse_generator_output

__version__ = "0.1.0"

__all__ = [
    "AdmissionDecision",
    "BadConfig",
    "BaselineRecord",
    "CandidateRecord",
    "ContextMismatch",
    "CorpusEntry",
    "CorpusIndex",
    "CycleStats",
    "DiffError",
    "EmptyPool",
    "EvalRequest",
    "EvalResult",
    "FailureClass",
    "GeneratorOutput",
    "MinHashSignature",
    "OutOfRange",
    "PatchLoopError",
    "PipelineConfig",
    "RunReport",
    "ShingleSet",
    "ThresholdPolicy",
    "UnifiedDiff",
    "WilsonInterval",
    "accuracy_threshold",
    "aggregate_cycle",
    "aggregate_run",
    "apply_diff",
    "compute_diff",
    "decide",
    "derive_cycle_seed",
    "diff_stats",
    "jaccard_estimate",
    "kendall_tau",
    "kruskal_wallis",
    "load_config",
    "novelty_score",
    "parse_diff",
    "parse_generator_output",
    "render_diff",
    "run_cycle",
    "run_pipeline",
    "sample_baseline",
    "shingle",
    "signature",
    "spearman",
    "tau_sweep",
    "wilson_ci",
]
