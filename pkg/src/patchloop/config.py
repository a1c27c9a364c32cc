"""Run configuration: JSON file mirroring the pipeline's knobs.

Every field has a default except the generator and the output directory,
so a minimal config is ``{"out_dir": ..., "generator": {"replay": ...}}``.
Validation failures raise BadConfig with the offending field named, which
the command line maps to exit status 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .admission import PER_DATASET, POLICY_PRESETS, ThresholdPolicy
from .errors import BadConfig
from .records import DATASETS
from .workers import (
    DEFAULT_TIMEOUT_SECS,
    SamplingParams,
    echo_worker_command,
)

DEFAULT_CYCLES = 22
DEFAULT_PER_CYCLE = 50
DEFAULT_GLOBAL_SEED = 42
DEFAULT_TAU_NOV = 0.90
DEFAULT_EVAL_WORKERS = 4

# Prompt-side constraints, carried for prompt construction and reporting
# only; parsing never enforces them.
PROMPT_MAX_DELTA_LINES = 30
PROMPT_BATCH_RANGE = (16, 128)
PROMPT_LR_RANGE = (0.001, 0.01)


@dataclass(frozen=True, slots=True)
class GeneratorSpec:
    """Where completions come from: a replay file or an HTTP endpoint."""

    replay_path: Path | None = None
    endpoint: str | None = None
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def __post_init__(self):
        if (self.replay_path is None) == (self.endpoint is None):
            raise BadConfig(
                "generator: exactly one of 'replay' or 'endpoint' is required"
            )


@dataclass(frozen=True, slots=True)
class EvaluatorSpec:
    """Worker command plus the isolation timeout.

    An empty command means the built-in echo worker.
    """

    command: tuple[str, ...] = ()
    timeout_secs: float = DEFAULT_TIMEOUT_SECS
    mode: str = "simulate"

    def __post_init__(self):
        if self.timeout_secs <= 0:
            raise BadConfig("evaluator.timeout_secs: must be positive")
        if self.mode not in ("simulate", "real"):
            raise BadConfig(f"evaluator.mode: unknown mode {self.mode!r}")

    def resolved_command(self) -> tuple[str, ...]:
        return self.command if self.command else tuple(echo_worker_command())


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    out_dir: Path
    generator: GeneratorSpec
    evaluator: EvaluatorSpec = field(default_factory=EvaluatorSpec)
    cycles: int = DEFAULT_CYCLES
    per_cycle: int = DEFAULT_PER_CYCLE
    policy: ThresholdPolicy = field(
        default_factory=lambda: ThresholdPolicy.fixed(0.40)
    )
    tau_nov: float = DEFAULT_TAU_NOV
    global_seed: int = DEFAULT_GLOBAL_SEED
    datasets: tuple[str, ...] = DATASETS
    balanced_sampling: bool = False
    baselines_manifest: Path | None = None
    eval_workers: int = DEFAULT_EVAL_WORKERS
    fuzz: int = 0
    finetune_command: tuple[str, ...] = ()

    def __post_init__(self):
        if self.cycles < 1:
            raise BadConfig("cycles: must be >= 1")
        if self.per_cycle < 1:
            raise BadConfig("per_cycle: must be >= 1")
        if not 0 <= self.tau_nov <= 1:
            raise BadConfig("tau_nov: must be in [0, 1]")
        if not self.datasets:
            raise BadConfig("datasets: must be non-empty")
        if self.eval_workers < 1:
            raise BadConfig("eval_workers: must be >= 1")
        if self.fuzz < 0:
            raise BadConfig("fuzz: must be >= 0")

    @property
    def ledger_path(self) -> Path:
        return self.out_dir / "ledger.jsonl"

    @property
    def corpus_path(self) -> Path:
        return self.out_dir / "corpus.jsonl"

    @property
    def signature_path(self) -> Path:
        return self.out_dir / "corpus.sig.jsonl"

    @property
    def report_path(self) -> Path:
        return self.out_dir / "report.json"

    @property
    def events_path(self) -> Path:
        return self.out_dir / "events.jsonl"


def _policy_from_dict(data: dict) -> ThresholdPolicy:
    mode = data.get("mode", "fixed")
    if mode == "fixed":
        return ThresholdPolicy.fixed(float(data.get("tau_acc", 0.40)))
    if mode == PER_DATASET:
        if "preset" in data:
            name = data["preset"]
            if name not in POLICY_PRESETS:
                raise BadConfig(f"policy.preset: unknown preset {name!r}")
            return ThresholdPolicy.preset(name)
        table = data.get("per_dataset")
        if not isinstance(table, dict) or not table:
            raise BadConfig("policy.per_dataset: must be a non-empty mapping")
        return ThresholdPolicy(
            mode=PER_DATASET,
            per_dataset={str(k): float(v) for k, v in table.items()},
        )
    raise BadConfig(f"policy.mode: unknown mode {mode!r}")


def config_from_dict(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    """Build a PipelineConfig from parsed JSON.

    Relative paths are resolved against ``base_dir`` (the config file's
    directory) so configs can travel with their fixtures.
    """
    if not isinstance(data, dict):
        raise BadConfig("config root: must be a JSON object")
    base = base_dir or Path.cwd()

    def _path(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    if "out_dir" not in data:
        raise BadConfig("out_dir: required")
    out_dir = _path(str(data["out_dir"]))

    gen_data = data.get("generator")
    if not isinstance(gen_data, dict):
        raise BadConfig("generator: required (replay file or endpoint)")
    sampling_data = gen_data.get("sampling", {})
    try:
        sampling = SamplingParams(**sampling_data)
    except (TypeError, ValueError) as exc:
        raise BadConfig(f"generator.sampling: {exc}") from exc
    replay = gen_data.get("replay")
    generator = GeneratorSpec(
        replay_path=_path(str(replay)) if replay is not None else None,
        endpoint=gen_data.get("endpoint"),
        sampling=sampling,
    )

    eval_data = data.get("evaluator", {})
    if not isinstance(eval_data, dict):
        raise BadConfig("evaluator: must be an object")
    evaluator = EvaluatorSpec(
        command=tuple(eval_data.get("command", ())),
        timeout_secs=float(eval_data.get("timeout_secs", DEFAULT_TIMEOUT_SECS)),
        mode=eval_data.get("mode", "simulate"),
    )

    policy_data = data.get("policy", {"mode": "fixed", "tau_acc": 0.40})
    if not isinstance(policy_data, dict):
        raise BadConfig("policy: must be an object")
    try:
        policy = _policy_from_dict(policy_data)
    except BadConfig:
        raise
    except (TypeError, ValueError) as exc:
        raise BadConfig(f"policy: {exc}") from exc

    manifest = data.get("baselines_manifest")
    try:
        return PipelineConfig(
            out_dir=out_dir,
            generator=generator,
            evaluator=evaluator,
            cycles=int(data.get("cycles", DEFAULT_CYCLES)),
            per_cycle=int(data.get("per_cycle", DEFAULT_PER_CYCLE)),
            policy=policy,
            tau_nov=float(data.get("tau_nov", DEFAULT_TAU_NOV)),
            global_seed=int(data.get("global_seed", DEFAULT_GLOBAL_SEED)),
            datasets=tuple(data.get("datasets", DATASETS)),
            balanced_sampling=bool(data.get("balanced_sampling", False)),
            baselines_manifest=_path(str(manifest)) if manifest else None,
            eval_workers=int(data.get("eval_workers", DEFAULT_EVAL_WORKERS)),
            fuzz=int(data.get("fuzz", 0)),
            finetune_command=tuple(data.get("finetune_command", ())),
        )
    except (TypeError, ValueError) as exc:
        raise BadConfig(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise BadConfig(f"config file: cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise BadConfig(f"config file: invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent)


def apply_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Apply command-line overrides; None values mean 'keep the config'."""
    updates = {}
    for key in ("cycles", "per_cycle", "global_seed", "tau_nov", "eval_workers"):
        value = overrides.pop(key, None)
        if value is not None:
            updates[key] = value
    tau = overrides.pop("tau_acc", None)
    policy_mode = overrides.pop("policy_mode", None)
    if policy_mode == PER_DATASET:
        updates["policy"] = ThresholdPolicy.preset("khalid-v7-extended")
    elif policy_mode == "fixed" or tau is not None:
        updates["policy"] = ThresholdPolicy.fixed(
            tau if tau is not None else config.policy.fixed_tau
        )
    timeout = overrides.pop("timeout_secs", None)
    if timeout is not None:
        updates["evaluator"] = replace(config.evaluator, timeout_secs=timeout)
    replay = overrides.pop("replay", None)
    endpoint = overrides.pop("endpoint", None)
    if replay is not None:
        updates["generator"] = GeneratorSpec(
            replay_path=Path(replay), sampling=config.generator.sampling
        )
    elif endpoint is not None:
        updates["generator"] = GeneratorSpec(
            endpoint=endpoint, sampling=config.generator.sampling
        )
    if overrides:
        raise BadConfig(f"unknown override {next(iter(overrides))!r}")
    return replace(config, **updates) if updates else config
