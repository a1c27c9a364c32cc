"""Persistent record types shared by the pipeline, the gateway, and reports.

Everything here serializes to plain JSON dicts with stable key order so the
ledger and corpus files are byte-reproducible for a fixed config.  For that
reason ``EvalResult.wall_seconds`` is deliberately dropped from ledger
serialization: it is diagnostic, varies across machines and runs, and would
break ledger comparisons that the rest of the system relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .admission import AdmissionDecision, FailureClass
from .diffs import UnifiedDiff, parse_diff, render_diff

SIMULATE = "simulate"
REAL = "real"
DATASETS = ("mnist", "celeba", "svhn", "cifar10", "imagenette", "cifar100")


@dataclass(frozen=True, slots=True)
class BaselineRecord:
    """One sampleable model: source text plus its training configuration."""

    baseline_id: str
    dataset: str
    source: str
    hp: dict[str, Any]
    transform_ref: str

    def __post_init__(self):
        if not self.source:
            raise ValueError(f"baseline {self.baseline_id} has empty source")


@dataclass(frozen=True, slots=True)
class EvalRequest:
    """What one evaluator worker process receives on its input stream."""

    candidate_id: str
    patched_source: str
    dataset: str
    hp: dict[str, Any]
    transform_ref: str
    eval_seed: int
    mode: str = SIMULATE

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "candidate_id": self.candidate_id,
            "patched_source": self.patched_source,
            "dataset": self.dataset,
            "hp": self.hp,
            "transform_ref": self.transform_ref,
            "eval_seed": self.eval_seed,
            "mode": self.mode,
        }


@dataclass(frozen=True, slots=True)
class EvalResult:
    """What one evaluator worker process reports back."""

    status: str
    accuracy: float | None
    failure: FailureClass | None
    wall_seconds: float
    stderr: str = ""

    def __post_init__(self):
        if self.status == "ok":
            if self.accuracy is None or not 0 <= self.accuracy <= 1:
                raise ValueError("ok results need an accuracy in [0,1]")
        elif self.status == "failed":
            if self.failure is None:
                raise ValueError("failed results need a failure class")
        else:
            raise ValueError(f"unknown status {self.status!r}")

    def to_ledger_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "accuracy": self.accuracy,
            "failure": self.failure.value if self.failure else None,
            "stderr": self.stderr,
        }

    @classmethod
    def from_ledger_dict(cls, data: dict[str, Any]) -> "EvalResult":
        return cls(
            status=data["status"],
            accuracy=data["accuracy"],
            failure=FailureClass(data["failure"]) if data["failure"] else None,
            wall_seconds=0.0,
            stderr=data.get("stderr", ""),
        )


@dataclass(frozen=True, slots=True)
class CandidateRecord:
    """Full ledger entry for one generated candidate."""

    candidate_id: str
    cycle: int
    index: int
    baseline_id: str
    dataset: str
    raw_output: str
    delta: UnifiedDiff | None
    patched_source: str | None
    eval: EvalResult | None
    decision: AdmissionDecision | None
    failure: FailureClass | None
    lines: int | None

    def __post_init__(self):
        if self.patched_source is not None and self.delta is None:
            raise ValueError("patched_source without a delta")
        if self.decision is not None and self.eval is None:
            raise ValueError("decision without an eval result")

    @property
    def trained(self) -> bool:
        """Whether the candidate cleared the apply phase and was evaluated."""
        return self.patched_source is not None

    @property
    def accuracy(self) -> float | None:
        if self.eval is not None and self.eval.status == "ok":
            return self.eval.accuracy
        return None

    @property
    def admitted(self) -> bool:
        return self.decision is not None and self.decision.admitted

    def to_json_dict(self) -> dict[str, Any]:
        decision = None
        if self.decision is not None:
            decision = {
                "admitted": self.decision.admitted,
                "failure": (
                    self.decision.failure.value if self.decision.failure else None
                ),
                "accuracy": self.decision.accuracy,
                "novelty": self.decision.novelty,
            }
        return {
            "candidate_id": self.candidate_id,
            "cycle": self.cycle,
            "index": self.index,
            "baseline_id": self.baseline_id,
            "dataset": self.dataset,
            "raw_output": self.raw_output,
            "delta": render_diff(self.delta) if self.delta else None,
            "patched_source": self.patched_source,
            "eval": self.eval.to_ledger_dict() if self.eval else None,
            "decision": decision,
            "failure": self.failure.value if self.failure else None,
            "lines": self.lines,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "CandidateRecord":
        decision = None
        if data["decision"] is not None:
            d = data["decision"]
            decision = AdmissionDecision(
                admitted=d["admitted"],
                failure=FailureClass(d["failure"]) if d["failure"] else None,
                accuracy=d["accuracy"],
                novelty=d["novelty"],
            )
        return cls(
            candidate_id=data["candidate_id"],
            cycle=data["cycle"],
            index=data["index"],
            baseline_id=data["baseline_id"],
            dataset=data["dataset"],
            raw_output=data["raw_output"],
            delta=parse_diff(data["delta"]) if data["delta"] else None,
            patched_source=data["patched_source"],
            eval=EvalResult.from_ledger_dict(data["eval"]) if data["eval"] else None,
            decision=decision,
            failure=FailureClass(data["failure"]) if data["failure"] else None,
            lines=data["lines"],
        )


LEMUR_BASELINE = "lemur-baseline"
GENERATED = "generated"


@dataclass(frozen=True, slots=True)
class CorpusEntry:
    """An admitted corpus member, reusable as a future sampling baseline.

    ``hp`` and ``transform_ref`` are inherited from the baseline the entry
    was patched from, so the entry can itself be sampled and evaluated
    later without chasing the provenance chain.
    """

    entry_id: str
    origin: str
    patched_source: str
    dataset: str
    accuracy: float | None
    signature_ref: str
    cycle_admitted: int | None
    hp: dict[str, Any] = field(default_factory=dict)
    transform_ref: str = ""

    def __post_init__(self):
        if self.origin not in (LEMUR_BASELINE, GENERATED):
            raise ValueError(f"unknown origin {self.origin!r}")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "entry_id": self.entry_id,
            "origin": self.origin,
            "patched_source": self.patched_source,
            "dataset": self.dataset,
            "accuracy": self.accuracy,
            "signature_ref": self.signature_ref,
            "cycle_admitted": self.cycle_admitted,
            "hp": self.hp,
            "transform_ref": self.transform_ref,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "CorpusEntry":
        return cls(
            entry_id=data["entry_id"],
            origin=data["origin"],
            patched_source=data["patched_source"],
            dataset=data["dataset"],
            accuracy=data["accuracy"],
            signature_ref=data["signature_ref"],
            cycle_admitted=data["cycle_admitted"],
            hp=data.get("hp", {}),
            transform_ref=data.get("transform_ref", ""),
        )

    def as_baseline(self) -> BaselineRecord:
        return BaselineRecord(
            baseline_id=self.entry_id,
            dataset=self.dataset,
            source=self.patched_source,
            hp=self.hp,
            transform_ref=self.transform_ref,
        )
