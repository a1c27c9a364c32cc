"""Accuracy gating, the failure taxonomy, and the combined admission rule.

A candidate is admitted when its first-epoch accuracy clears the dataset's
threshold AND its novelty clears the novelty threshold.  The accuracy gate
is evaluated first, so a candidate failing both reports only the accuracy
failure; novelty is typically not even computed for such candidates, which
is why :func:`decide` accepts ``None`` for it in that case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import PatchLoopError


class UnknownDataset(PatchLoopError):
    """Per-dataset policy queried for a dataset it does not cover."""


class FailureClass(enum.Enum):
    """Exactly one class per failed candidate.

    The first three cover the patch-application phase, the middle group is
    reported by the evaluator, and the last two come from the admission
    gates.  ``Duplicate`` is the evaluator-side flavour of near-identity;
    the admission module itself only ever emits ``BelowNoveltyThreshold``.
    The two are tallied separately in reports.
    """

    APPLY_CONTEXT_MISMATCH = "ApplyContextMismatch"
    APPLY_MALFORMED_PATCH = "ApplyMalformedPatch"
    APPLY_HALLUCINATED_REF = "ApplyHallucinatedRef"
    SYNTAX_ERROR = "SyntaxError"
    SHAPE_RUNTIME = "ShapeRuntime"
    UNUSED_HYPERPARAMETERS = "UnusedHyperparameters"
    DUPLICATE = "Duplicate"
    NAME_TYPE_ERROR = "NameTypeError"
    TIMEOUT = "Timeout"
    RESOURCE_ERROR = "ResourceError"
    BELOW_ACCURACY_THRESHOLD = "BelowAccuracyThreshold"
    BELOW_NOVELTY_THRESHOLD = "BelowNoveltyThreshold"


APPLY_FAILURES = frozenset(
    {
        FailureClass.APPLY_CONTEXT_MISMATCH,
        FailureClass.APPLY_MALFORMED_PATCH,
        FailureClass.APPLY_HALLUCINATED_REF,
    }
)

FIXED = "fixed"
PER_DATASET = "per_dataset"

# Per-dataset accuracy thresholds matched to dataset difficulty. The CIFAR
# and SVHN bars follow the khalid-v7 scheme; the MNIST, CelebA and
# ImageNette entries extend it to the remaining datasets.
KHALID_V7_EXTENDED: dict[str, float] = {
    "cifar10": 0.40,
    "cifar100": 0.20,
    "svhn": 0.70,
    "mnist": 0.25,
    "celeba": 0.70,
    "imagenette": 0.50,
}

POLICY_PRESETS: dict[str, dict[str, float]] = {
    "khalid-v7-extended": KHALID_V7_EXTENDED,
}


@dataclass(frozen=True, slots=True)
class ThresholdPolicy:
    """Accuracy thresholds: one fixed bar, or one bar per dataset."""

    mode: str = FIXED
    fixed_tau: float = 0.40
    per_dataset: dict[str, float] | None = None

    def __post_init__(self):
        if self.mode not in (FIXED, PER_DATASET):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if not 0 < self.fixed_tau < 1:
            raise ValueError("fixed_tau must be in (0,1)")
        if self.per_dataset is not None:
            for dataset, tau in self.per_dataset.items():
                if not 0 < tau < 1:
                    raise ValueError(f"threshold for {dataset} must be in (0,1)")

    @classmethod
    def fixed(cls, tau: float = 0.40) -> "ThresholdPolicy":
        return cls(mode=FIXED, fixed_tau=tau)

    @classmethod
    def preset(cls, name: str = "khalid-v7-extended") -> "ThresholdPolicy":
        return cls(mode=PER_DATASET, per_dataset=dict(POLICY_PRESETS[name]))


@dataclass(frozen=True, slots=True)
class AdmissionDecision:
    """Outcome of the two admission gates for one evaluated candidate.

    ``novelty`` is ``None`` when the accuracy gate already failed and the
    score was never computed.
    """

    admitted: bool
    failure: FailureClass | None
    accuracy: float
    novelty: float | None

    def __post_init__(self):
        if self.admitted and self.failure is not None:
            raise ValueError("admitted decisions carry no failure class")
        if not self.admitted and self.failure is None:
            raise ValueError("rejected decisions must carry a failure class")


def accuracy_threshold(dataset: str, policy: ThresholdPolicy) -> float:
    """The accuracy bar for ``dataset`` under ``policy``."""
    if policy.mode == FIXED:
        return policy.fixed_tau
    table = policy.per_dataset or {}
    if dataset not in table:
        raise UnknownDataset(f"no threshold configured for dataset {dataset!r}")
    return table[dataset]


def decide(
    accuracy: float,
    dataset: str,
    novelty: float | None,
    policy: ThresholdPolicy,
    tau_nov: float = 0.90,
) -> AdmissionDecision:
    """Run both gates, accuracy first, with inclusive comparisons."""
    threshold = accuracy_threshold(dataset, policy)
    if accuracy < threshold:
        return AdmissionDecision(
            admitted=False,
            failure=FailureClass.BELOW_ACCURACY_THRESHOLD,
            accuracy=accuracy,
            novelty=novelty,
        )
    if novelty is None:
        raise ValueError("novelty score required once the accuracy gate passes")
    if novelty < tau_nov:
        return AdmissionDecision(
            admitted=False,
            failure=FailureClass.BELOW_NOVELTY_THRESHOLD,
            accuracy=accuracy,
            novelty=novelty,
        )
    return AdmissionDecision(
        admitted=True, failure=None, accuracy=accuracy, novelty=novelty
    )
