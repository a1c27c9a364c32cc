"""Run statistics: Wilson intervals, rank correlations, and aggregates.

Every number the reports print comes from here.  Conventions that matter:

* Rates and accuracies are stored as fractions in [0,1]; formatting to
  percentages with one decimal (half-up) happens only at render time.
* The grand mean is taken over all trained models pooled together, not over
  per-cycle means; the spread column is the sample standard deviation of
  the per-cycle means.
* Spearman p-values use the t approximation, Kruskal-Wallis p-values the
  chi-square approximation.  The rank bookkeeping (average ranks, tie
  corrections) is implemented here; only the distribution survival
  functions are delegated to scipy.
"""

from __future__ import annotations

import math
import statistics as pystats
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import TYPE_CHECKING, Iterable, Sequence

from scipy.stats import chi2 as _chi2
from scipy.stats import t as _student_t

from .errors import EmptyPool, PatchLoopError

if TYPE_CHECKING:
    from .admission import ThresholdPolicy
    from .records import CandidateRecord

DEFAULT_Z = 1.96
DEFAULT_TAU_GRID = (0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60)


class StatsError(PatchLoopError):
    """Base class for statistics failures."""


class ZeroTrials(StatsError):
    """Wilson interval requested with n = 0."""


class TooFewPairs(StatsError):
    """Not enough (x, y) pairs for a rank correlation."""


class DegenerateVariance(StatsError):
    """All x or all y values identical; ranks carry no information."""


class TooFewGroups(StatsError):
    """Kruskal-Wallis needs at least two non-empty groups."""


@dataclass(frozen=True, slots=True)
class WilsonInterval:
    point: float
    lo: float
    hi: float
    n: int
    z: float = DEFAULT_Z


def wilson_ci(k: int, n: int, z: float = DEFAULT_Z) -> WilsonInterval:
    """Wilson score interval for k successes in n trials.

    Center (p_hat + z^2/2n) / (1 + z^2/n); half-width
    (z / (1 + z^2/n)) * sqrt(p_hat(1-p_hat)/n + z^2/4n^2).  The returned
    bounds are clipped to [0,1].
    """
    if n < 1:
        raise ZeroTrials("Wilson interval needs at least one trial")
    if not 0 <= k <= n:
        raise ValueError(f"successes {k} outside [0, {n}]")
    p_hat = k / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p_hat + z2 / (2 * n)) / denom
    half_width = (z / denom) * math.sqrt(
        p_hat * (1 - p_hat) / n + z2 / (4 * n * n)
    )
    # The interval always contains p_hat; rounding can push a clipped bound
    # past it by an ulp, so clamp against the point estimate as well.
    return WilsonInterval(
        point=p_hat,
        lo=min(max(0.0, center - half_width), p_hat),
        hi=max(min(1.0, center + half_width), p_hat),
        n=n,
        z=z,
    )


def ge_tau_rate(
    accuracies: Sequence[float], tau: float, z: float = DEFAULT_Z
) -> WilsonInterval:
    """Wilson interval for the share of accuracies at or above tau."""
    if not accuracies:
        raise EmptyPool("ge_tau_rate needs a non-empty accuracy pool")
    k = sum(1 for a in accuracies if a >= tau)
    return wilson_ci(k, len(accuracies), z=z)


def tau_sweep(
    pool: Sequence[float], taus: Iterable[float] = DEFAULT_TAU_GRID
) -> list[tuple[float, WilsonInterval]]:
    """Admission rate with CI at each threshold; rows nonincreasing in tau."""
    if not pool:
        raise EmptyPool("tau_sweep needs a non-empty accuracy pool")
    return [(tau, ge_tau_rate(pool, tau)) for tau in taus]


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Tied values share the average of the rank positions they span.
        avg = (i + j) / 2 + 1
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        i = j + 1
    return ranks


def spearman_p_value(rho: float, n: int) -> float:
    """Two-tailed p for a Spearman rho via the t approximation, df = n-2."""
    if n < 3:
        raise TooFewPairs("p-value needs at least 3 pairs")
    if abs(rho) >= 1.0:
        return 0.0
    t_stat = rho * math.sqrt((n - 2) / (1 - rho * rho))
    return 2.0 * float(_student_t.sf(abs(t_stat), n - 2))


def spearman(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Spearman rank correlation with average ranks, plus two-tailed p."""
    if len(pairs) < 3:
        raise TooFewPairs("spearman needs at least 3 pairs")
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise DegenerateVariance("all x or all y values are identical")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    n = len(pairs)
    mean_rx = sum(rx) / n
    mean_ry = sum(ry) / n
    cov = sum((a - mean_rx) * (b - mean_ry) for a, b in zip(rx, ry))
    var_x = sum((a - mean_rx) ** 2 for a in rx)
    var_y = sum((b - mean_ry) ** 2 for b in ry)
    rho = cov / math.sqrt(var_x * var_y)
    rho = max(-1.0, min(1.0, rho))
    return rho, spearman_p_value(rho, n)


def kendall_tau(pairs: Sequence[tuple[float, float]]) -> float:
    """Tie-corrected Kendall tau-b by direct pair counting."""
    if len(pairs) < 2:
        raise TooFewPairs("kendall_tau needs at least 2 pairs")
    concordant = discordant = ties_x = ties_y = 0
    n = len(pairs)
    for i in range(n):
        for j in range(i + 1, n):
            dx = pairs[i][0] - pairs[j][0]
            dy = pairs[i][1] - pairs[j][1]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - _tie_term(p[0] for p in pairs)) * (n0 - _tie_term(p[1] for p in pairs)))
    if denom == 0:
        raise DegenerateVariance("all x or all y values are identical")
    return (concordant - discordant) / denom


def _tie_term(values: Iterable[float]) -> float:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return sum(c * (c - 1) / 2 for c in counts.values())


def chi_square_sf(x: float, df: int) -> float:
    """Chi-square survival function, the p-value side of Kruskal-Wallis."""
    return float(_chi2.sf(x, df))


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Kruskal-Wallis H with tie correction; p via chi-square, df = k-1."""
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise TooFewGroups("kruskal_wallis needs >= 2 non-empty groups")
    pooled = [v for g in groups for v in g]
    n_total = len(pooled)
    ranks = _average_ranks(pooled)
    h = 0.0
    offset = 0
    for g in groups:
        group_ranks = ranks[offset : offset + len(g)]
        offset += len(g)
        mean_rank = sum(group_ranks) / len(g)
        h += len(g) * (mean_rank - (n_total + 1) / 2) ** 2
    h *= 12 / (n_total * (n_total + 1))
    counts: dict[float, int] = {}
    for v in pooled:
        counts[v] = counts.get(v, 0) + 1
    tie_sum = sum(c**3 - c for c in counts.values())
    correction = 1 - tie_sum / (n_total**3 - n_total)
    if correction == 0:
        # Every pooled value identical: no information, report the null.
        return 0.0, 1.0
    h /= correction
    return h, chi_square_sf(h, len(groups) - 1)


def render_percent(fraction: float, decimals: int = 1) -> str:
    """Format a fraction as a percentage with half-up rounding."""
    quant = Decimal(1).scaleb(-decimals) if decimals > 0 else Decimal(1)
    value = (Decimal(repr(fraction)) * 100).quantize(quant, rounding=ROUND_HALF_UP)
    return f"{value}"


def sample_sd(values: Sequence[float]) -> float:
    """Sample standard deviation (n-1 denominator); 0.0 for fewer than 2."""
    if len(values) < 2:
        return 0.0
    return pystats.stdev(values)


def median(values: Sequence[float]) -> float:
    """Median with midpoint-of-two for even counts."""
    return float(pystats.median(values))


@dataclass(frozen=True, slots=True)
class CycleStats:
    """One row of the per-cycle table.

    ``mean_acc``, ``best_acc`` and ``ge_tau_rate`` are ``None`` when the
    cycle trained nothing; ``avg_lines`` is ``None`` when nothing parsed.
    """

    cycle: int
    generated: int
    trained: int
    valid_rate: float
    mean_acc: float | None
    best_acc: float | None
    ge_tau_rate: float | None
    avg_lines: float | None

    def to_json_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "generated": self.generated,
            "trained": self.trained,
            "valid_rate": self.valid_rate,
            "mean_acc": self.mean_acc,
            "best_acc": self.best_acc,
            "ge_tau_rate": self.ge_tau_rate,
            "avg_lines": self.avg_lines,
        }


@dataclass(frozen=True, slots=True)
class DatasetStats:
    """One row of the per-dataset table; ge_tau is a count out of n."""

    dataset: str
    n: int
    mean: float
    best: float
    median: float
    ge_tau: int
    threshold: float

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n": self.n,
            "mean": self.mean,
            "best": self.best,
            "median": self.median,
            "ge_tau": self.ge_tau,
            "threshold": self.threshold,
        }


@dataclass(frozen=True, slots=True)
class RunReport:
    per_cycle: tuple[CycleStats, ...]
    per_dataset: dict[str, DatasetStats]
    generated: int
    trained: int
    valid_rate: float
    grand_mean: float | None
    grand_best: float | None
    grand_median: float | None
    ge_tau: WilsonInterval | None
    sd_of_cycle_means: float
    total_admissions: int
    failure_histogram: dict[str, int]
    tau: float

    def to_json_dict(self) -> dict:
        ge_tau = None
        if self.ge_tau is not None:
            ge_tau = {
                "point": self.ge_tau.point,
                "lo": self.ge_tau.lo,
                "hi": self.ge_tau.hi,
                "n": self.ge_tau.n,
                "z": self.ge_tau.z,
            }
        return {
            "per_cycle": [c.to_json_dict() for c in self.per_cycle],
            "per_dataset": {
                d: s.to_json_dict() for d, s in sorted(self.per_dataset.items())
            },
            "generated": self.generated,
            "trained": self.trained,
            "valid_rate": self.valid_rate,
            "grand_mean": self.grand_mean,
            "grand_best": self.grand_best,
            "grand_median": self.grand_median,
            "ge_tau": ge_tau,
            "sd_of_cycle_means": self.sd_of_cycle_means,
            "total_admissions": self.total_admissions,
            "failure_histogram": dict(sorted(self.failure_histogram.items())),
            "tau": self.tau,
        }


def aggregate_cycle(records: Sequence["CandidateRecord"], tau: float) -> CycleStats:
    """Collapse one cycle's candidate records into a table row.

    Accuracy columns cover trained candidates only; the line-count column
    averages over every generation whose output parsed, trained or not.
    """
    cycles = {r.cycle for r in records}
    if len(cycles) > 1:
        raise ValueError(f"records span multiple cycles: {sorted(cycles)}")
    cycle = cycles.pop() if cycles else 0
    generated = len(records)
    trained = sum(1 for r in records if r.trained)
    accuracies = [r.accuracy for r in records if r.accuracy is not None]
    line_counts = [r.lines for r in records if r.lines is not None]
    ge = None
    if accuracies:
        ge = sum(1 for a in accuracies if a >= tau) / len(accuracies)
    return CycleStats(
        cycle=cycle,
        generated=generated,
        trained=trained,
        valid_rate=trained / generated if generated else 0.0,
        mean_acc=sum(accuracies) / len(accuracies) if accuracies else None,
        best_acc=max(accuracies) if accuracies else None,
        ge_tau_rate=ge,
        avg_lines=sum(line_counts) / len(line_counts) if line_counts else None,
    )


def aggregate_run(
    records: Sequence["CandidateRecord"],
    tau: float = 0.40,
    policy: "ThresholdPolicy | None" = None,
) -> RunReport:
    """Collapse a full ledger into the run report.

    The grand mean pools every trained model; it is not the mean of the
    per-cycle means.  Per-dataset ``ge_tau`` counts use ``policy`` when
    given (so per-dataset thresholds apply), otherwise the fixed ``tau``.
    """
    from .admission import ThresholdPolicy, accuracy_threshold

    if policy is None:
        policy = ThresholdPolicy.fixed(tau)
    by_cycle: dict[int, list] = {}
    for r in records:
        by_cycle.setdefault(r.cycle, []).append(r)
    per_cycle = tuple(
        aggregate_cycle(by_cycle[c], tau) for c in sorted(by_cycle)
    )

    accuracies = [r.accuracy for r in records if r.accuracy is not None]
    generated = len(records)
    trained = sum(1 for r in records if r.trained)

    per_dataset: dict[str, DatasetStats] = {}
    by_dataset: dict[str, list[float]] = {}
    for r in records:
        if r.accuracy is not None:
            by_dataset.setdefault(r.dataset, []).append(r.accuracy)
    for dataset, accs in sorted(by_dataset.items()):
        threshold = accuracy_threshold(dataset, policy)
        per_dataset[dataset] = DatasetStats(
            dataset=dataset,
            n=len(accs),
            mean=sum(accs) / len(accs),
            best=max(accs),
            median=median(accs),
            ge_tau=sum(1 for a in accs if a >= threshold),
            threshold=threshold,
        )

    cycle_means = [c.mean_acc for c in per_cycle if c.mean_acc is not None]
    histogram: dict[str, int] = {}
    admissions = 0
    for r in records:
        if r.admitted:
            admissions += 1
        elif r.failure is not None:
            histogram[r.failure.value] = histogram.get(r.failure.value, 0) + 1

    return RunReport(
        per_cycle=per_cycle,
        per_dataset=per_dataset,
        generated=generated,
        trained=trained,
        valid_rate=trained / generated if generated else 0.0,
        grand_mean=sum(accuracies) / len(accuracies) if accuracies else None,
        grand_best=max(accuracies) if accuracies else None,
        grand_median=median(accuracies) if accuracies else None,
        ge_tau=ge_tau_rate(accuracies, tau) if accuracies else None,
        sd_of_cycle_means=sample_sd(cycle_means),
        total_admissions=admissions,
        failure_histogram=histogram,
        tau=tau,
    )
