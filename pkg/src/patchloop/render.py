"""Plain-text rendering of run reports.

Renderers take the report's JSON form, not the live objects, so a report
loaded back from disk produces byte-identical tables to one rendered
straight from a run.  Column names match the published table layout for
side-by-side eyeballing.
"""

from __future__ import annotations

from .stats import WilsonInterval, render_percent, wilson_ci

CYCLE_COLUMNS = ("Cyc.", "Gen.", "Tr.", "Valid", "Mean", "Best", "≥40", "Ln.")


def _fmt_pct(value: float | None) -> str:
    return render_percent(value) if value is not None else "-"


def _fmt_lines(value: float | None) -> str:
    return f"{value:.1f}" if value is not None else "-"


def _table(header: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def render_cycle_table(per_cycle: list[dict]) -> str:
    rows = [
        (
            str(c["cycle"]),
            str(c["generated"]),
            str(c["trained"]),
            _fmt_pct(c["valid_rate"]),
            _fmt_pct(c["mean_acc"]),
            _fmt_pct(c["best_acc"]),
            _fmt_pct(c["ge_tau_rate"]),
            _fmt_lines(c["avg_lines"]),
        )
        for c in per_cycle
    ]
    return _table(CYCLE_COLUMNS, rows)


def render_dataset_table(per_dataset: dict[str, dict]) -> str:
    header = ("Dataset", "N", "Mean", "Best", "Median", "≥τ", "τ")
    rows = [
        (
            name,
            str(d["n"]),
            _fmt_pct(d["mean"]),
            _fmt_pct(d["best"]),
            _fmt_pct(d["median"]),
            str(d["ge_tau"]),
            render_percent(d["threshold"]),
        )
        for name, d in sorted(per_dataset.items())
    ]
    return _table(header, rows)


def _fmt_interval(point: float, lo: float, hi: float) -> str:
    return (
        f"{render_percent(point)} "
        f"[{render_percent(lo)}, {render_percent(hi)}]"
    )


def render_report(report: dict) -> str:
    """Full text report: per-cycle table, per-dataset table, summary."""
    sections = [render_cycle_table(report["per_cycle"])]
    if report["per_dataset"]:
        sections.append(render_dataset_table(report["per_dataset"]))

    summary = []
    generated = report["generated"]
    trained = report["trained"]
    if generated:
        valid = wilson_ci(trained, generated)
        summary.append(
            f"Generated {generated}, trained {trained}, valid rate "
            + _fmt_interval(valid.point, valid.lo, valid.hi)
        )
    else:
        summary.append("Generated 0, trained 0")
    if report["grand_mean"] is not None:
        summary.append(
            f"Grand mean {render_percent(report['grand_mean'])} "
            f"± {render_percent(report['sd_of_cycle_means'])} "
            "(SD of cycle means), best "
            f"{render_percent(report['grand_best'])}, median "
            f"{render_percent(report['grand_median'])}"
        )
    ge = report["ge_tau"]
    if ge is not None:
        tau_pct = render_percent(report["tau"], decimals=0)
        summary.append(
            f"≥{tau_pct}% rate " + _fmt_interval(ge["point"], ge["lo"], ge["hi"])
        )
    summary.append(f"Admissions {report['total_admissions']}")
    if report["failure_histogram"]:
        parts = ", ".join(
            f"{name} {count}"
            for name, count in sorted(report["failure_histogram"].items())
        )
        summary.append("Failures: " + parts)
    sections.append("\n".join(summary))
    return "\n\n".join(sections) + "\n"


def render_sweep(rows: list[tuple[float, WilsonInterval]]) -> str:
    header = ("τ", "Rate", "95% CI")
    body = [
        (
            render_percent(tau, decimals=0),
            render_percent(ci.point),
            f"[{render_percent(ci.lo)}, {render_percent(ci.hi)}]",
        )
        for tau, ci in rows
    ]
    return _table(header, body) + "\n"
