"""Benchmark metrics: detection efficiency, outcome classification, reports.

Recall and efficiency are kept as exact rationals end to end; rendering
rounds half-up at one decimal only at the output edge. The efficiency
comparator deliberately omits the unknown true-vulnerability count: it
is reported as a ratio that must be read as "x V_total".
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .errors import SchemaError, ZeroAlerts
from .schema import ValidationOutcome
from .validation import SessionLedger

EFFICIENCY_CAVEAT = "xV_total"


@dataclass(frozen=True)
class GroundTruthLabel:
    apk_id: str
    name: str
    category: str


@dataclass(frozen=True)
class ToolRunStats:
    tool: str
    alerts: int
    detected: int
    labels: int

    def __post_init__(self):
        if self.alerts < 0 or not 0 <= self.detected <= self.labels:
            raise ValueError(f"bad stats for {self.tool}")

    @property
    def recall(self) -> Fraction:
        return Fraction(self.detected, self.labels)


def efficiency_ratio(stats: ToolRunStats) -> Fraction:
    """Recall per reported alert: the comparator that orders tools when
    the true vulnerability total is unknown (it scales every tool by the
    same constant)."""
    if stats.alerts == 0:
        raise ZeroAlerts(f"{stats.tool} reported no alerts")
    return stats.recall / stats.alerts


def percent(value: Fraction, places: int = 1) -> str:
    """Render a rational as a half-up rounded percentage string."""
    quantum = Decimal(1).scaleb(-places)
    return str((Decimal(value.numerator) / Decimal(value.denominator) * 100)
               .quantize(quantum, rounding=ROUND_HALF_UP))


def fraction_dict(value: Fraction) -> dict:
    return {"num": value.numerator, "den": value.denominator,
            "percent": percent(value)}


def load_table_fixture(path) -> dict:
    doc = json.loads(open(path, encoding="utf-8").read())
    if "rows" not in doc or "tools" not in doc:
        raise SchemaError("detection table fixture needs tools and rows",
                          path=str(path))
    return doc


def stats_from_table(doc: dict) -> list[ToolRunStats]:
    labels = doc["benchmark"]["labeled_vulnerabilities"]
    known = set(doc["tools"])
    out = []
    for tool in doc["tools"]:
        if tool not in known:
            raise SchemaError(f"unknown tool id {tool!r} in fixture")
        alerts = sum(row["cells"][tool]["alerts"] for row in doc["rows"])
        detected = sum(bool(row["cells"][tool]["detected"])
                       for row in doc["rows"])
        out.append(ToolRunStats(tool=tool, alerts=alerts, detected=detected,
                                labels=labels))
    return out


# -- outcome classification ---------------------------------------------

def _is_labeled_tp(ledger: SessionLedger, labels: list[GroundTruthLabel]) -> bool:
    return any(l.apk_id == ledger.apk_id and l.name == ledger.finding_title
               for l in labels)


def classify_outcomes(ledgers: list[SessionLedger],
                      labels: list[GroundTruthLabel] | None = None
                      ) -> dict[str, list[SessionLedger]]:
    """Group sessions by (optionally ground-truth-refined) outcome symbol.

    Without labels the live outcomes pass through. With labels, a
    ValidatedTP over an unlabeled finding becomes a missed FP, and a
    FilteredFP over a labeled finding becomes a missed TP.
    """
    table: dict[str, list[SessionLedger]] = {}
    for ledger in ledgers:
        outcome = ledger.outcome or ValidationOutcome.TECHNICAL_ERROR
        if labels is not None:
            labeled = _is_labeled_tp(ledger, labels)
            if outcome is ValidationOutcome.VALIDATED_TP and not labeled:
                outcome = ValidationOutcome.FP_AS_TP
            elif outcome is ValidationOutcome.FILTERED_FP and labeled:
                outcome = ValidationOutcome.TP_AS_FP
        table.setdefault(outcome.symbol, []).append(ledger)
    return table


# -- report synthesis ----------------------------------------------------

def _distribution(samples: list[float]) -> dict:
    if not samples:
        return {"count": 0}
    dist = {"count": len(samples), "min": min(samples), "max": max(samples),
            "mean": statistics.fmean(samples),
            "median": statistics.median(samples)}
    if len(samples) >= 4:
        q = statistics.quantiles(samples, n=4)
        dist["p25"], dist["p75"] = q[0], q[2]
    return dist


def summarize(ledgers: list[SessionLedger],
              stats: list[ToolRunStats] | None = None,
              labels: list[GroundTruthLabel] | None = None,
              actionable: int | None = None) -> dict:
    """Build the machine-readable run report."""
    claims_total = sum(l.claims_total for l in ledgers)
    claims_rejected = sum(l.claims_rejected for l in ledgers)
    outcome_table = classify_outcomes(ledgers, labels)
    outcome_counts = {symbol: len(group) for symbol, group in outcome_table.items()}
    assert sum(outcome_counts.values()) == len(ledgers)

    validated = sum(1 for l in ledgers
                    if l.outcome is ValidationOutcome.VALIDATED_TP)
    denominator = actionable if actionable else len(ledgers)

    calls_per_task = [l.tool_call_count.get("Executor", 0) / l.claims_total
                      for l in ledgers if l.claims_total]
    tokens: dict[str, dict] = {}
    for ledger in ledgers:
        for agent, usage in ledger.token_usage.items():
            slot = tokens.setdefault(agent, {"prompt_tokens": 0,
                                             "completion_tokens": 0})
            slot["prompt_tokens"] += usage.get("prompt_tokens", 0)
            slot["completion_tokens"] += usage.get("completion_tokens", 0)

    report = {
        "schema_version": "1",
        "sessions": len(ledgers),
        "outcomes": outcome_counts,
        "claims": {
            "total": claims_total,
            "rejected": claims_rejected,
            "hallucination_rate": fraction_dict(
                Fraction(claims_rejected, claims_total)) if claims_total
            else {"num": 0, "den": 1, "percent": "0.0"},
            "pass_rate": fraction_dict(
                Fraction(claims_total - claims_rejected, claims_total))
            if claims_total else {"num": 0, "den": 1, "percent": "0.0"},
        },
        "validation": {
            "validated": validated,
            "actionable": denominator,
            "success_rate": fraction_dict(Fraction(validated, denominator))
            if denominator else {"num": 0, "den": 1, "percent": "0.0"},
        },
        "calls_per_task": {"samples": calls_per_task,
                           "summary": _distribution(calls_per_task)},
        "tokens": tokens,
        "wall_time_s": _distribution([l.wall_time_s for l in ledgers]),
        "policy_violations": sum(len(l.policy_violations) for l in ledgers),
    }
    if labels is not None:
        tp = sum(1 for l in ledgers if _is_labeled_tp(l, labels))
        report["detection"] = {
            "phase": {
                "discovery": {"tp": tp, "fp": len(ledgers) - tp},
                "validation": {
                    "tp": len(outcome_table.get("★", [])),
                    "fp": len(outcome_table.get("⊙", [])),
                },
            }
        }
    if stats:
        report["tools"] = [
            {"tool": s.tool, "alerts": s.alerts, "detected": s.detected,
             "labels": s.labels,
             "recall": fraction_dict(s.recall),
             "efficiency_ratio": {
                 "num": efficiency_ratio(s).numerator,
                 "den": efficiency_ratio(s).denominator,
                 "scientific": f"{float(efficiency_ratio(s)):.3e}",
                 "caveat": EFFICIENCY_CAVEAT} if s.alerts else None}
            for s in stats]
    return report


def render_markdown(report: dict) -> str:
    lines = ["# Validation run report", ""]
    lines.append(f"Sessions: {report['sessions']}")
    outcomes = report.get("outcomes", {})
    if outcomes:
        lines.append("Outcomes: " + ", ".join(
            f"{symbol} {count}" for symbol, count in sorted(outcomes.items())))
    claims = report["claims"]
    lines += [
        "",
        f"Claims: {claims['total']} total, {claims['rejected']} rejected "
        f"(hallucination rate {claims['hallucination_rate']['percent']}%, "
        f"pass rate {claims['pass_rate']['percent']}%)",
        f"Validation success: {report['validation']['validated']}/"
        f"{report['validation']['actionable']} "
        f"({report['validation']['success_rate']['percent']}%)",
    ]
    if "tools" in report:
        lines += ["", "| tool | alerts | detected | recall % | efficiency "
                      f"({EFFICIENCY_CAVEAT}) |",
                  "|---|---|---|---|---|"]
        for row in report["tools"]:
            lines.append(
                f"| {row['tool']} | {row['alerts']} | {row['detected']} | "
                f"{row['recall']['percent']} | "
                f"{row['efficiency_ratio']['scientific']} |")
    wall = report.get("wall_time_s", {})
    if wall.get("count"):
        lines += ["", f"Wall time: median {wall['median']:.1f}s, "
                      f"max {wall['max']:.1f}s over {wall['count']} sessions"]
    return "\n".join(lines) + "\n"


def grid_csv(doc: dict) -> str:
    """Benchmark-table-shaped CSV grid (one row per vulnerability)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["vulnerability", "category"]
                    + [f"{t}_alerts" for t in doc["tools"]]
                    + [f"{t}_detected" for t in doc["tools"]])
    for row in doc["rows"]:
        writer.writerow(
            [row["name"], row["category"]]
            + [row["cells"][t]["alerts"] for t in doc["tools"]]
            + [int(row["cells"][t]["detected"]) for t in doc["tools"]])
    totals = doc["published_totals"]
    writer.writerow(["TOTAL_ALERTS", ""]
                    + [totals["alerts"][t] for t in doc["tools"]]
                    + ["" for _ in doc["tools"]])
    writer.writerow(["TOTAL_DETECTED", ""]
                    + ["" for _ in doc["tools"]]
                    + [totals["detected"][t] for t in doc["tools"]])
    writer.writerow(["RECALL_PERCENT", ""]
                    + ["" for _ in doc["tools"]]
                    + [totals["recall_percent"][t] for t in doc["tools"]])
    return out.getvalue()
