"""Metric arithmetic: efficiency ratios, recall rounding, run statistics."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from droidvet import fixtures
from droidvet.errors import ZeroAlerts
from droidvet.metrics import (GroundTruthLabel, ToolRunStats, classify_outcomes,
                              efficiency_ratio, grid_csv, load_table_fixture,
                              percent, render_markdown, stats_from_table,
                              summarize)
from droidvet.schema import ValidationOutcome
from droidvet.validation import SessionLedger


def make_ledger(outcome, claims=4, rejected=0, apk="apk-1", title="finding",
                executor_calls=None, wall=120.0) -> SessionLedger:
    ledger = SessionLedger(session_id=f"s-{apk}-{title}", finding_id="v-x",
                           max_iterations=20, apk_id=apk, finding_title=title)
    ledger.outcome = outcome
    ledger.claims_total = claims
    ledger.claims_rejected = rejected
    ledger.tool_call_count = {"Executor": executor_calls
                              if executor_calls is not None else claims * 4}
    ledger.wall_time_s = wall
    return ledger


def test_efficiency_ratio_worked_examples():
    mobsf = ToolRunStats(tool="mobsf", alerts=5654, detected=11, labels=60)
    assert efficiency_ratio(mobsf) == Fraction(11, 60 * 5654)
    assert f"{float(efficiency_ratio(mobsf)):.3e}" == "3.243e-05"

    o3 = ToolRunStats(tool="o3", alerts=116, detected=43, labels=60)
    assert efficiency_ratio(o3) == Fraction(43, 60 * 116)
    assert f"{float(efficiency_ratio(o3)):.3e}" == "6.178e-03"


def test_efficiency_zero_recall_is_zero():
    stats = ToolRunStats(tool="noop", alerts=1000, detected=0, labels=60)
    assert efficiency_ratio(stats) == 0


def test_efficiency_zero_alerts_raises():
    with pytest.raises(ZeroAlerts):
        efficiency_ratio(ToolRunStats(tool="silent", alerts=0, detected=0,
                                      labels=60))


def test_recall_row_matches_published_percentages():
    doc = load_table_fixture(fixtures.fixture_path("table6.json"))
    published = doc["published_totals"]["recall_percent"]
    for stats in stats_from_table(doc):
        assert percent(stats.recall) == published[stats.tool], stats.tool


def test_fixture_alert_totals_match_published():
    doc = load_table_fixture(fixtures.fixture_path("table6.json"))
    published = doc["published_totals"]
    for stats in stats_from_table(doc):
        assert stats.alerts == published["alerts"][stats.tool]
        assert stats.detected == published["detected"][stats.tool]


def test_grid_csv_matches_committed_golden():
    doc = load_table_fixture(fixtures.fixture_path("table6.json"))
    golden = fixtures.fixture_path("bench_grid.csv").read_text()
    assert grid_csv(doc) == golden


def test_classification_agreement_and_refinement():
    labels = [GroundTruthLabel(apk_id="apk-1", name="real flaw", category="CRYPTO")]
    star = make_ledger(ValidationOutcome.VALIDATED_TP, title="real flaw")
    missed_fp = make_ledger(ValidationOutcome.VALIDATED_TP, apk="apk-2",
                            title="phantom flaw")
    missed_tp = make_ledger(ValidationOutcome.FILTERED_FP, title="real flaw")
    plain_fp = make_ledger(ValidationOutcome.FILTERED_FP, apk="apk-3",
                           title="noise")

    table = classify_outcomes([star, missed_fp, missed_tp, plain_fp], labels)
    assert [l.session_id for l in table["★"]] == [star.session_id]
    assert [l.session_id for l in table["⊙"]] == [missed_fp.session_id]
    assert [l.session_id for l in table["⊗"]] == [missed_tp.session_id]
    assert [l.session_id for l in table["✧"]] == [plain_fp.session_id]
    assert sum(len(v) for v in table.values()) == 4


def test_classification_without_labels_passes_through():
    ledgers = [make_ledger(ValidationOutcome.VALIDATED_TP),
               make_ledger(ValidationOutcome.MAX_ITERATIONS)]
    table = classify_outcomes(ledgers)
    assert set(table) == {"★", "•"}


def load_stats_fixture(config_name: str):
    doc = json.loads(fixtures.fixture_path("session_stats.json").read_text())
    config = next(c for c in doc["configurations"] if c["name"] == config_name)
    return ([SessionLedger.from_dict(l) for l in config["ledgers"]],
            config["actionable"])


def test_mixed_configuration_statistics():
    ledgers, actionable = load_stats_fixture("mixed")
    report = summarize(ledgers, actionable=actionable)
    assert report["claims"]["total"] == 223
    assert report["claims"]["rejected"] == 28
    assert report["claims"]["hallucination_rate"]["percent"] == "12.6"
    assert report["claims"]["pass_rate"]["percent"] == "87.4"
    assert report["validation"]["success_rate"]["percent"] == "61.3"  # 46/75


def test_unified_configuration_statistics():
    ledgers, actionable = load_stats_fixture("unified")
    report = summarize(ledgers, actionable=actionable)
    assert report["claims"]["total"] == 233
    assert report["claims"]["rejected"] == 11
    assert report["claims"]["hallucination_rate"]["percent"] == "4.7"
    assert report["claims"]["pass_rate"]["percent"] == "95.3"
    assert report["validation"]["success_rate"]["percent"] == "68.0"  # 51/75


def test_summarize_empty_ledgers_all_zero():
    report = summarize([])
    assert report["sessions"] == 0
    assert report["claims"]["total"] == 0
    assert report["claims"]["hallucination_rate"]["percent"] == "0.0"
    assert report["outcomes"] == {}
    assert report["wall_time_s"]["count"] == 0


def test_outcome_rows_sum_to_ledger_count():
    ledgers, _ = load_stats_fixture("mixed")
    report = summarize(ledgers)
    assert sum(report["outcomes"].values()) == len(ledgers)


def test_report_json_round_trip():
    ledgers, actionable = load_stats_fixture("unified")
    stats = stats_from_table(load_table_fixture(
        fixtures.fixture_path("table6.json")))
    report = summarize(ledgers, stats=stats, actionable=actionable)
    again = json.loads(json.dumps(report))
    assert again == report


def test_markdown_rendering_mentions_caveat_and_rates():
    ledgers, actionable = load_stats_fixture("mixed")
    stats = stats_from_table(load_table_fixture(
        fixtures.fixture_path("table6.json")))
    text = render_markdown(summarize(ledgers, stats=stats, actionable=actionable))
    assert "12.6%" in text
    assert "xV_total" in text
    assert "| mobsf | 5654 | 11 | 18.3 |" in text
