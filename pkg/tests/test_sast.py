"""Scanner report ingestion and the warning formatter's mechanical guards."""

from __future__ import annotations

import json

import pytest

from droidvet.errors import BackendError, NoAdapter, UnparseableReport
from droidvet.gateway import ModelConfig, ModelEndpoint, ScriptedProvider
from droidvet.sast import (AdapterRegistry, JsonLinesAdapter, PlaintextAdapter,
                           SarifAdapter, ScannerReport, ingest_report,
                           warnings_to_candidates)
from droidvet.schema import CodeLocation, Lifecycle, Severity, Warning


def sarif_body(results):
    return json.dumps({"version": "2.1.0", "runs": [{"results": results}]}).encode()


def sarif_result(rule="HARDCODED_KEY", file="res/values/strings.xml", line=3,
                 level="error"):
    return {"ruleId": rule, "level": level,
            "message": {"text": f"{rule} found"},
            "locations": [{"physicalLocation": {
                "artifactLocation": {"uri": file},
                "region": {"startLine": line}}}]}


def test_sarif_ingestion_counts_match_fixture():
    # 25 discrete results, 2 of them malformed
    results = [sarif_result(rule=f"RULE_{i}", line=i + 1) for i in range(23)]
    results += [{"level": "warning"},                       # no rule, no message
                {"ruleId": None, "message": {"no_text": 1}}]
    report = ScannerReport(tool="mobsf", format="sarif", body=sarif_body(results))
    out = ingest_report(report, SarifAdapter())
    assert len(out.warnings) == 23
    assert len(out.dropped) == 2
    assert out.item_count == 25
    assert all(w.source_tool == "mobsf" for w in out.warnings)
    assert out.warnings[0].severity_hint is Severity.HIGH
    assert out.warnings[0].location.file_path == "res/values/strings.xml"


def test_raw_payload_preserved_byte_exact():
    results = [sarif_result()]
    report = ScannerReport(tool="mobsf", format="sarif", body=sarif_body(results))
    out = ingest_report(report, SarifAdapter())
    assert json.loads(out.warnings[0].raw_payload) == json.loads(
        json.dumps(results[0], sort_keys=True))


def test_empty_body_unparseable():
    report = ScannerReport(tool="mobsf", format="sarif", body=b"")
    with pytest.raises(UnparseableReport):
        ingest_report(report, SarifAdapter())


def test_not_sarif_unparseable():
    report = ScannerReport(tool="mobsf", format="sarif", body=b"not json at all")
    with pytest.raises(UnparseableReport):
        ingest_report(report, SarifAdapter())


def test_registry_no_adapter():
    registry = AdapterRegistry()
    with pytest.raises(NoAdapter):
        registry.get("qark")


def test_registry_from_config_round_trip():
    registry = AdapterRegistry.from_config({"tools": {
        "mobsf": {"adapter": "sarif"},
        "apkhunt": {"adapter": "jsonlines", "fields": {"title": "issue"}},
        "trueseeing": {"adapter": "plaintext",
                       "pattern": r"^(?P<title>[^:]+):(?P<file>[^:]+):(?P<line>\d+)"},
    }})
    assert isinstance(registry.get("mobsf"), SarifAdapter)
    assert isinstance(registry.get("apkhunt"), JsonLinesAdapter)
    assert isinstance(registry.get("trueseeing"), PlaintextAdapter)


def test_jsonlines_adapter_custom_fields():
    body = "\n".join([
        json.dumps({"issue": "SQL injection", "path": "a/B.java", "ln": 7,
                    "sev": "high"}),
        "{broken json",
        json.dumps({"other": "no title field"}),
    ]).encode()
    adapter = JsonLinesAdapter({"title": "issue", "file": "path", "line": "ln",
                                "severity": "sev"})
    out = ingest_report(ScannerReport("apkhunt", "json", body), adapter)
    assert len(out.warnings) == 1 and len(out.dropped) == 2
    assert out.warnings[0].location == CodeLocation("a/B.java", 7, 7)
    assert out.warnings[0].severity_hint is Severity.HIGH


def test_plaintext_adapter_named_groups():
    body = (b"# comment ignored\n"
            b"WeakCipher: com/x/Crypto.java:42\n"
            b"garbage line without structure\n")
    adapter = PlaintextAdapter(r"^(?P<title>[^:]+): (?P<file>\S+?):(?P<line>\d+)$")
    out = ingest_report(ScannerReport("trueseeing", "plaintext", body), adapter)
    assert out.item_count == 2
    assert out.warnings[0].title == "WeakCipher"
    assert out.warnings[0].location.line_start == 42
    assert out.dropped[0].reason == "pattern did not match"


def formatter_endpoint(response_findings):
    provider = ScriptedProvider(turns=[
        {"text": json.dumps(response_findings, ensure_ascii=False)}])
    return ModelEndpoint(provider=provider,
                         config=ModelConfig(provider="scripted", model="fmt"),
                         agent_name="formatter")


def shared_key_warnings():
    return [
        Warning(source_tool=tool, title=f"hardcoded key ({tool})",
                raw_payload=f"{tool}: key in res/values/strings.xml line 3",
                location=CodeLocation("res/values/strings.xml", 3, 3))
        for tool in ("mobsf", "apkhunt", "trueseeing")
    ]


def test_three_warnings_merge_to_one_candidate():
    warnings = shared_key_warnings()
    merged = [{"title": "Hardcoded AES key in string resources",
               "category": "CRYPTO",
               "description": "All three scanners flag the same constant key.",
               "locations": [{"file_path": "res/values/strings.xml",
                              "line_start": 3, "line_end": 3}],
               "origin": ["mobsf", "apkhunt", "trueseeing"],
               "confidence": "high"}]
    found = warnings_to_candidates(warnings, formatter_endpoint(merged))
    assert len(found) == 1
    assert found[0].origin == frozenset({"mobsf", "apkhunt", "trueseeing"})
    assert found[0].lifecycle is Lifecycle.SPECULATIVE


def test_empty_warning_list_short_circuits():
    assert warnings_to_candidates([], formatter_endpoint([])) == []


def test_malformed_backend_payload_is_backend_error():
    with pytest.raises(BackendError):
        warnings_to_candidates(shared_key_warnings(),
                               formatter_endpoint({"not": "an array"}))


def test_one_to_many_split_rejected():
    warnings = shared_key_warnings()[:1]
    split = [{"title": f"issue {i}", "category": "CRYPTO", "description": "",
              "locations": [], "origin": ["mobsf"]} for i in range(2)]
    with pytest.raises(BackendError):
        warnings_to_candidates(warnings, formatter_endpoint(split))


def test_fabricated_location_rejected():
    warnings = shared_key_warnings()
    fabricated = [{"title": "key issue", "category": "CRYPTO", "description": "",
                   "locations": [{"file_path": "totally/made/up.java",
                                  "line_start": 1, "line_end": 1}],
                   "origin": ["mobsf"]}]
    with pytest.raises(BackendError):
        warnings_to_candidates(warnings, formatter_endpoint(fabricated))


def test_fabricated_origin_rejected():
    warnings = shared_key_warnings()
    foreign = [{"title": "key issue", "category": "CRYPTO", "description": "",
                "locations": [], "origin": ["not-a-scanner"]}]
    with pytest.raises(BackendError):
        warnings_to_candidates(warnings, formatter_endpoint(foreign))
