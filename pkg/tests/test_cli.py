"""CLI behavior: pipelines end-to-end, exit codes, output discipline."""

from __future__ import annotations

import json
import shutil

import pytest

from droidvet import fixtures
from droidvet.cli import main
from droidvet.schema import load_findings

GOLDEN = {name: str(fixtures.golden_path(name)) for name in
          ("scenario.json", "planner.json", "executor.json", "validator.json",
           "analyzer.json", "findings.json", "golden.apk")}
GOLDEN_SOURCES = str(fixtures.golden_path("sources"))


def run(*argv) -> int:
    return main(list(argv))


def discover_args(out, apk=GOLDEN["golden.apk"]):
    return ["discover", "--apk", apk,
            "--analyzer", f"scripted:{GOLDEN['analyzer.json']}",
            "--aggregator", "passthrough",
            "--decompiler", f"fixture:{GOLDEN_SOURCES}",
            "--out", str(out)]


def test_discover_golden_apk_one_crypto_finding(tmp_path, capsys):
    out = tmp_path / "disc"
    assert run(*discover_args(out)) == 0
    findings = load_findings((out / "golden.findings.json").read_text())
    assert len(findings) == 1
    assert findings[0].category.value == "CRYPTO"
    assert findings[0].locations[0].file_path == "res/values/strings.xml"
    ledger = json.loads((out / "golden.discovery_ledger.json").read_text())
    assert ledger["package"] == "com.ghera.tokenio"
    assert ledger["findings"] == 1
    assert "1 speculative finding" in capsys.readouterr().out


def test_discover_corpus_batches(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        shutil.copy(GOLDEN["golden.apk"], corpus / f"app{i}.apk")
    out = tmp_path / "out"
    code = run("discover", "--corpus", str(corpus),
               "--analyzer", f"scripted:{GOLDEN['analyzer.json']}",
               "--aggregator", "passthrough",
               "--decompiler", f"fixture:{GOLDEN_SOURCES}",
               "--out", str(out))
    # the scripted analyzer file holds one turn; give each APK its own script
    assert code == 3  # scripted provider exhausted on the second APK

    out2 = tmp_path / "out2"
    script = tmp_path / "analyzer_loop.json"
    doc = json.loads(open(GOLDEN["analyzer.json"]).read())
    doc["loop"] = True
    script.write_text(json.dumps(doc))
    code = run("discover", "--corpus", str(corpus),
               "--analyzer", f"scripted:{script}",
               "--aggregator", "passthrough",
               "--decompiler", f"fixture:{GOLDEN_SOURCES}",
               "--out", str(out2))
    assert code == 0
    index = json.loads((out2 / "index.json").read_text())
    assert len(index["runs"]) == 3
    assert all((out2 / r["findings_file"]).exists() for r in index["runs"])


def test_discover_missing_sast_adapter_exit_config(tmp_path):
    report = tmp_path / "r.json"
    report.write_text("{}")
    code = run(*discover_args(tmp_path / "out"),
               "--sast", f"qark={report}")
    assert code == 2


def test_discover_refuses_to_clobber(tmp_path):
    out = tmp_path / "disc"
    assert run(*discover_args(out)) == 0
    assert run(*discover_args(out)) == 2
    assert run(*discover_args(out), "--overwrite") == 0


def validate_args(out, findings=GOLDEN["findings.json"]):
    return ["validate", "--findings", findings,
            "--device", f"sim:{GOLDEN['scenario.json']}",
            "--planner", f"scripted:{GOLDEN['planner.json']}",
            "--executor", f"scripted:{GOLDEN['executor.json']}",
            "--validator", f"scripted:{GOLDEN['validator.json']}",
            "--out", str(out)]


def test_validate_golden_end_to_end(tmp_path, capsys):
    out = tmp_path / "val"
    assert run(*validate_args(out)) == 0
    printed = capsys.readouterr().out
    assert "★" in printed

    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcomes"] == {"★": 1}
    assert summary["claims"]["total"] == 3

    ledgers = list((out / "ledgers").glob("*.json"))
    assert len(ledgers) == 1
    ledger = json.loads(ledgers[0].read_text())
    assert ledger["outcome"] == "validated_tp"

    # evidence directory is populated with content-addressed artifacts
    evidence = list((out / "workspace" / "sessions").glob("*/evidence/*"))
    assert evidence, "expected stored evidence artifacts"

    promoted = json.loads(next((out / "findings").glob("*.json")).read_text())
    assert promoted["lifecycle"] == "validated"


def test_validate_empty_findings_zero_summary(tmp_path):
    empty = tmp_path / "none.json"
    empty.write_text('{"schema_version": "1", "findings": []}')
    out = tmp_path / "val"
    assert run(*validate_args(out, findings=str(empty))) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sessions"] == 0


def test_validate_adb_without_device_reports_technical_error(tmp_path):
    out = tmp_path / "val"
    code = run("validate", "--findings", GOLDEN["findings.json"],
               "--device", "adb",
               "--planner", f"scripted:{GOLDEN['planner.json']}",
               "--executor", f"scripted:{GOLDEN['executor.json']}",
               "--validator", f"scripted:{GOLDEN['validator.json']}",
               "--out", str(out))
    assert code == 4
    ledger = json.loads(next((out / "ledgers").glob("*.json")).read_text())
    assert ledger["outcome"] == "technical_error"
    assert "DeviceUnavailable" in ledger["notes"]


def test_replay_command_round_trip(tmp_path, capsys):
    out = tmp_path / "val"
    assert run(*validate_args(out)) == 0
    transcript = next((out / "transcripts").glob("*.jsonl"))
    assert run("replay", "--transcript", str(transcript)) == 0
    assert capsys.readouterr().out.startswith("PASS")

    # single-byte tamper flips the verdict
    blob = transcript.read_text()
    tampered = blob.replace("reset token accepted", "reset token accepted!", 1)
    assert tampered != blob
    transcript.write_text(tampered)
    assert run("replay", "--transcript", str(transcript)) == 5
    assert capsys.readouterr().out.startswith("FAIL")


def test_replay_adb_transcript_unreplayable(tmp_path):
    from droidvet.transcript import TranscriptWriter
    path = tmp_path / "adb.jsonl"
    writer = TranscriptWriter(path)
    writer.emit("session_start", session_id="s", finding_id="f",
                device_kind="adb", scenario_path=None, seed_digest=None,
                schema_version="1")
    writer.close()
    assert run("replay", "--transcript", str(path)) == 5


def test_bench_grid_matches_golden_csv(tmp_path):
    out = tmp_path / "bench"
    assert run("bench", "--out", str(out)) == 0
    golden = fixtures.fixture_path("bench_grid.csv").read_text()
    assert (out / "grid.csv").read_text() == golden
    report = json.loads((out / "bench_report.json").read_text())
    tools = {t["tool"]: t for t in report["tools"]}
    assert tools["mobsf"]["recall"]["percent"] == "18.3"
    assert tools["agg_g25p"]["alerts"] == 82


def test_report_command_over_ledgers(tmp_path):
    out = tmp_path / "val"
    assert run(*validate_args(out)) == 0
    report_out = tmp_path / "rep"
    assert run("report", "--ledgers", str(out / "ledgers"),
               "--out", str(report_out)) == 0
    report = json.loads((report_out / "report.json").read_text())
    assert report["sessions"] == 1
    assert report["outcomes"] == {"★": 1}


def test_missing_findings_file_exit_config(tmp_path):
    assert run(*validate_args(tmp_path / "v", findings="/nope.json")) == 2


def test_unknown_device_spec_exit_config(tmp_path):
    code = run("validate", "--findings", GOLDEN["findings.json"],
               "--device", "quantum:foo",
               "--planner", "passthrough", "--executor", "passthrough",
               "--validator", "passthrough", "--out", str(tmp_path / "v"))
    assert code == 2
