"""Transcript recording, chained integrity, and bit-exact replay."""

from __future__ import annotations

import json

import pytest

from droidvet.errors import UnreplayableBackend
from droidvet.transcript import (TranscriptWriter, read_transcript, replay,
                                 transcript_digest)
from droidvet.validation import run_session
from droidvet.schema import ValidationOutcome

from loop_helpers import backends_from, crypto_finding, golden_turns, \
    make_session_parts


def record_golden_session(tmp_path, run_id=0):
    registry, device, ws = make_session_parts(tmp_path / f"run{run_id}")
    turns = golden_turns()
    backends = backends_from(turns["planner"], turns["executor"],
                             turns["validator"])
    transcript_path = tmp_path / f"run{run_id}" / "transcript.jsonl"
    writer = TranscriptWriter(transcript_path)
    ledger, promoted = run_session(crypto_finding(), backends, registry,
                                   device, ws, transcript=writer)
    writer.close()
    assert ledger.outcome is ValidationOutcome.VALIDATED_TP
    return transcript_path


def test_transcript_records_full_event_stream(tmp_path):
    path = record_golden_session(tmp_path)
    events = read_transcript(path)
    kinds = [e["type"] for e in events]
    assert kinds[0] == "session_start"
    assert kinds[-1] == "outcome"
    assert kinds.count("plan") == 1
    assert kinds.count("claim") == 3
    assert kinds.count("verdict") == 3
    assert "tool_call" in kinds and "tool_result" in kinds


def test_replay_unmodified_transcript_passes(tmp_path):
    path = record_golden_session(tmp_path)
    report = replay(path)
    assert report.verdict == "PASS"
    assert report.events_checked == len(read_transcript(path))


def test_replay_detects_single_byte_tamper_at_first_divergence(tmp_path):
    path = record_golden_session(tmp_path)
    lines = path.read_text().splitlines()
    # flip one byte inside a recorded tool result payload
    target = next(i for i, l in enumerate(lines)
                  if '"type":"tool_result"' in l and '"exists":true' in l)
    tampered = lines[target].replace('"exists":true', '"exists":false', 1)
    assert tampered != lines[target]
    lines[target] = tampered
    path.write_text("\n".join(lines) + "\n")

    report = replay(path)
    assert report.verdict == "FAIL"
    assert report.first_divergence == target
    assert "tamper" in report.reason


def test_replay_detects_tampered_plan_event(tmp_path):
    # chain verification covers non-device events too
    path = record_golden_session(tmp_path)
    lines = path.read_text().splitlines()
    target = next(i for i, l in enumerate(lines) if '"type":"plan"' in l)
    lines[target] = lines[target].replace("Extract", "Extracu", 1)
    path.write_text("\n".join(lines) + "\n")
    report = replay(path)
    assert report.verdict == "FAIL"
    assert report.first_divergence == target


def test_transcript_digests_deterministic_across_runs(tmp_path):
    digests = {transcript_digest(record_golden_session(tmp_path, run_id=i))
               for i in range(3)}
    assert len(digests) == 1


def test_replay_refuses_non_sim_backends(tmp_path):
    path = tmp_path / "adb.jsonl"
    writer = TranscriptWriter(path)
    writer.emit("session_start", session_id="s", finding_id="f",
                device_kind="adb", scenario_path=None, seed_digest=None,
                schema_version="1")
    writer.close()
    with pytest.raises(UnreplayableBackend):
        replay(path)


def test_replay_requires_scenario_reference(tmp_path):
    path = tmp_path / "lost.jsonl"
    writer = TranscriptWriter(path)
    writer.emit("session_start", session_id="s", finding_id="f",
                device_kind="sim", scenario_path=None, seed_digest=None,
                schema_version="1")
    writer.close()
    report = replay(path)
    assert report.verdict == "FAIL"
    assert "scenario" in report.reason
