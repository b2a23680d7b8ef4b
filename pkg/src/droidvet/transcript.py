"""Append-only session transcripts and bit-exact replay against the sim device.

Every event carries a chain hash over the canonical event body and the
previous chain value, so any byte-level tamper is detected at the first
divergent event. Device-routed calls additionally record the device
state digest after the call; replay re-executes them from the scenario
seed and compares digests, proving the recorded run is reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError, UnreplayableBackend

GENESIS = "0" * 64


def _canonical(event: dict) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def chain_hash(prev: str, event: dict) -> str:
    body = {k: v for k, v in event.items() if k != "chain"}
    return hashlib.sha256((prev + _canonical(body)).encode("utf-8")).hexdigest()


class TranscriptWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._chain = GENESIS
        self._fh = self.path.open("w", encoding="utf-8")

    def emit(self, event_type: str, **fields) -> dict:
        event = {"type": event_type, **fields}
        self._chain = chain_hash(self._chain, event)
        event["chain"] = self._chain
        self._fh.write(_canonical(event) + "\n")
        self._fh.flush()
        return event

    def close(self) -> None:
        self._fh.close()

    @property
    def digest(self) -> str:
        """Digest of the whole transcript: the last chain value."""
        return self._chain


def read_transcript(path: str | Path) -> list[dict]:
    events = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"transcript line is not valid JSON: {exc.msg}",
                              path=str(path), line=lineno) from exc
    return events


def transcript_digest(path: str | Path) -> str:
    events = read_transcript(path)
    return events[-1]["chain"] if events else GENESIS


@dataclass
class ReplayReport:
    ok: bool
    events_checked: int
    first_divergence: int | None = None
    reason: str = ""

    @property
    def verdict(self) -> str:
        return "PASS" if self.ok else "FAIL"


def replay(transcript_path: str | Path,
           scenario_path: str | Path | None = None) -> ReplayReport:
    """Re-execute a recorded session's device calls and verify the chain.

    Returns FAIL at the first event whose chain hash, payload, or
    post-call device digest diverges from the recording.
    """
    from .device import SimDevice, load_scenario
    from .device.sim import DEVICE_TOOLS, SimOperationError, step

    events = read_transcript(transcript_path)
    if not events:
        return ReplayReport(ok=False, events_checked=0, first_divergence=0,
                            reason="empty transcript")
    head = events[0]
    if head.get("type") != "session_start":
        return ReplayReport(ok=False, events_checked=0, first_divergence=0,
                            reason="transcript does not begin with session_start")
    if head.get("device_kind") != "sim":
        raise UnreplayableBackend(
            f"transcript was recorded on {head.get('device_kind')!r}; "
            "only sim-device transcripts replay")

    scenario_file = scenario_path or head.get("scenario_path")
    if not scenario_file:
        return ReplayReport(ok=False, events_checked=0, first_divergence=0,
                            reason="no scenario reference in transcript")
    scenario = load_scenario(scenario_file)
    if head.get("seed_digest") and scenario.seed_digest != head["seed_digest"]:
        return ReplayReport(ok=False, events_checked=1, first_divergence=0,
                            reason="scenario seed digest mismatch")

    device = SimDevice(scenario)
    chain = GENESIS
    calls: dict[int, dict] = {}
    for index, event in enumerate(events):
        expect = chain_hash(chain, event)
        if event.get("chain") != expect:
            return ReplayReport(ok=False, events_checked=index + 1,
                                first_divergence=index,
                                reason="chain hash mismatch (tampered event)")
        chain = event["chain"]

        if event["type"] == "tool_call":
            calls[event["seq"]] = event
        elif event["type"] == "tool_result":
            call = calls.get(event["seq"])
            if call is None:
                return ReplayReport(ok=False, events_checked=index + 1,
                                    first_divergence=index,
                                    reason=f"result without call seq {event['seq']}")
            if call["tool"] in DEVICE_TOOLS and event.get("routed") == "device":
                args = event.get("device_args", call["args"])
                try:
                    new_state, payload = step(device.state, call["tool"],
                                              args, scenario.behaviors)
                    device.state = new_state
                    status = "ok"
                except SimOperationError as exc:
                    payload = {"error": str(exc)}
                    status = "error"
                recorded = event.get("device_payload", event["payload"])
                if status != event["status"] or payload != recorded:
                    return ReplayReport(ok=False, events_checked=index + 1,
                                        first_divergence=index,
                                        reason="device result diverged")
                if event.get("device_digest") and \
                        device.state_digest() != event["device_digest"]:
                    return ReplayReport(ok=False, events_checked=index + 1,
                                        first_divergence=index,
                                        reason="device state digest diverged")
    return ReplayReport(ok=True, events_checked=len(events))
