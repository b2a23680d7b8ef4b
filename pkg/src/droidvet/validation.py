"""The validation state machine: plan, execute, independently verify.

One session takes a speculative finding through repeated
plan -> execute -> verify cycles until every task passes its oracle,
the finding is confirmed as a false positive, the re-planning budget
runs out, or an unrecoverable error occurs. A task is only ever marked
validated by an oracle PASS; the executor's own success claims carry no
authority.
"""

from __future__ import annotations

import json
import re
import time
import uuid
from dataclasses import dataclass, field

from .errors import (BackendError, DroidvetError, SchemaError, StepBudgetExceeded,
                     TimeoutExceeded)
from .gateway import Gateway, ModelEndpoint, ToolCallRequest
from .prompts import render_prompt
from .schema import (EvidenceKind, EvidenceRef, Lifecycle,
                     StandardizedVulnerability, ValidationOutcome, promote_finding)
from .tools.catalog import Role
from .tools.registry import ToolCall, ToolRegistry, ToolResult

TASK_KINDS = ("exploit_step", "determine_potential_fp")


@dataclass
class Task:
    index: int
    intent: str
    expected_outcome: str
    kind: str = "exploit_step"
    status: str = "pending"   # pending -> claimed_done -> validated | rejected

    _TRANSITIONS = {"pending": {"claimed_done"},
                    "claimed_done": {"validated", "rejected"}}

    def advance(self, status: str) -> None:
        if status not in self._TRANSITIONS.get(self.status, ()):  # one-way only
            raise ValueError(f"task cannot move {self.status} -> {status}")
        self.status = status

    def to_dict(self) -> dict:
        return {"index": self.index, "intent": self.intent, "kind": self.kind,
                "expected_outcome": self.expected_outcome, "status": self.status}


@dataclass
class TaskPlan:
    finding_id: str
    tasks: list[Task]
    revision: int = 0

    def to_dict(self) -> dict:
        return {"finding_id": self.finding_id, "revision": self.revision,
                "tasks": [t.to_dict() for t in self.tasks]}


@dataclass
class ExecutionClaim:
    task: Task
    narrative: str
    tool_trace: list[ToolResult]
    claimed_success: bool

    def __post_init__(self):
        if self.claimed_success and not self.tool_trace:
            raise ValueError("a success claim requires a non-empty tool trace")


@dataclass
class OracleSpec:
    claim_summary: str
    expected_effect: str
    probes: list[ToolCall]


@dataclass
class OracleVerdict:
    spec: OracleSpec
    evidence: list[EvidenceRef]
    decision: str          # PASS | FAIL
    rationale: str


@dataclass
class SessionConfig:
    max_iterations: int = 20
    step_budget: int = 25          # tool calls per task
    repeat_call_limit: int = 5     # consecutive identical calls abort the task
    wall_clock_s: float = 70 * 60


@dataclass
class SessionLedger:
    session_id: str
    finding_id: str
    max_iterations: int
    apk_id: str = ""
    finding_title: str = ""
    iterations_used: int = 0
    tool_call_count: dict[str, int] = field(default_factory=dict)
    policy_violations: list[dict] = field(default_factory=list)
    token_usage: dict[str, dict] = field(default_factory=dict)
    claims_total: int = 0
    claims_rejected: int = 0
    outcome: ValidationOutcome | None = None
    wall_time_s: float = 0.0
    evidence_count: int = 0
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "finding_id": self.finding_id,
            "apk_id": self.apk_id,
            "finding_title": self.finding_title,
            "iterations_used": self.iterations_used,
            "max_iterations": self.max_iterations,
            "tool_call_count": self.tool_call_count,
            "policy_violations": self.policy_violations,
            "token_usage": self.token_usage,
            "claims_total": self.claims_total,
            "claims_rejected": self.claims_rejected,
            "outcome": self.outcome.value if self.outcome else None,
            "wall_time_s": self.wall_time_s,
            "evidence_count": self.evidence_count,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionLedger":
        ledger = cls(session_id=d["session_id"], finding_id=d["finding_id"],
                     max_iterations=d.get("max_iterations", 20))
        ledger.apk_id = d.get("apk_id", "")
        ledger.finding_title = d.get("finding_title", "")
        ledger.iterations_used = d.get("iterations_used", 0)
        ledger.tool_call_count = d.get("tool_call_count", {})
        ledger.policy_violations = d.get("policy_violations", [])
        ledger.token_usage = d.get("token_usage", {})
        ledger.claims_total = d.get("claims_total", 0)
        ledger.claims_rejected = d.get("claims_rejected", 0)
        ledger.outcome = ValidationOutcome(d["outcome"]) if d.get("outcome") else None
        ledger.wall_time_s = d.get("wall_time_s", 0.0)
        ledger.evidence_count = d.get("evidence_count", 0)
        ledger.notes = d.get("notes", "")
        return ledger


@dataclass
class AgentBackends:
    planner: ModelEndpoint
    executor: ModelEndpoint
    validator: ModelEndpoint

    def named(self) -> dict[str, ModelEndpoint]:
        return {"planner": self.planner, "executor": self.executor,
                "validator": self.validator}


class Session:
    """Shared context for the agent conversations of one validation run."""

    def __init__(self, finding: StandardizedVulnerability, registry: ToolRegistry,
                 device, ws, config: SessionConfig | None = None,
                 gateway: Gateway | None = None, transcript=None,
                 session_id: str | None = None, apk_id: str = ""):
        self.finding = finding
        self.registry = registry
        self.device = device
        self.ws = ws
        self.config = config or SessionConfig()
        self.gateway = gateway or Gateway()
        self.transcript = transcript
        self.session_id = session_id or f"s-{finding.id[2:14]}"
        self.ledger = SessionLedger(session_id=self.session_id,
                                    finding_id=finding.id,
                                    finding_title=finding.title,
                                    apk_id=apk_id,
                                    max_iterations=self.config.max_iterations)
        self._seq = 0
        self._manifest = [t.to_dict() for t in registry.registry_manifest()]

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def emit(self, event_type: str, **fields) -> None:
        if self.transcript is not None:
            self.transcript.emit(event_type, **fields)

    def run_agent(self, role: Role, endpoint: ModelEndpoint,
                  messages: list[dict], step_budget: int | None = None
                  ) -> tuple[str, list[ToolResult]]:
        """Drive one agent conversation to its final text turn.

        Tool-call turns are dispatched through the registry; denials and
        argument problems flow back to the model as feedback. Raises
        StepBudgetExceeded on budget or identical-call repetition, and
        BackendError when the model yields no usable final turn.
        """
        trace: list[ToolResult] = []
        repeat: tuple[str, str] | None = None
        repeat_count = 0
        budget = step_budget or self.config.step_budget
        conversation = list(messages)
        while True:
            turn = self.gateway.complete(endpoint, conversation, self._manifest)
            if turn.refusal is not None:
                raise BackendError(f"{role.value} backend refused: {turn.refusal}")
            if not turn.tool_calls:
                if turn.text is None:
                    raise BackendError(f"{role.value} backend returned an empty turn")
                return turn.text, trace
            conversation.append({"role": "assistant",
                                 "content": json.dumps(turn.to_dict(),
                                                       ensure_ascii=False)})
            for request in turn.tool_calls:
                signature = (request.tool, json.dumps(request.args, sort_keys=True))
                repeat_count = repeat_count + 1 if signature == repeat else 1
                repeat = signature
                if repeat_count >= self.config.repeat_call_limit:
                    raise StepBudgetExceeded(
                        f"{role.value} repeated {request.tool} with identical "
                        f"arguments {repeat_count} times")
                if len(trace) >= budget:
                    raise StepBudgetExceeded(
                        f"{role.value} exceeded the {budget}-call task budget")
                result = self._dispatch(role, request)
                trace.append(result)
                conversation.append({
                    "role": "tool",
                    "content": json.dumps({"tool": request.tool,
                                           "status": result.status,
                                           "payload": result.payload},
                                          ensure_ascii=False)})

    def _dispatch(self, role: Role, request: ToolCallRequest) -> ToolResult:
        call = ToolCall(session_id=self.session_id, role=role,
                        tool=self.registry.resolve(request.tool).name,
                        args=request.args, seq=self.next_seq())
        self.emit("tool_call", role=role.value, tool=call.tool, args=call.args,
                  seq=call.seq)
        result = self.registry.invoke(call, self.device, self.ws)
        self.ledger.tool_call_count[role.value] = \
            self.ledger.tool_call_count.get(role.value, 0) + 1
        if result.error_kind == "access_denied":
            violation = {"seq": call.seq, "role": role.value, "tool": call.tool}
            self.ledger.policy_violations.append(violation)
            self.emit("policy_violation", **violation)
        if result.evidence is not None:
            self.ledger.evidence_count += 1
        event = {"seq": call.seq, "status": result.status,
                 "payload": result.payload, "error_kind": result.error_kind,
                 "routed": result.routed,
                 "evidence": result.evidence.to_dict() if result.evidence else None}
        if result.routed == "device":
            event["device_args"] = result.device_args
            event["device_payload"] = result.device_payload
            event["device_digest"] = self.device.state_digest()
        self.emit("tool_result", **event)
        return result

    def collect_token_usage(self) -> None:
        usage: dict[str, dict] = {}
        for ex in self.gateway.exchanges:
            agent = ex.agent or "unknown"
            slot = usage.setdefault(agent, {"prompt_tokens": 0,
                                            "completion_tokens": 0, "calls": 0})
            slot["prompt_tokens"] += ex.prompt_tokens
            slot["completion_tokens"] += ex.completion_tokens
            slot["calls"] += 1
        self.ledger.token_usage = usage


def _parse_agent_json(text: str, what: str) -> dict:
    """Agents must end with a JSON object; tolerate markdown fences."""
    cleaned = text.strip()
    fenced = re.search(r"```(?:json)?\s*(\{.*\})\s*```", cleaned, re.DOTALL)
    if fenced:
        cleaned = fenced.group(1)
    start = cleaned.find("{")
    end = cleaned.rfind("}")
    if start == -1 or end <= start:
        raise BackendError(f"{what} is not a JSON object: {text[:120]!r}")
    try:
        doc = json.loads(cleaned[start:end + 1])
    except json.JSONDecodeError as exc:
        raise BackendError(f"{what} is malformed JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise BackendError(f"{what} must be a JSON object")
    return doc


def plan(session: Session, endpoint: ModelEndpoint, feedback: str | None = None,
         revision: int = 0) -> TaskPlan:
    """Ask the planner for an ordered task list over read-only reconnaissance."""
    finding = session.finding
    if finding.lifecycle is not Lifecycle.SPECULATIVE:
        raise BackendError(f"finding {finding.id} is not speculative")
    messages = [
        {"role": "system", "content": render_prompt(
            "planner", tool_list=_grant_list(session, Role.PLANNER))},
        {"role": "user", "content": json.dumps(
            {"finding": finding.to_dict(),
             "feedback": feedback or "",
             "revision": revision}, ensure_ascii=False, indent=2)},
    ]
    text, _trace = session.run_agent(Role.PLANNER, endpoint, messages)
    doc = _parse_agent_json(text, "plan")
    raw_tasks = doc.get("tasks")
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise BackendError("plan must contain a non-empty tasks array")
    tasks = []
    for i, raw in enumerate(raw_tasks):
        kind = raw.get("kind", "exploit_step")
        if kind not in TASK_KINDS:
            raise BackendError(f"unknown task kind {kind!r}")
        intent = str(raw.get("intent", "")).strip()
        expected = str(raw.get("expected_outcome", "")).strip()
        if not intent or not expected:
            raise BackendError("every task needs an intent and expected_outcome")
        tasks.append(Task(index=i, intent=intent, expected_outcome=expected,
                          kind=kind))
    task_plan = TaskPlan(finding_id=finding.id, tasks=tasks, revision=revision)
    session.emit("plan", revision=revision, feedback=feedback or "",
                 tasks=[t.to_dict() for t in tasks])
    return task_plan


def execute_task(session: Session, endpoint: ModelEndpoint, task: Task
                 ) -> ExecutionClaim:
    """Have the executor carry out one task and return its claim + trace."""
    if task.status != "pending":
        raise BackendError(f"task {task.index} is not pending")
    messages = [
        {"role": "system", "content": render_prompt(
            "executor", tool_list=_grant_list(session, Role.EXECUTOR))},
        {"role": "user", "content": json.dumps(
            {"finding_title": session.finding.title,
             "task": task.to_dict()}, ensure_ascii=False, indent=2)},
    ]
    text, trace = session.run_agent(Role.EXECUTOR, endpoint, messages)
    doc = _parse_agent_json(text, "execution claim")
    claimed = bool(doc.get("claimed_success", False))
    if claimed and not trace:
        claimed = False  # success claims without any tool evidence carry nothing
    claim = ExecutionClaim(task=task,
                           narrative=str(doc.get("narrative", "")),
                           tool_trace=trace, claimed_success=claimed)
    task.advance("claimed_done")
    session.ledger.claims_total += 1
    session.emit("claim", task_index=task.index, narrative=claim.narrative,
                 claimed_success=claim.claimed_success,
                 trace_seqs=[r.call.seq for r in trace])
    return claim


def validate_claim(session: Session, endpoint: ModelEndpoint,
                   claim: ExecutionClaim) -> OracleVerdict:
    """Independent oracle check of one execution claim.

    The validator never trusts claimed_success: it restates the claim,
    derives the testable effect, probes with its own read-only calls,
    and decides PASS/FAIL. A claim with no tool trace fails outright.
    """
    task = claim.task
    if task.status != "claimed_done":
        raise BackendError(f"task {task.index} has no pending claim")

    if not claim.tool_trace:
        spec = OracleSpec(claim_summary=claim.narrative or "(empty claim)",
                          expected_effect=task.expected_outcome, probes=[])
        verdict = OracleVerdict(spec=spec, evidence=[], decision="FAIL",
                                rationale="no evidence: the executor made no "
                                          "tool calls to support this claim")
        _finish_verdict(session, task, verdict)
        return verdict

    trace_summary = [{"tool": r.call.tool, "status": r.status,
                      "payload": r.payload} for r in claim.tool_trace]
    messages = [
        {"role": "system", "content": render_prompt(
            "validator", tool_list=_grant_list(session, Role.VALIDATOR))},
        {"role": "user", "content": json.dumps(
            {"task": task.to_dict(),
             "claim": {"narrative": claim.narrative,
                       "claimed_success": claim.claimed_success},
             "executor_trace": trace_summary}, ensure_ascii=False, indent=2)},
    ]
    text, probes = session.run_agent(Role.VALIDATOR, endpoint, messages)
    doc = _parse_agent_json(text, "oracle verdict")
    decision = str(doc.get("decision", "")).upper()
    if decision not in ("PASS", "FAIL"):
        raise BackendError(f"oracle decision must be PASS or FAIL, got {decision!r}")
    spec = OracleSpec(
        claim_summary=str(doc.get("claim_summary", claim.narrative)),
        expected_effect=str(doc.get("expected_effect", task.expected_outcome)),
        probes=[r.call for r in probes])
    verdict = OracleVerdict(
        spec=spec,
        evidence=[r.evidence for r in probes if r.evidence is not None],
        decision=decision,
        rationale=str(doc.get("rationale", "")))
    _finish_verdict(session, task, verdict)
    return verdict


def _finish_verdict(session: Session, task: Task, verdict: OracleVerdict) -> None:
    task.advance("validated" if verdict.decision == "PASS" else "rejected")
    if verdict.decision == "FAIL":
        session.ledger.claims_rejected += 1
    session.emit("verdict", task_index=task.index, decision=verdict.decision,
                 rationale=verdict.rationale,
                 claim_summary=verdict.spec.claim_summary,
                 expected_effect=verdict.spec.expected_effect,
                 probe_seqs=[c.seq for c in verdict.spec.probes],
                 evidence=[e.to_dict() for e in verdict.evidence])


def _grant_list(session: Session, role: Role) -> str:
    lines = []
    for tool in session.registry.registry_manifest():
        if role in tool.allowed_roles:
            params = ", ".join(p.name + ("" if p.required else "?")
                               for p in tool.params)
            lines.append(f"- {tool.name}({params}): {tool.description}")
    return "\n".join(lines)


def run_session(finding: StandardizedVulnerability, backends: AgentBackends,
                registry: ToolRegistry, device, ws,
                config: SessionConfig | None = None, transcript=None,
                gateway: Gateway | None = None, apk_id: str = ""
                ) -> tuple[SessionLedger, StandardizedVulnerability]:
    """Drive one finding through the full plan/execute/verify loop."""
    session = Session(finding, registry, device, ws, config=config,
                      gateway=gateway, transcript=transcript, apk_id=apk_id)
    config = session.config
    ledger = session.ledger
    started = time.monotonic()
    session.emit("session_start", session_id=session.session_id,
                 finding_id=finding.id, device_kind=getattr(device, "kind", "?"),
                 scenario_path=str(getattr(getattr(device, "scenario", None),
                                           "source_path", "")) or None,
                 seed_digest=getattr(getattr(device, "scenario", None),
                                     "seed_digest", None),
                 schema_version="1")

    outcome = ValidationOutcome.TECHNICAL_ERROR
    promoted = finding
    feedback: str | None = None
    revision = 0
    poc_evidence: list[EvidenceRef] = []

    try:
        while True:
            if time.monotonic() - started > config.wall_clock_s:
                ledger.notes = "session wall clock budget exhausted"
                outcome = ValidationOutcome.TECHNICAL_ERROR
                break
            task_plan = plan(session, backends.planner, feedback=feedback,
                             revision=revision)
            failed_rationale: str | None = None
            failed_index: int | None = None
            fp_confirmed = False

            for task in task_plan.tasks:
                try:
                    claim = execute_task(session, backends.executor, task)
                except StepBudgetExceeded as exc:
                    failed_rationale = str(exc)
                    failed_index = task.index
                    break
                verdict = validate_claim(session, backends.validator, claim)
                if verdict.decision == "FAIL":
                    failed_rationale = verdict.rationale
                    failed_index = task.index
                    break
                poc_evidence.extend(verdict.evidence)
                poc_evidence.extend(r.evidence for r in claim.tool_trace
                                    if r.evidence is not None)
                if task.kind == "determine_potential_fp":
                    # oracle confirmed the finding is not exploitable
                    fp_confirmed = True
                    break

            if fp_confirmed:
                outcome = ValidationOutcome.FILTERED_FP
                promoted = promote_finding(finding, outcome)
                break
            if failed_rationale is None:
                outcome = ValidationOutcome.VALIDATED_TP
                bundle = session.ws.store_evidence(
                    EvidenceKind.FILE_ARTIFACT, json.dumps({
                        "finding_id": finding.id,
                        "tasks": [t.to_dict() for t in task_plan.tasks],
                        "evidence": [e.to_dict() for e in poc_evidence],
                    }, ensure_ascii=False, indent=2, sort_keys=True))
                ledger.evidence_count += 1
                promoted = promote_finding(finding, outcome, poc=bundle)
                break
            if ledger.iterations_used >= config.max_iterations:
                outcome = ValidationOutcome.MAX_ITERATIONS
                ledger.notes = f"stopped after {ledger.iterations_used} re-plans"
                break
            ledger.iterations_used += 1
            revision += 1
            feedback = f"task {failed_index} failed validation: {failed_rationale}"
    except (BackendError, SchemaError, TimeoutExceeded, DroidvetError) as exc:
        outcome = ValidationOutcome.TECHNICAL_ERROR
        ledger.notes = f"{type(exc).__name__}: {exc}"

    ledger.outcome = outcome
    ledger.wall_time_s = time.monotonic() - started
    session.collect_token_usage()
    session.emit("outcome", outcome=outcome.value,
                 iterations_used=ledger.iterations_used,
                 claims_total=ledger.claims_total,
                 claims_rejected=ledger.claims_rejected)
    return ledger, promoted
