"""Role-checked dispatch of toolkit calls to a device backend or workspace."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

from ..errors import ArgValidation, DroidvetError, TimeoutExceeded, UnknownTool
from ..schema import EvidenceKind, EvidenceRef
from .catalog import (RESULT_EVIDENCE_KINDS, TOOLKIT, VALIDATOR_SHELL_ALLOWLIST,
                      Role, Surface, ToolFunction)


@dataclass(frozen=True)
class ToolCall:
    session_id: str
    role: Role
    tool: str
    args: dict
    seq: int

    def to_dict(self) -> dict:
        return {"session_id": self.session_id, "role": self.role.value,
                "tool": self.tool, "args": self.args, "seq": self.seq}


@dataclass(frozen=True)
class ToolResult:
    call: ToolCall
    status: str                    # ok | error
    payload: dict
    duration_ms: float = 0.0
    evidence: EvidenceRef | None = None
    error_kind: str | None = None  # access_denied | arg_validation | backend | timeout
    routed: str | None = None      # device | workspace | None (never dispatched)
    device_args: dict | None = None      # args as the device backend saw them
    device_payload: dict | None = None   # payload before host-side bridging

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "call": self.call.to_dict(),
            "status": self.status,
            "payload": self.payload,
            "error_kind": self.error_kind,
            "evidence": self.evidence.to_dict() if self.evidence else None,
            "routed": self.routed,
        }


class DeviceBackend:
    """Device-facing tool surface. read_only calls must not change the
    observable device state."""

    kind = "abstract"

    def execute(self, tool: str, args: dict, read_only: bool) -> dict:
        raise NotImplementedError

    def state_digest(self) -> str:
        raise NotImplementedError


class ToolRegistry:
    """Immutable catalog plus the dispatch path used by every agent."""

    def __init__(self, tools: tuple[ToolFunction, ...] = TOOLKIT):
        self._tools: dict[str, ToolFunction] = {}
        self._aliases: dict[str, str] = {}
        for t in tools:
            self._tools[t.name] = t
            if t.alias:
                self._aliases[t.alias] = t.name
        self._last_seq: dict[str, int] = {}

    def resolve(self, name: str) -> ToolFunction:
        canonical = self._aliases.get(name, name)
        try:
            return self._tools[canonical]
        except KeyError:
            raise UnknownTool(f"no tool named {name!r}") from None

    def check_access(self, role: Role, tool_name: str) -> bool:
        return role in self.resolve(tool_name).allowed_roles

    def registry_manifest(self) -> list[ToolFunction]:
        return list(self._tools.values())

    def manifest_json(self) -> str:
        return json.dumps({"schema_version": "1",
                           "tools": [t.to_dict() for t in self._tools.values()]},
                          indent=2)

    def validate_args(self, tool: ToolFunction, args: dict) -> str | None:
        """Return a problem description, or None when args are valid."""
        known = {p.name: p for p in tool.params}
        for name in args:
            if name not in known:
                return f"unexpected argument {name!r}"
        for p in tool.params:
            if p.name not in args:
                if p.required:
                    return f"missing required argument {p.name!r}"
                continue
            value = args[p.name]
            if p.type == "string" and not isinstance(value, str):
                return f"argument {p.name!r} must be a string"
            if p.type == "int" and (isinstance(value, bool) or not isinstance(value, int)):
                return f"argument {p.name!r} must be an integer"
            if p.type == "bool" and not isinstance(value, bool):
                return f"argument {p.name!r} must be a boolean"
            if p.type == "map" and not isinstance(value, dict):
                return f"argument {p.name!r} must be an object"
        return None

    def invoke(self, call: ToolCall, backend: DeviceBackend, ws) -> ToolResult:
        """Dispatch one call. Failures come back as error results (the
        agent loop treats them as feedback), never as exceptions, except
        for UnknownTool which indicates a caller bug."""
        started = time.monotonic()
        tool = self.resolve(call.tool)

        last = self._last_seq.get(call.session_id)
        if last is not None and call.seq <= last:
            raise ValueError(
                f"tool call seq must increase per session: {call.seq} after {last}")
        self._last_seq[call.session_id] = call.seq

        routed: str | None = None
        device_args: dict | None = None
        device_payload: dict | None = None

        def finish(status, payload, error_kind=None, evidence=None):
            return ToolResult(call=call, status=status, payload=payload,
                              duration_ms=(time.monotonic() - started) * 1000,
                              evidence=evidence, error_kind=error_kind,
                              routed=routed, device_args=device_args,
                              device_payload=device_payload)

        if not self.check_access(call.role, call.tool):
            return finish("error",
                          {"error": f"role {call.role.value} is not granted {tool.name}"},
                          error_kind="access_denied")

        if (tool.name == "execute_shell_command" and call.role is Role.VALIDATOR):
            command = str(call.args.get("command", "")).strip()
            if not command.startswith(VALIDATOR_SHELL_ALLOWLIST):
                return finish(
                    "error",
                    {"error": "validator shell commands are restricted to "
                              + ", ".join(VALIDATOR_SHELL_ALLOWLIST)},
                    error_kind="access_denied")

        problem = self.validate_args(tool, call.args)
        if problem is not None:
            return finish("error", {"error": problem}, error_kind="arg_validation")

        try:
            if tool.surface is Surface.DEVICE:
                bridged = self._bridge_to_device(tool.name, call.args, ws)
                routed, device_args = "device", bridged
                raw = backend.execute(tool.name, bridged,
                                      read_only=tool.read_only)
                device_payload = raw
                payload = self._bridge_from_device(tool.name, call.args, raw, ws)
            else:
                routed = "workspace"
                payload = ws.handle(tool.name, call.args)
        except TimeoutExceeded as exc:
            return finish("error", {"error": str(exc)}, error_kind="timeout")
        except ArgValidation as exc:
            return finish("error", {"error": str(exc)}, error_kind="arg_validation")
        except DroidvetError as exc:
            if routed == "device":
                device_payload = {"error": str(exc)}
            return finish("error", {"error": str(exc)}, error_kind="backend")

        evidence = None
        if ws is not None and payload:
            kind = RESULT_EVIDENCE_KINDS.get(tool.result, EvidenceKind.CLAIM_TEXT)
            evidence = ws.store_evidence(
                kind, json.dumps({"tool": tool.name, "payload": payload},
                                 ensure_ascii=False, sort_keys=True))
        return finish("ok", payload, evidence=evidence)

    @staticmethod
    def _bridge_to_device(tool_name: str, args: dict, ws) -> dict:
        """File-carrying calls cross the host/device boundary here: the
        registry resolves workspace paths so backends only see content."""
        import base64
        if tool_name == "upload_file_to_device":
            local = ws.local_path(args["local_path"])
            if not local.is_file():
                raise ArgValidation(f"no local file {args['local_path']!r} to upload")
            return {"device_path": args["device_path"],
                    "content_b64": base64.b64encode(local.read_bytes()).decode()}
        if tool_name == "install_apk":
            local = ws.local_path(args["apk_path"])
            if not local.is_file():
                raise ArgValidation(f"no package file {args['apk_path']!r}")
            return {"descriptor_json": local.read_text(encoding="utf-8",
                                                       errors="replace")}
        return args

    @staticmethod
    def _bridge_from_device(tool_name: str, args: dict, payload: dict, ws) -> dict:
        import base64
        if tool_name == "pull_device_file" and "content_b64" in payload:
            rel = args.get("local_path") or \
                "pulled/" + payload["device_path"].rsplit("/", 1)[-1]
            ws.write_local(rel, base64.b64decode(payload["content_b64"]))
            return {"device_path": payload["device_path"],
                    "local_path": rel, "size": payload["size"]}
        return payload


def role_grants(tools: tuple[ToolFunction, ...] = TOOLKIT) -> dict[Role, set[str]]:
    grants: dict[Role, set[str]] = {r: set() for r in Role}
    for t in tools:
        for r in t.allowed_roles:
            grants[r].add(t.name)
    return grants
