"""In-process device backend with deterministic, replayable semantics.

step() is a pure transition: the same (state, tool, args) always yields
the same (state', payload). Intrinsically read-only tools are handled
against the input state without copying, so they cannot mutate it by
construction; scenario behavior rules may still react to any event,
modelling the application's own logic (for example a token check
navigating to a new screen after launch_application). Tool-level
failures surface as SimOperationError, which the registry folds into
error results.
"""

from __future__ import annotations

import base64
import json
import re

from ..errors import DroidvetError
from ..tools.catalog import TOOLKIT, Surface
from ..tools.registry import DeviceBackend
from .scenario import Rule, Scenario
from .state import AppRecord, DeviceState, UiNode

SDK_PROPS = {
    "ro.build.version.sdk": "36",
    "ro.product.model": "droidvet-sim",
    "ro.serialno": "SIM0001",
}

READ_ONLY_DEVICE_TOOLS = frozenset(
    t.name for t in TOOLKIT if t.surface is Surface.DEVICE and t.read_only)
DEVICE_TOOLS = frozenset(
    t.name for t in TOOLKIT if t.surface is Surface.DEVICE)


class SimOperationError(DroidvetError):
    """Tool-level device failure (missing file, unknown element, ...)."""


# -- element resolution ------------------------------------------------

def _resolve_element(ui: UiNode, target: str) -> tuple[UiNode | None, str]:
    """Multi-strategy positioning: node id, exact text, bounds-center."""
    for node in ui.walk():
        if node.id and node.id == target:
            return node, "id"
    for node in ui.walk():
        if node.text and node.text == target:
            return node, "text"
    coords = re.fullmatch(r"\s*(\d+)\s*,\s*(\d+)\s*", target)
    if coords:
        x, y = int(coords.group(1)), int(coords.group(2))
        hit = None
        for node in ui.walk():
            l, t, r, b = node.bounds
            if l <= x < r and t <= y < b:
                hit = node  # deepest match wins
        if hit is not None:
            return hit, "bounds"
    return None, "none"


# -- behavior rules ----------------------------------------------------

def _args_match(matchers: dict, args: dict) -> bool:
    for key, want in matchers.items():
        have = args
        for part in key.split("."):
            if not isinstance(have, dict) or part not in have:
                return False
            have = have[part]
        if isinstance(want, dict) and "contains" in want:
            if want["contains"] not in str(have):
                return False
        elif have != want:
            return False
    return True


def _rule_matches(rule: Rule, event: dict) -> bool:
    if rule.trigger_kind == "tool" and event["kind"] == "tool_call":
        if rule.match["tool"] != event["tool"]:
            return False
        return _args_match(rule.match.get("args_match", {}), event["args"])
    if rule.trigger_kind == "intent" and event["kind"] == "intent":
        return _args_match(rule.match["intent"], event["intent"])
    return False


def _apply_effects(state: DeviceState, effects: tuple[dict, ...]) -> None:
    for effect in effects:
        if "set_ui" in effect:
            state.ui = UiNode.from_dict(effect["set_ui"])
        if "log" in effect:
            entry = effect["log"]
            state.append_log(entry.get("tag", "app"), entry.get("level", "I"),
                             entry.get("message", ""))
        if "write_file" in effect:
            spec = effect["write_file"]
            state.fs[spec["path"]] = spec.get("text", "").encode("utf-8")
        if "delete_file" in effect:
            state.fs.pop(effect["delete_file"], None)
        if "set_app_state" in effect:
            spec = effect["set_app_state"]
            record = state.apps.setdefault(spec["package"], AppRecord())
            record.state = spec.get("state", record.state)
        if "register_app" in effect:
            spec = effect["register_app"]
            state.apps[spec["package"]] = AppRecord(
                activities=list(spec.get("activities", [])), state="stopped")


def _fire_rule(rule: Rule, state: DeviceState, event: dict) -> None:
    effects = rule.effects
    if rule.token_gate is not None:
        token = str(event.get("args", {}).get("extras", {})
                    .get(rule.token_gate.extra, ""))
        effects = rule.effects if rule.token_gate.accepts(token) \
            else rule.else_effects
    _apply_effects(state, effects)


# -- intrinsic tool handlers -------------------------------------------

def _fs_read(state: DeviceState, path: str) -> bytes:
    if path not in state.fs:
        raise SimOperationError(f"no such device file: {path}")
    return state.fs[path]


def _is_dir(state: DeviceState, path: str) -> bool:
    prefix = path.rstrip("/") + "/"
    return any(p.startswith(prefix) for p in state.fs)


def _handle_read_only(state: DeviceState, tool: str, args: dict) -> dict:
    """Read-only tools compute payloads without touching the state."""
    if tool == "launch_application":
        pkg = args["package"]
        if pkg not in state.apps:
            raise SimOperationError(f"package {pkg} is not installed")
        activity = args.get("activity") or ""
        if activity and activity not in state.apps[pkg].activities:
            raise SimOperationError(f"{pkg} has no activity {activity}")
        return {"launched": True, "package": pkg, "activity": activity}

    if tool == "pull_device_file":
        blob = _fs_read(state, args["device_path"])
        return {"device_path": args["device_path"], "size": len(blob),
                "content_b64": base64.b64encode(blob).decode()}

    if tool == "check_file_existence":
        path = args["device_path"]
        kind = "file" if path in state.fs else (
            "dir" if _is_dir(state, path) else "missing")
        return {"device_path": path, "exists": kind != "missing", "kind": kind}

    if tool == "analyze_file_content":
        text = _fs_read(state, args["device_path"]).decode("utf-8", errors="replace")
        try:
            rx = re.compile(args["pattern"])
        except re.error as exc:
            raise SimOperationError(f"bad pattern: {exc}") from exc
        matches = [{"line": i, "text": line}
                   for i, line in enumerate(text.splitlines(), 1)
                   if rx.search(line)]
        return {"device_path": args["device_path"], "matches": matches}

    if tool == "list_directory_contents":
        path = args["device_path"].rstrip("/")
        prefix = path + "/" if path else ""
        if path and path not in state.fs and not _is_dir(state, path):
            raise SimOperationError(f"no such device directory: {path}")
        seen: dict[str, dict] = {}
        for p, blob in sorted(state.fs.items()):
            if not p.startswith(prefix):
                continue
            head = p[len(prefix):].split("/")[0]
            is_file = p == prefix + head
            seen.setdefault(head, {"name": head,
                                   "kind": "file" if is_file else "dir",
                                   "size": len(blob) if is_file else 0})
        return {"device_path": path, "entries": list(seen.values())}

    if tool == "verify_element_exists":
        node, strategy = _resolve_element(state.ui, args["target"])
        return {"exists": node is not None, "strategy": strategy}

    if tool == "find_ui_elements":
        hits = []
        for n in state.ui.walk():
            if args["text"] and args["text"] in n.text:
                d = n.to_dict()
                d.pop("children", None)
                hits.append(d)
        return {"elements": hits}

    if tool == "capture_ui_layout":
        return {"xml": state.ui.to_xml()}

    if tool == "search_system_logs":
        try:
            rx = re.compile(args["pattern"])
        except re.error as exc:
            raise SimOperationError(f"bad pattern: {exc}") from exc
        tag = args.get("tag")
        lines = [f"{t}/{lvl}: {msg}" for t, lvl, msg in state.logcat
                 if (tag is None or t == tag) and rx.search(msg)]
        return {"lines": lines}

    raise SimOperationError(f"{tool} is not a read-only device tool")


def _shell(state: DeviceState, command: str) -> dict:
    """Tiny shell: ls, cat, getprop, pm list packages, dumpsys, am start, rm."""
    argv = command.split()
    if not argv:
        return {"stdout": "", "exit_code": 0}
    op = argv[0]
    if op == "ls":
        path = argv[1] if len(argv) > 1 else "/"
        prefix = path.rstrip("/") + "/" if path != "/" else ""
        names = sorted({p[len(prefix):].split("/")[0]
                        for p in state.fs if p.startswith(prefix)})
        if path in state.fs:
            names = [path.split("/")[-1]]
        elif not names and path != "/":
            return {"stdout": f"ls: {path}: No such file or directory",
                    "exit_code": 1}
        return {"stdout": "\n".join(names), "exit_code": 0}
    if op == "cat":
        if len(argv) < 2 or argv[1] not in state.fs:
            return {"stdout": f"cat: {argv[1] if len(argv) > 1 else ''}: "
                              "No such file or directory", "exit_code": 1}
        return {"stdout": state.fs[argv[1]].decode("utf-8", errors="replace"),
                "exit_code": 0}
    if op == "getprop":
        if len(argv) > 1:
            return {"stdout": SDK_PROPS.get(argv[1], ""), "exit_code": 0}
        return {"stdout": "\n".join(f"[{k}]: [{v}]" for k, v in SDK_PROPS.items()),
                "exit_code": 0}
    if op == "pm" and argv[1:2] == ["list"]:
        return {"stdout": "\n".join(f"package:{p}" for p in sorted(state.apps)),
                "exit_code": 0}
    if op == "dumpsys":
        fg = [p for p, rec in state.apps.items() if rec.state == "foreground"]
        return {"stdout": "ACTIVITY MANAGER\n  foreground: "
                          + (", ".join(sorted(fg)) or "none"), "exit_code": 0}
    if op == "am" and argv[1:2] == ["start"]:
        component = argv[argv.index("-n") + 1] if "-n" in argv else ""
        extras = {}
        i = 0
        while i < len(argv):
            if argv[i] == "--es" and i + 2 < len(argv):
                extras[argv[i + 1]] = argv[i + 2]
                i += 3
            else:
                i += 1
        intent = {"component": component, "extras": extras, "via": "shell"}
        state.intents_log.append(intent)
        return {"stdout": f"Starting: Intent {{ cmp={component} }}",
                "exit_code": 0, "_intent": intent}
    if op == "rm":
        if len(argv) < 2 or argv[1] not in state.fs:
            return {"stdout": f"rm: {argv[1] if len(argv) > 1 else ''}: "
                              "No such file or directory", "exit_code": 1}
        del state.fs[argv[1]]
        return {"stdout": "", "exit_code": 0}
    return {"stdout": f"{op}: inaccessible or not found", "exit_code": 127}


def _handle_mutating(new: DeviceState, tool: str, args: dict) -> dict:
    """Mutating tools operate on an already-cloned state. Every one of
    them leaves an observable trace so the state digest always moves."""
    if tool == "press_hardware_key":
        new.append_log("key", "I", f"hardware key {args['key']} pressed")
        return {"pressed": args["key"]}

    if tool == "restart_application":
        pkg = args["package"]
        if pkg not in new.apps:
            raise SimOperationError(f"package {pkg} is not installed")
        new.apps[pkg].state = "foreground"
        new.append_log("am", "I", f"restarted {pkg}")
        return {"restarted": True, "package": pkg}

    if tool == "execute_shell_command":
        return _shell(new, args["command"])

    if tool == "upload_file_to_device":
        blob = base64.b64decode(args.get("content_b64", ""))
        new.fs[args["device_path"]] = blob
        new.append_log("fs", "I", f"wrote {args['device_path']}")
        return {"uploaded": True, "device_path": args["device_path"],
                "size": len(blob)}

    if tool == "click_ui_element":
        node, strategy = _resolve_element(new.ui, args["target"])
        if node is None:
            raise SimOperationError(f"no UI element matching {args['target']!r}")
        new.append_log("ui", "I", f"click on {node.id or node.text}")
        return {"clicked": True, "strategy": strategy,
                "node_id": node.id, "node_text": node.text}

    if tool == "input_text_field":
        node, strategy = _resolve_element(new.ui, args["target"])
        if node is None:
            raise SimOperationError(f"no UI element matching {args['target']!r}")
        node.text = args["text"]
        new.append_log("ui", "I", f"input into {node.id or strategy}")
        return {"ok": True, "node_id": node.id, "strategy": strategy}

    if tool == "clear_text_field":
        node, strategy = _resolve_element(new.ui, args["target"])
        if node is None:
            raise SimOperationError(f"no UI element matching {args['target']!r}")
        node.text = ""
        new.append_log("ui", "I", f"cleared {node.id or strategy}")
        return {"ok": True, "node_id": node.id, "strategy": strategy}

    if tool == "install_apk":
        try:
            descriptor = json.loads(args.get("descriptor_json", "") or "{}")
            pkg = descriptor["package"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise SimOperationError(
                "install_apk expects a package descriptor with a package name"
            ) from exc
        new.apps[pkg] = AppRecord(
            activities=list(descriptor.get("activities", [])), state="stopped")
        new.append_log("pm", "I", f"installed {pkg}")
        return {"installed": True, "package": pkg}

    raise SimOperationError(f"{tool} is not a device tool")


def step(state: DeviceState, tool: str, args: dict,
         behaviors: tuple[Rule, ...] = ()) -> tuple[DeviceState, dict]:
    """Pure device transition. Read-only tools return the input state
    unchanged unless a scenario rule reacts to the event (app behavior,
    attributed to the simulated application rather than the tool)."""
    if tool not in DEVICE_TOOLS:
        raise SimOperationError(f"{tool} is not a device tool")

    read_only = tool in READ_ONLY_DEVICE_TOOLS
    if read_only:
        payload = _handle_read_only(state, tool, args)
        current = state
    else:
        current = state.clone()
        payload = _handle_mutating(current, tool, args)

    events = [{"kind": "tool_call", "tool": tool, "args": args}]
    intent = payload.pop("_intent", None)
    if intent is not None:
        events.append({"kind": "intent", "intent": intent,
                       "args": {"extras": intent.get("extras", {})}})

    rule_fired = False
    for event in events:
        for rule in behaviors:
            if _rule_matches(rule, event):
                if current is state:
                    current = state.clone()
                _fire_rule(rule, current, event)
                rule_fired = True
                break  # at most one rule per trigger event

    if rule_fired:
        payload = dict(payload, rule_fired=True)
    return current, payload


class SimDevice(DeviceBackend):
    """DeviceBackend over a Scenario; one instance per validation session."""

    kind = "sim"

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.state = scenario.fresh_state()

    def reset(self) -> None:
        self.state = self.scenario.fresh_state()

    def execute(self, tool: str, args: dict, read_only: bool) -> dict:
        new_state, payload = step(self.state, tool, args, self.scenario.behaviors)
        self.state = new_state
        return payload

    def state_digest(self) -> str:
        return self.state.digest()


def empty_scenario(name: str = "empty") -> Scenario:
    return Scenario(name=name, initial_state=DeviceState())
