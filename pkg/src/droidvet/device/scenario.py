"""Scenario files: a device seed plus declarative behavior rules.

A scenario is JSON with sections {fs, logcat_seed, ui, apps, behaviors}
and an optional workspace_sources map carrying the app's decompiled
sources for validation-only runs. Behavior rules model the app's own
reactions: they fire when a tool call or delivered intent matches a
trigger, in declaration order, at most one rule per event.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SchemaError
from .state import AppRecord, DeviceState, UiNode

_EFFECT_KEYS = {"set_ui", "log", "write_file", "delete_file", "set_app_state",
                "register_app"}
_TRIGGER_KEYS = {"tool", "intent"}


@dataclass(frozen=True)
class TokenGate:
    """Validity check for a crypto token argument: base64(AES-128-ECB-PKCS7).

    The cipher parameters live in the scenario file so the choice is
    explicit and replayable.
    """
    extra: str
    key: str
    plaintext: str
    cipher: str = "aes-128-ecb-pkcs7"
    encoding: str = "base64"

    def accepts(self, token: str) -> bool:
        from cryptography.hazmat.primitives import padding
        from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
        try:
            blob = base64.b64decode(token, validate=True)
            dec = Cipher(algorithms.AES(self.key.encode("utf-8")),
                         modes.ECB()).decryptor()
            padded = dec.update(blob) + dec.finalize()
            unpadder = padding.PKCS7(128).unpadder()
            plain = unpadder.update(padded) + unpadder.finalize()
            return plain == self.plaintext.encode("utf-8")
        except Exception:
            return False


@dataclass(frozen=True)
class Rule:
    trigger_kind: str            # tool | intent
    match: dict                  # tool name/arg matchers or intent matchers
    effects: tuple[dict, ...]
    else_effects: tuple[dict, ...] = ()
    token_gate: TokenGate | None = None


@dataclass
class Scenario:
    name: str
    initial_state: DeviceState
    behaviors: tuple[Rule, ...] = ()
    workspace_sources: dict[str, str] = field(default_factory=dict)
    notes: str = ""
    seed_digest: str = ""
    source_path: str = ""

    def fresh_state(self) -> DeviceState:
        return self.initial_state.clone()


def _parse_rule(raw: dict, index: int) -> Rule:
    where = f"behaviors[{index}]"
    if not isinstance(raw, dict) or "on" not in raw:
        raise SchemaError("rule must be an object with an 'on' trigger", path=where)
    on = raw["on"]
    kinds = _TRIGGER_KEYS & set(on)
    if len(kinds) != 1:
        raise SchemaError(f"trigger must name exactly one of {sorted(_TRIGGER_KEYS)}",
                          path=f"{where}.on")
    kind = kinds.pop()
    for eff_key in ("effects", "else_effects"):
        for j, eff in enumerate(raw.get(eff_key, [])):
            if not isinstance(eff, dict) or not (set(eff) & _EFFECT_KEYS):
                raise SchemaError(f"unknown effect {eff!r}",
                                  path=f"{where}.{eff_key}[{j}]")
    gate = None
    if "token_gate" in on:
        g = on["token_gate"]
        try:
            gate = TokenGate(extra=g["extra"], key=g["key"],
                             plaintext=g["plaintext"],
                             cipher=g.get("cipher", "aes-128-ecb-pkcs7"),
                             encoding=g.get("encoding", "base64"))
        except KeyError as exc:
            raise SchemaError(f"token_gate missing {exc}",
                              path=f"{where}.on.token_gate") from exc
        if gate.cipher != "aes-128-ecb-pkcs7" or gate.encoding != "base64":
            raise SchemaError("unsupported token_gate cipher/encoding",
                              path=f"{where}.on.token_gate")
    return Rule(trigger_kind=kind, match=on,
                effects=tuple(raw.get("effects", [])),
                else_effects=tuple(raw.get("else_effects", [])),
                token_gate=gate)


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario document must be a JSON object")
    device = doc.get("device", {})
    if not isinstance(device, dict):
        raise SchemaError("device section must be an object", path="device")

    fs = {}
    for path, entry in device.get("fs", {}).items():
        if isinstance(entry, str):
            fs[path] = entry.encode("utf-8")
        elif isinstance(entry, dict) and "text" in entry:
            fs[path] = entry["text"].encode("utf-8")
        elif isinstance(entry, dict) and "base64" in entry:
            fs[path] = base64.b64decode(entry["base64"])
        else:
            raise SchemaError("fs entries must be text or base64",
                              path=f"device.fs.{path}")

    logcat = []
    for i, line in enumerate(device.get("logcat_seed", [])):
        try:
            logcat.append((line["tag"], line.get("level", "I"), line["message"]))
        except (TypeError, KeyError) as exc:
            raise SchemaError(f"bad logcat seed entry: {exc}",
                              path=f"device.logcat_seed[{i}]") from exc

    apps = {}
    for pkg, rec in device.get("apps", {}).items():
        if not isinstance(rec, dict):
            raise SchemaError("app records must be objects", path=f"device.apps.{pkg}")
        apps[pkg] = AppRecord.from_dict(rec)

    state = DeviceState(
        fs=fs, logcat=logcat,
        ui=UiNode.from_dict(device.get("ui", {})),
        apps=apps,
        intents_log=list(device.get("intents_log", [])),
    )
    behaviors = tuple(_parse_rule(raw, i)
                      for i, raw in enumerate(doc.get("behaviors", [])))
    sources = doc.get("workspace_sources", {})
    if not isinstance(sources, dict) or \
            not all(isinstance(v, str) for v in sources.values()):
        raise SchemaError("workspace_sources must map paths to text",
                          path="workspace_sources")
    scenario = Scenario(
        name=doc.get("name", name),
        initial_state=state,
        behaviors=behaviors,
        workspace_sources=dict(sources),
        notes=doc.get("notes", ""),
    )
    scenario.seed_digest = state.digest()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario is not valid JSON: {exc.msg}",
                          path=str(path), line=exc.lineno, column=exc.colno) from exc
    scenario = scenario_from_dict(doc, name=path.stem)
    scenario.source_path = str(path)
    return scenario
