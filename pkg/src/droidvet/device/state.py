"""Deterministic in-memory device state: files, logs, UI tree, apps, intents."""

from __future__ import annotations

import base64
import copy
import hashlib
import json
from dataclasses import dataclass, field

LOGCAT_CAP = 100_000


@dataclass
class UiNode:
    id: str = ""
    text: str = ""
    bounds: tuple[int, int, int, int] = (0, 0, 0, 0)
    clickable: bool = False
    children: list["UiNode"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "bounds": list(self.bounds),
                "clickable": self.clickable,
                "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d: dict) -> "UiNode":
        return cls(id=d.get("id", ""), text=d.get("text", ""),
                   bounds=tuple(d.get("bounds", (0, 0, 0, 0))),
                   clickable=bool(d.get("clickable", False)),
                   children=[cls.from_dict(c) for c in d.get("children", [])])

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def to_xml(self, depth: int = 0) -> str:
        pad = "  " * depth
        attrs = f'id="{self.id}" text="{self.text}" bounds="{list(self.bounds)}" ' \
                f'clickable="{str(self.clickable).lower()}"'
        if not self.children:
            return f"{pad}<node {attrs}/>"
        inner = "\n".join(c.to_xml(depth + 1) for c in self.children)
        return f"{pad}<node {attrs}>\n{inner}\n{pad}</node>"


@dataclass
class AppRecord:
    activities: list[str] = field(default_factory=list)
    state: str = "stopped"  # stopped | foreground | background

    def to_dict(self) -> dict:
        return {"activities": list(self.activities), "state": self.state}

    @classmethod
    def from_dict(cls, d: dict) -> "AppRecord":
        return cls(activities=list(d.get("activities", [])),
                   state=d.get("state", "stopped"))


@dataclass
class DeviceState:
    fs: dict[str, bytes] = field(default_factory=dict)
    logcat: list[tuple[str, str, str]] = field(default_factory=list)
    ui: UiNode = field(default_factory=UiNode)
    apps: dict[str, AppRecord] = field(default_factory=dict)
    intents_log: list[dict] = field(default_factory=list)

    def clone(self) -> "DeviceState":
        return DeviceState(
            fs=dict(self.fs),
            logcat=list(self.logcat),
            ui=copy.deepcopy(self.ui),
            apps={k: AppRecord(list(v.activities), v.state)
                  for k, v in self.apps.items()},
            intents_log=[dict(i) for i in self.intents_log],
        )

    def append_log(self, tag: str, level: str, message: str) -> None:
        self.logcat.append((tag, level, message))
        if len(self.logcat) > LOGCAT_CAP:
            del self.logcat[:len(self.logcat) - LOGCAT_CAP]

    def to_dict(self) -> dict:
        return {
            "fs": {path: base64.b64encode(blob).decode()
                   for path, blob in sorted(self.fs.items())},
            "logcat": [list(entry) for entry in self.logcat],
            "ui": self.ui.to_dict(),
            "apps": {pkg: rec.to_dict() for pkg, rec in sorted(self.apps.items())},
            "intents_log": self.intents_log,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceState":
        return cls(
            fs={path: base64.b64decode(blob)
                for path, blob in d.get("fs", {}).items()},
            logcat=[tuple(entry) for entry in d.get("logcat", [])],
            ui=UiNode.from_dict(d.get("ui", {})),
            apps={pkg: AppRecord.from_dict(rec)
                  for pkg, rec in d.get("apps", {}).items()},
            intents_log=list(d.get("intents_log", [])),
        )

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
