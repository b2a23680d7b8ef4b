"""Shipped fixture bundles: golden scenario, FP scenario, metric tables.

Each bundle is a directory of scenario/backend/findings files usable
both from tests and from the CLI (e.g. --device sim:<scenario> with
--planner scripted:<file>).
"""

from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path


def fixture_path(*parts: str) -> Path:
    return Path(str(files(__package__).joinpath(*parts)))


def golden_path(name: str) -> Path:
    return fixture_path("golden", name)


def deadcode_path(name: str) -> Path:
    return fixture_path("deadcode", name)


def adversarial_path(name: str) -> Path:
    return fixture_path("adversarial", name)


def load_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def golden_expected() -> dict:
    return load_json(golden_path("expected.json"))
