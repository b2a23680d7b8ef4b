"""Shared builders for validation-loop and acceptance tests.

The golden hardcoded-key bundle is loaded from the shipped package
fixtures so tests exercise exactly what the CLI ships.
"""

from __future__ import annotations

import json

from droidvet import fixtures
from droidvet.device import Scenario, SimDevice, load_scenario, scenario_from_dict
from droidvet.gateway import Gateway, ModelConfig, ModelEndpoint, ScriptedProvider
from droidvet.schema import CodeLocation, GheraCategory, StandardizedVulnerability
from droidvet.tools import ToolRegistry
from droidvet.validation import AgentBackends, Session, SessionConfig
from droidvet.workspace import Workspace

GOLDEN_KEY = "0123456789!@#$%^"
GOLDEN_EMAIL = "anniemaes@gmail.com"
GOLDEN_TOKEN = fixtures.golden_expected()["forged_token"]


def crypto_finding() -> StandardizedVulnerability:
    return StandardizedVulnerability(
        title="Hardcoded AES key enables token forgery",
        category=GheraCategory.CRYPTO,
        description="The password-reset token key is stored in plain text in "
                    "res/values/strings.xml, so anyone can forge tokens.",
        locations=(CodeLocation("res/values/strings.xml", 2, 2),),
        origin=frozenset({"analyzer:g25p"}),
    )


def scripted_endpoint(turns, *, loop=False, agent="agent") -> ModelEndpoint:
    return ModelEndpoint(
        provider=ScriptedProvider(turns=turns, loop=loop),
        config=ModelConfig(provider="scripted", model="fixture"),
        agent_name=agent)


def backends_from(planner_turns, executor_turns, validator_turns,
                  loop=False) -> AgentBackends:
    return AgentBackends(
        planner=scripted_endpoint(planner_turns, loop=loop, agent="planner"),
        executor=scripted_endpoint(executor_turns, loop=loop, agent="executor"),
        validator=scripted_endpoint(validator_turns, loop=loop, agent="validator"))


def text_turn(doc: dict) -> dict:
    return {"text": json.dumps(doc, ensure_ascii=False)}


def calls_turn(*calls: tuple[str, dict]) -> dict:
    return {"tool_calls": [{"tool": t, "args": a} for t, a in calls]}


def gate_scenario() -> Scenario:
    """Hardcoded-key app: strings.xml on device, token gate on launch."""
    return load_scenario(fixtures.golden_path("scenario.json"))


def golden_turns() -> dict[str, list[dict]]:
    """Scripted conversations for the three-task hardcoded-key session."""
    return {role: fixtures.load_json(fixtures.golden_path(f"{role}.json"))["turns"]
            for role in ("planner", "executor", "validator")}


def make_session_parts(tmp_path, scenario=None):
    scenario = scenario or gate_scenario()
    device = SimDevice(scenario)
    ws = Workspace(tmp_path / "ws", session_id="test-session")
    if scenario.workspace_sources:
        ws.seed_sources(scenario.workspace_sources)
    return ToolRegistry(), device, ws
