from .scenario import Rule, Scenario, TokenGate, load_scenario, scenario_from_dict
from .sim import SimDevice, SimOperationError, empty_scenario, step
from .state import AppRecord, DeviceState, UiNode

__all__ = [
    "Rule", "Scenario", "TokenGate", "load_scenario", "scenario_from_dict",
    "SimDevice", "SimOperationError", "empty_scenario", "step",
    "AppRecord", "DeviceState", "UiNode",
]
