from .catalog import (TOOLKIT, VALIDATOR_SHELL_ALLOWLIST, Param, Role, Surface,
                      ToolCategory, ToolFunction)
from .registry import DeviceBackend, ToolCall, ToolRegistry, ToolResult, role_grants

__all__ = [
    "TOOLKIT", "VALIDATOR_SHELL_ALLOWLIST", "Param", "Role", "Surface",
    "ToolCategory", "ToolFunction", "DeviceBackend", "ToolCall", "ToolRegistry",
    "ToolResult", "role_grants",
]
