"""The 29-function validation toolkit and its per-role grants.

Names containing ecosystem-specific words are generalized; the original
names remain as aliases so prompts can render either form. read_only
means the call cannot alter device runtime state (it may still write to
the local analysis workspace).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Role(enum.Enum):
    PLANNER = "Planner"
    EXECUTOR = "Executor"
    VALIDATOR = "Validator"


class ToolCategory(enum.Enum):
    EXECUTE = "Execute"
    CONTROL = "Control"
    FILE = "File"
    CODE = "Code"
    UI = "UI"
    LOG = "Log"
    APK = "APK"
    WEB = "Web"


class Surface(enum.Enum):
    DEVICE = "device"
    WORKSPACE = "workspace"


@dataclass(frozen=True)
class Param:
    name: str
    type: str           # string | int | bool | map
    required: bool = True


@dataclass(frozen=True)
class ToolFunction:
    name: str
    category: ToolCategory
    description: str
    read_only: bool
    allowed_roles: frozenset[Role]
    params: tuple[Param, ...]
    result: str
    surface: Surface
    alias: str | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "alias": self.alias,
            "category": self.category.value,
            "description": self.description,
            "read_only": self.read_only,
            "allowed_roles": sorted(r.value for r in self.allowed_roles),
            "surface": self.surface.value,
            "params": [{"name": p.name, "type": p.type, "required": p.required}
                       for p in self.params],
            "result": self.result,
        }


_P = Role.PLANNER
_E = Role.EXECUTOR
_V = Role.VALIDATOR


def _tool(name, category, description, read_only, roles, params, result,
          surface, alias=None) -> ToolFunction:
    return ToolFunction(name=name, category=category, description=description,
                        read_only=read_only, allowed_roles=frozenset(roles),
                        params=tuple(params), result=result, surface=surface,
                        alias=alias)


TOOLKIT: tuple[ToolFunction, ...] = (
    # Execute
    _tool("execute_script", ToolCategory.EXECUTE,
          "Execute a script in the analysis workspace sandbox",
          True, {_E, _V},
          [Param("code", "string"), Param("timeout_s", "int", False)],
          "script_output", Surface.WORKSPACE, alias="execute_python_script"),
    _tool("install_script_package", ToolCategory.EXECUTE,
          "Install a script dependency into the workspace sandbox",
          True, {_E, _V},
          [Param("package", "string")],
          "install_report", Surface.WORKSPACE, alias="install_python_package"),
    # Control
    _tool("press_hardware_key", ToolCategory.CONTROL,
          "Press a system key (back, home, ...)",
          False, {_E},
          [Param("key", "string")],
          "key_event", Surface.DEVICE),
    _tool("launch_application", ToolCategory.CONTROL,
          "Start an application, optionally at a specific activity",
          True, {_P, _E},
          [Param("package", "string"), Param("activity", "string", False),
           Param("extras", "map", False)],
          "launch_report", Surface.DEVICE),
    _tool("restart_application", ToolCategory.CONTROL,
          "Stop and restart an application at an activity",
          False, {_E},
          [Param("package", "string"), Param("activity", "string", False)],
          "launch_report", Surface.DEVICE),
    _tool("execute_shell_command", ToolCategory.CONTROL,
          "Run a device shell command",
          False, {_E, _V},
          [Param("command", "string")],
          "shell_output", Surface.DEVICE),
    # File
    _tool("pull_device_file", ToolCategory.FILE,
          "Copy a file from the device into the workspace",
          True, {_P, _E, _V},
          [Param("device_path", "string"), Param("local_path", "string", False)],
          "pulled_file", Surface.DEVICE),
    _tool("upload_file_to_device", ToolCategory.FILE,
          "Copy a workspace file onto the device",
          False, {_E},
          [Param("local_path", "string"), Param("device_path", "string")],
          "upload_report", Surface.DEVICE),
    _tool("check_file_existence", ToolCategory.FILE,
          "Check whether a device path exists",
          True, {_P, _E, _V},
          [Param("device_path", "string")],
          "existence", Surface.DEVICE),
    _tool("analyze_file_content", ToolCategory.FILE,
          "Search a device file's content with a regex",
          True, {_P, _E, _V},
          [Param("device_path", "string"), Param("pattern", "string")],
          "matches", Surface.DEVICE),
    _tool("create_local_file", ToolCategory.FILE,
          "Create a file in the analysis workspace",
          True, {_E, _V},
          [Param("path", "string"), Param("content", "string")],
          "local_file", Surface.WORKSPACE),
    _tool("read_local_file", ToolCategory.FILE,
          "Read a file from the analysis workspace",
          True, {_P, _E, _V},
          [Param("path", "string")],
          "file_content", Surface.WORKSPACE),
    _tool("list_directory_contents", ToolCategory.FILE,
          "List a device directory with metadata",
          True, {_P, _E, _V},
          [Param("device_path", "string")],
          "dir_listing", Surface.DEVICE),
    # Code
    _tool("extract_source_code", ToolCategory.CODE,
          "Fetch a decompiled source file by name",
          True, {_P, _E, _V},
          [Param("file_name", "string")],
          "file_content", Surface.WORKSPACE),
    _tool("search_code_patterns", ToolCategory.CODE,
          "Search the decompiled sources for a pattern",
          True, {_P, _E, _V},
          [Param("pattern", "string"), Param("file_glob", "string", False)],
          "matches", Surface.WORKSPACE),
    _tool("enumerate_source_files", ToolCategory.CODE,
          "List application source files, libraries filtered out",
          True, {_P, _E, _V},
          [Param("limit", "int", False)],
          "file_listing", Surface.WORKSPACE),
    # UI
    _tool("click_ui_element", ToolCategory.UI,
          "Click a UI element (id, exact text, then bounds-center)",
          False, {_E},
          [Param("target", "string")],
          "click_report", Surface.DEVICE),
    _tool("input_text_field", ToolCategory.UI,
          "Type text into a UI text field",
          False, {_E},
          [Param("target", "string"), Param("text", "string")],
          "input_report", Surface.DEVICE),
    _tool("clear_text_field", ToolCategory.UI,
          "Clear a UI text field",
          False, {_E},
          [Param("target", "string")],
          "input_report", Surface.DEVICE),
    _tool("verify_element_exists", ToolCategory.UI,
          "Check whether a UI element is on the current screen",
          True, {_E, _V},
          [Param("target", "string")],
          "existence", Surface.DEVICE),
    _tool("find_ui_elements", ToolCategory.UI,
          "Find UI elements containing the given text",
          True, {_E, _V},
          [Param("text", "string")],
          "elements", Surface.DEVICE),
    _tool("capture_ui_layout", ToolCategory.UI,
          "Capture the XML hierarchy of the current screen",
          True, {_E, _V},
          [],
          "ui_layout", Surface.DEVICE),
    # Log
    _tool("search_system_logs", ToolCategory.LOG,
          "Search the device log stream with a regex",
          True, {_E, _V},
          [Param("pattern", "string"), Param("tag", "string", False)],
          "log_lines", Surface.DEVICE),
    # APK
    _tool("initialize_build_project", ToolCategory.APK,
          "Initialize an app project from the benign template",
          False, {_E},
          [Param("project_name", "string")],
          "project_dir", Surface.WORKSPACE, alias="initialize_gradle"),
    _tool("build_android_package", ToolCategory.APK,
          "Compile a project into an installable package",
          False, {_E},
          [Param("project_dir", "string")],
          "built_apk", Surface.WORKSPACE),
    _tool("install_apk", ToolCategory.APK,
          "Install a package onto the device",
          False, {_E},
          [Param("apk_path", "string")],
          "install_report", Surface.DEVICE),
    # Web
    _tool("initialize_web_server", ToolCategory.WEB,
          "Create a web server directory structure",
          False, {_E},
          [Param("name", "string")],
          "server_dir", Surface.WORKSPACE, alias="initialize_flask_server"),
    _tool("start_web_service", ToolCategory.WEB,
          "Start the development web server",
          False, {_E},
          [Param("server_dir", "string"), Param("port", "int", False)],
          "service_endpoint", Surface.WORKSPACE),
    _tool("stop_web_service", ToolCategory.WEB,
          "Terminate a running web server",
          False, {_E},
          [Param("name", "string")],
          "stop_report", Surface.WORKSPACE),
)

# Validator may run shell commands only from this non-mutating set,
# reconciling its shell grant with its read-only verification duty.
VALIDATOR_SHELL_ALLOWLIST = ("ls", "cat", "dumpsys", "getprop", "pm list")

# Evidence kind attached to successful calls, keyed by result kind.
from ..schema import EvidenceKind  # noqa: E402

RESULT_EVIDENCE_KINDS = {
    "script_output": EvidenceKind.SCRIPT_OUTPUT,
    "shell_output": EvidenceKind.SCRIPT_OUTPUT,
    "ui_layout": EvidenceKind.UI_LAYOUT,
    "elements": EvidenceKind.UI_LAYOUT,
    "existence": EvidenceKind.CLAIM_TEXT,
    "log_lines": EvidenceKind.LOG_EXCERPT,
    "matches": EvidenceKind.FILE_ARTIFACT,
    "file_content": EvidenceKind.FILE_ARTIFACT,
    "pulled_file": EvidenceKind.FILE_ARTIFACT,
}
