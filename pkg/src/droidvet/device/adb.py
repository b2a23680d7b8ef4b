"""Live-device backend over adb. Minimal mappings; replay is unsupported.

Construction probes the device and raises DeviceUnavailable when no
device answers, which the validation loop surfaces as TechnicalError
outcomes.
"""

from __future__ import annotations

import base64
import shlex
import subprocess

from ..errors import DeviceUnavailable, DroidvetError
from ..tools.registry import DeviceBackend

ADB_CALL_TIMEOUT_S = 60


class AdbError(DroidvetError):
    pass


class AdbBackend(DeviceBackend):
    kind = "adb"

    def __init__(self, adb_path: str = "adb", serial: str | None = None):
        self.adb_path = adb_path
        self.serial = serial
        state = self._try(["get-state"])
        if state.strip() != "device":
            raise DeviceUnavailable(
                f"adb reports state {state.strip()!r}; no usable device")

    def _argv(self, args: list[str]) -> list[str]:
        base = [self.adb_path]
        if self.serial:
            base += ["-s", self.serial]
        return base + args

    def _try(self, args: list[str]) -> str:
        try:
            proc = subprocess.run(self._argv(args), capture_output=True,
                                  text=True, timeout=ADB_CALL_TIMEOUT_S)
        except FileNotFoundError as exc:
            raise DeviceUnavailable(f"adb binary not found: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise DeviceUnavailable(f"adb timed out: {exc}") from exc
        if proc.returncode != 0:
            raise DeviceUnavailable(proc.stderr.strip() or
                                    f"adb exited {proc.returncode}")
        return proc.stdout

    def _shell(self, command: str) -> dict:
        out = self._try(["shell", command])
        return {"stdout": out, "exit_code": 0}

    def execute(self, tool: str, args: dict, read_only: bool) -> dict:
        if tool == "execute_shell_command":
            return self._shell(args["command"])
        if tool == "check_file_existence":
            path = shlex.quote(args["device_path"])
            out = self._try(["shell", f"test -e {path} && echo yes || echo no"])
            exists = out.strip() == "yes"
            return {"device_path": args["device_path"], "exists": exists,
                    "kind": "file" if exists else "missing"}
        if tool == "pull_device_file":
            path = shlex.quote(args["device_path"])
            blob = self._try(["shell", f"cat {path}"]).encode()
            return {"device_path": args["device_path"], "size": len(blob),
                    "content_b64": base64.b64encode(blob).decode()}
        if tool == "analyze_file_content":
            path = shlex.quote(args["device_path"])
            pattern = shlex.quote(args["pattern"])
            out = self._shell(f"grep -nE {pattern} {path}")
            matches = []
            for line in out["stdout"].splitlines():
                number, _, text = line.partition(":")
                if number.isdigit():
                    matches.append({"line": int(number), "text": text})
            return {"device_path": args["device_path"], "matches": matches}
        if tool == "list_directory_contents":
            out = self._shell(f"ls -la {shlex.quote(args['device_path'])}")
            entries = [{"name": l.split()[-1], "kind": "file", "size": 0}
                       for l in out["stdout"].splitlines()[1:] if l.split()]
            return {"device_path": args["device_path"], "entries": entries}
        if tool == "launch_application":
            component = args["package"]
            if args.get("activity"):
                component += "/" + args["activity"]
            extras = "".join(f" --es {shlex.quote(k)} {shlex.quote(str(v))}"
                             for k, v in (args.get("extras") or {}).items())
            self._shell(f"am start -n {shlex.quote(component)}{extras}")
            return {"launched": True, "package": args["package"],
                    "activity": args.get("activity") or ""}
        if tool == "search_system_logs":
            out = self._try(["logcat", "-d"])
            import re
            rx = re.compile(args["pattern"])
            return {"lines": [l for l in out.splitlines() if rx.search(l)]}
        if tool == "capture_ui_layout":
            out = self._shell("uiautomator dump /dev/tty")
            return {"xml": out["stdout"]}
        if tool == "press_hardware_key":
            self._shell(f"input keyevent {shlex.quote(args['key'])}")
            return {"pressed": args["key"]}
        if tool == "install_apk":
            raise AdbError("install on live devices requires a real APK path; "
                           "configure the build toolchain first")
        raise AdbError(f"{tool} is not implemented for the adb backend")

    def state_digest(self) -> str:
        # live devices are not snapshot-able; transcripts on adb cannot replay
        return "adb-live"
