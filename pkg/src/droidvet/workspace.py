"""Per-session analysis workspace: local files, scripts, evidence artifacts.

Everything a tool writes on the host side lands under one session
directory. Evidence is content-addressed (sha256 digest filenames) and
verified on read. Script execution runs real subprocesses inside the
workspace; package installs and app/web builds are simulated by default
so test runs stay hermetic.
"""

from __future__ import annotations

import hashlib
import json
import re
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import ArgValidation, EvidenceIntegrityError, TimeoutExceeded
from .schema import EvidenceKind, EvidenceRef

SCRIPT_TIMEOUT_S = 120
MAX_SEARCH_MATCHES = 200


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class WebService:
    name: str
    url: str
    running: bool = True


class Workspace:
    """One validation session's host-side sandbox."""

    def __init__(self, root: str | Path, session_id: str = "session",
                 real_installs: bool = False):
        self.root = Path(root)
        self.session_id = session_id
        self.real_installs = real_installs
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "evidence").mkdir(exist_ok=True)
        self.sources_root: Path | None = None
        self._services: dict[str, WebService] = {}
        self._installed: list[str] = []
        self._next_port = 8080

    @classmethod
    def for_session(cls, workspace_root: str | Path, session_id: str,
                    **kwargs) -> "Workspace":
        return cls(Path(workspace_root) / "sessions" / session_id,
                   session_id=session_id, **kwargs)

    def attach_sources(self, sources_root: str | Path) -> None:
        self.sources_root = Path(sources_root)

    def seed_sources(self, files: dict[str, str]) -> None:
        """Write decompiled-source fixtures into the session's own tree."""
        root = self.root / "sources"
        for rel, text in files.items():
            p = root / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
        self.sources_root = root

    # -- evidence -----------------------------------------------------

    def store_evidence(self, kind: EvidenceKind, content: str | bytes) -> EvidenceRef:
        blob = content.encode("utf-8") if isinstance(content, str) else content
        digest = sha256_hex(blob)
        rel = f"evidence/{digest}"
        path = self.root / rel
        if not path.exists():
            path.write_bytes(blob)
        return EvidenceRef(kind=kind, uri=rel, digest=digest)

    def read_evidence(self, ref: EvidenceRef) -> bytes:
        blob = (self.root / ref.uri).read_bytes()
        if sha256_hex(blob) != ref.digest:
            raise EvidenceIntegrityError(
                f"evidence {ref.uri} does not match digest {ref.digest[:12]}...")
        return blob

    # -- path discipline ----------------------------------------------

    def _local(self, rel: str) -> Path:
        p = (self.root / rel).resolve()
        if not p.is_relative_to(self.root.resolve()):
            raise ArgValidation(f"path {rel!r} escapes the workspace")
        if p.is_relative_to((self.root / "evidence").resolve()):
            raise ArgValidation("the evidence store is not writable by tools")
        return p

    # -- tool handlers ------------------------------------------------

    def handle(self, tool: str, args: dict) -> dict:
        handler = getattr(self, f"_tool_{tool}", None)
        if handler is None:
            raise ArgValidation(f"{tool} is not a workspace tool")
        return handler(args)

    def _tool_execute_script(self, args: dict) -> dict:
        timeout = args.get("timeout_s") or SCRIPT_TIMEOUT_S
        try:
            proc = subprocess.run(
                [sys.executable, "-c", args["code"]],
                capture_output=True, text=True, timeout=timeout,
                cwd=self.root)
        except subprocess.TimeoutExpired as exc:
            raise TimeoutExceeded(f"script exceeded {timeout}s") from exc
        return {"stdout": proc.stdout, "stderr": proc.stderr,
                "exit_code": proc.returncode}

    def _tool_install_script_package(self, args: dict) -> dict:
        package = args["package"]
        if not re.fullmatch(r"[A-Za-z0-9_.=<>~\-\[\]]+", package):
            raise ArgValidation(f"suspicious package spec {package!r}")
        if self.real_installs:
            proc = subprocess.run(
                [sys.executable, "-m", "pip", "install", "--quiet", package],
                capture_output=True, text=True, timeout=300)
            ok = proc.returncode == 0
        else:
            ok = True
        if ok:
            self._installed.append(package)
        return {"installed": ok, "package": package,
                "simulated": not self.real_installs}

    def _tool_create_local_file(self, args: dict) -> dict:
        path = self._local(args["path"])
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = args["content"].encode("utf-8")
        path.write_bytes(blob)
        return {"path": args["path"], "bytes_written": len(blob)}

    def _tool_read_local_file(self, args: dict) -> dict:
        path = self._local(args["path"])
        if not path.is_file():
            raise ArgValidation(f"no local file {args['path']!r}")
        return {"path": args["path"],
                "content": path.read_text(encoding="utf-8", errors="replace")}

    def _sources(self) -> Path:
        if self.sources_root is None or not self.sources_root.is_dir():
            raise ArgValidation("no decompiled sources attached to this session")
        return self.sources_root

    def _tool_extract_source_code(self, args: dict) -> dict:
        root = self._sources()
        name = args["file_name"]
        candidate = root / name
        if not candidate.is_file():
            hits = [p for p in root.rglob(Path(name).name) if p.is_file()]
            if not hits:
                raise ArgValidation(f"no source file matching {name!r}")
            candidate = hits[0]
        rel = candidate.relative_to(root).as_posix()
        return {"path": rel,
                "content": candidate.read_text(encoding="utf-8", errors="replace")}

    def _tool_search_code_patterns(self, args: dict) -> dict:
        root = self._sources()
        try:
            rx = re.compile(args["pattern"])
        except re.error as exc:
            raise ArgValidation(f"bad pattern: {exc}") from exc
        glob = args.get("file_glob") or "*"
        matches = []
        for p in sorted(root.rglob(glob)):
            if not p.is_file():
                continue
            rel = p.relative_to(root).as_posix()
            for lineno, line in enumerate(
                    p.read_text(encoding="utf-8", errors="replace").splitlines(), 1):
                if rx.search(line):
                    matches.append({"file": rel, "line": lineno,
                                    "text": line.strip()})
                    if len(matches) >= MAX_SEARCH_MATCHES:
                        return {"matches": matches, "truncated": True}
        return {"matches": matches, "truncated": False}

    def _tool_enumerate_source_files(self, args: dict) -> dict:
        from .apk.sources import ExclusionRules, count_loc
        root = self._sources()
        rules = ExclusionRules.default()
        limit = args.get("limit") or 500
        files = []
        for p in sorted(root.rglob("*")):
            if p.is_file():
                rel = p.relative_to(root).as_posix()
                if rules.match(rel) is None:
                    files.append({"path": rel, "loc": count_loc(p)})
                    if len(files) >= limit:
                        break
        return {"files": files}

    def _tool_initialize_build_project(self, args: dict) -> dict:
        name = args["project_name"]
        project = self._local(f"projects/{name}")
        (project / "src").mkdir(parents=True, exist_ok=True)
        settings = project / "settings.json"
        if not settings.exists():
            settings.write_text(json.dumps(
                {"template": "benign-app", "name": name}, indent=2))
        rel = project.relative_to(self.root).as_posix()
        return {"project_dir": rel}

    def _tool_build_android_package(self, args: dict) -> dict:
        project = self._local(args["project_dir"])
        if not project.is_dir():
            raise ArgValidation(f"no project at {args['project_dir']!r}")
        descriptor = project / "descriptor.json"
        if descriptor.exists():
            payload = descriptor.read_bytes()
        else:
            name = json.loads((project / "settings.json").read_text())["name"] \
                if (project / "settings.json").exists() else project.name
            payload = json.dumps({"package": f"com.droidvet.{name}",
                                  "activities": ["MainActivity"]}).encode()
        out = project / "build" / "app.apk"
        out.parent.mkdir(exist_ok=True)
        out.write_bytes(payload)
        rel = out.relative_to(self.root).as_posix()
        return {"apk_path": rel}

    def _tool_initialize_web_server(self, args: dict) -> dict:
        name = args["name"]
        server = self._local(f"servers/{name}")
        server.mkdir(parents=True, exist_ok=True)
        app = server / "app.py"
        if not app.exists():
            app.write_text("# exploit-support endpoint, filled in per task\n")
        return {"server_dir": server.relative_to(self.root).as_posix()}

    def _tool_start_web_service(self, args: dict) -> dict:
        server = self._local(args["server_dir"])
        if not server.is_dir():
            raise ArgValidation(f"no server at {args['server_dir']!r}")
        name = server.name
        port = args.get("port") or self._next_port
        self._next_port = max(self._next_port, port) + 1
        service = WebService(name=name, url=f"http://127.0.0.1:{port}")
        self._services[name] = service
        return {"url": service.url, "name": name, "simulated": True}

    def _tool_stop_web_service(self, args: dict) -> dict:
        name = args["name"]
        service = self._services.pop(name, None)
        if service is None:
            raise ArgValidation(f"no running service named {name!r}")
        service.running = False
        return {"stopped": True, "name": name}

    def local_path(self, rel: str) -> Path:
        return self._local(rel)

    def write_local(self, rel: str, content: bytes) -> Path:
        p = self._local(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(content)
        return p
