"""Decompiled source trees: external decompiler adapter, caching, exclusion."""

from __future__ import annotations

import hashlib
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from ..errors import DecompilerFailed, DecompilerUnavailable, TimeoutExceeded

try:  # Python 3.10 compatibility
    from importlib.resources import files as _resource_files
except ImportError:  # pragma: no cover
    _resource_files = None


@dataclass(frozen=True)
class SourceFile:
    path: str   # relative to tree root, '/' separated
    loc: int


@dataclass(frozen=True)
class ExcludedFile:
    path: str
    reason: str


@dataclass(frozen=True)
class SourceTree:
    root: Path
    files: tuple[SourceFile, ...]
    excluded: tuple[ExcludedFile, ...] = ()

    def total_loc(self) -> int:
        return sum(f.loc for f in self.files)

    def excluded_loc(self) -> int:
        locs = {f.path: f.loc for f in self.files}
        # excluded entries carry no loc; recount from disk when needed
        return sum(count_loc(self.root / e.path) for e in self.excluded)

    def read(self, rel_path: str) -> str:
        return (self.root / rel_path).read_text(encoding="utf-8", errors="replace")


def count_loc(path: Path) -> int:
    """Physical line count of one source file."""
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError:
        return 0
    if not text:
        return 0
    return text.count("\n") + (0 if text.endswith("\n") else 1)


def scan_tree(root: str | Path) -> SourceTree:
    """Walk a decompiled output directory into a SourceTree."""
    root = Path(root)
    files = []
    for p in sorted(root.rglob("*")):
        if p.is_file():
            rel = p.relative_to(root).as_posix()
            files.append(SourceFile(path=rel, loc=count_loc(p)))
    return SourceTree(root=root, files=tuple(files))


class DecompilerAdapter:
    """Contract for external decompilers: invoked with (apk_path, out_dir),
    must exit 0 and populate out_dir/sources."""

    name = "abstract"

    def run(self, apk_path: Path, out_dir: Path) -> None:
        raise NotImplementedError


class SubprocessDecompiler(DecompilerAdapter):
    """Shells out to a decompiler binary, e.g. jadx."""

    def __init__(self, command: list[str], timeout_s: int = 600):
        self.command = command
        self.timeout_s = timeout_s
        self.name = command[0] if command else "decompiler"

    def run(self, apk_path: Path, out_dir: Path) -> None:
        argv = [*self.command, str(apk_path), "-d", str(out_dir)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True,
                                  timeout=self.timeout_s)
        except FileNotFoundError as exc:
            raise DecompilerUnavailable(f"{self.name}: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise TimeoutExceeded(f"{self.name} exceeded {self.timeout_s}s") from exc
        if proc.returncode != 0:
            raise DecompilerFailed(proc.returncode, proc.stderr)
        if not (out_dir / "sources").is_dir():
            raise DecompilerFailed(0, "decompiler produced no sources/ subtree")


class FixtureDecompiler(DecompilerAdapter):
    """Test stand-in: copies a pre-decompiled fixture tree into out_dir/sources."""

    name = "fixture"

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.invocations = 0

    def run(self, apk_path: Path, out_dir: Path) -> None:
        if not self.fixture_dir.is_dir():
            raise DecompilerUnavailable(f"fixture tree {self.fixture_dir} missing")
        self.invocations += 1
        shutil.copytree(self.fixture_dir, out_dir / "sources", dirs_exist_ok=True)


def apk_digest(apk_path: str | Path) -> str:
    return hashlib.sha256(Path(apk_path).read_bytes()).hexdigest()


def decompile(apk_path: str | Path, adapter: DecompilerAdapter,
              cache_root: str | Path) -> SourceTree:
    """Produce (or reuse) the decompiled source tree for an APK.

    Output is cached under cache_root keyed by the APK content digest,
    so identical inputs invoke the adapter once.
    """
    apk_path = Path(apk_path)
    cache_dir = Path(cache_root) / apk_digest(apk_path)
    sources = cache_dir / "sources"
    marker = cache_dir / ".complete"
    if not marker.exists():
        if cache_dir.exists():
            shutil.rmtree(cache_dir)
        cache_dir.mkdir(parents=True)
        adapter.run(apk_path, cache_dir)
        marker.write_text(adapter.name + "\n")
    return scan_tree(sources)


class ExclusionRules:
    """Ordered path- and package-prefix patterns for third-party code.

    File format: one pattern per line, '#' comments. A pattern with '/'
    matches as a path prefix; a dotted pattern matches the same path
    with dots mapped to slashes.
    """

    def __init__(self, patterns: list[str]):
        if not patterns:
            raise ValueError("exclusion rules must be non-empty")
        self.patterns = patterns

    @classmethod
    def from_text(cls, text: str) -> "ExclusionRules":
        patterns = []
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                patterns.append(line)
        return cls(patterns)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExclusionRules":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "ExclusionRules":
        data = _resource_files("droidvet.data").joinpath("default_exclusions.txt")
        return cls.from_text(data.read_text(encoding="utf-8"))

    def match(self, rel_path: str) -> str | None:
        """First matching pattern for a '/'-separated relative path, or None."""
        for pat in self.patterns:
            prefix = pat if "/" in pat else pat.replace(".", "/")
            if rel_path.startswith(prefix):
                return pat
            # package prefixes like com.google.android. also match the
            # dotted rendering of the path
            if "." in pat and rel_path.replace("/", ".").startswith(pat):
                return pat
        return None


def filter_third_party(tree: SourceTree, rules: ExclusionRules) -> SourceTree:
    """Move rule-matched files to the excluded list, preserving order."""
    kept = []
    excluded = list(tree.excluded)
    for f in tree.files:
        reason = rules.match(f.path)
        if reason is None:
            kept.append(f)
        else:
            excluded.append(ExcludedFile(path=f.path, reason=reason))
    return SourceTree(root=tree.root, files=tuple(kept), excluded=tuple(excluded))
