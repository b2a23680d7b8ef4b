"""APK container access: central-directory listing and member extraction."""

from __future__ import annotations

import zipfile
from dataclasses import dataclass
from pathlib import Path

from ..errors import NotAnArchive, OversizeApk, TruncatedArchive
from .axml import parse_binary_manifest

# Detection-phase size cap; larger APKs exceed model context limits.
DEFAULT_MAX_APK_BYTES = 5 * 1024 * 1024

MANIFEST_MEMBER = "AndroidManifest.xml"


@dataclass(frozen=True)
class ApkEntry:
    name: str
    offset: int
    compressed_size: int
    crc32: int


@dataclass(frozen=True)
class ApkPackage:
    path: Path
    size_bytes: int
    package_name: str
    entries: tuple[ApkEntry, ...]

    def entry_names(self) -> list[str]:
        return [e.name for e in self.entries]


def open_apk(path: str | Path, max_bytes: int = DEFAULT_MAX_APK_BYTES) -> ApkPackage:
    """Parse the APK's central directory without inflating its entries.

    The binary manifest member alone is read (when present) to recover
    the package name. Raises NotAnArchive, TruncatedArchive, or
    OversizeApk.
    """
    path = Path(path)
    size = path.stat().st_size
    if size > max_bytes:
        raise OversizeApk(f"{path} is {size} bytes, cap is {max_bytes}")
    with path.open("rb") as fh:
        signature = fh.read(4)
    if signature[:2] != b"PK":
        raise NotAnArchive(f"{path} does not start with a ZIP signature")
    try:
        with zipfile.ZipFile(path) as zf:
            entries = tuple(
                ApkEntry(name=info.filename, offset=info.header_offset,
                         compressed_size=info.compress_size, crc32=info.CRC)
                for info in zf.infolist())
            package_name = ""
            if MANIFEST_MEMBER in zf.namelist():
                try:
                    package_name = parse_binary_manifest(
                        zf.read(MANIFEST_MEMBER)).package_name
                except Exception:
                    package_name = ""
    except zipfile.BadZipFile as exc:
        raise TruncatedArchive(f"{path}: {exc}") from exc
    return ApkPackage(path=path, size_bytes=size, package_name=package_name,
                      entries=entries)


def read_member(pkg: ApkPackage, name: str) -> bytes:
    with zipfile.ZipFile(pkg.path) as zf:
        return zf.read(name)


def read_manifest(pkg: ApkPackage):
    """Parse the package's binary manifest into a ManifestModel."""
    return parse_binary_manifest(read_member(pkg, MANIFEST_MEMBER))
