from .archive import ApkEntry, ApkPackage, open_apk, read_manifest, read_member
from .axml import Component, IntentFilter, ManifestModel, parse_binary_manifest, resolve_exported
from .sources import (DecompilerAdapter, ExclusionRules, FixtureDecompiler, SourceTree,
                      SubprocessDecompiler, decompile, filter_third_party, scan_tree)

__all__ = [
    "ApkEntry", "ApkPackage", "open_apk", "read_manifest", "read_member",
    "Component", "IntentFilter", "ManifestModel", "parse_binary_manifest",
    "resolve_exported", "DecompilerAdapter", "ExclusionRules", "FixtureDecompiler",
    "SourceTree", "SubprocessDecompiler", "decompile", "filter_third_party", "scan_tree",
]
