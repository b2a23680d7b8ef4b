#!/usr/bin/env python3
"""Regenerate the golden fixture bundle's derived artifacts.

Builds the fixture APK (deterministic zip: fixed timestamps, stored
order), the pre-decompiled sources tree used by the fixture decompiler,
the analyzer/aggregator scripts for offline discovery, and the findings
handoff file. The encoder for the binary manifest lives with the tests
(it is the parser's differential oracle).
"""

import json
import sys
import zipfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from axml_builder import build_manifest  # noqa: E402

GOLDEN = ROOT / "src/droidvet/fixtures/golden"

MANIFEST_SPEC = {
    "package": "com.ghera.tokenio",
    "min_sdk": 21, "target_sdk": 30,
    "permissions_used": ["android.permission.INTERNET"],
    "components": [
        {"kind": "activity", "name": ".MainActivity", "exported": None,
         "intent_filters": [{"actions": ["android.intent.action.MAIN"],
                             "categories": ["android.intent.category.LAUNCHER"]}]},
        {"kind": "activity", "name": ".NewPasswordActivity", "exported": True},
    ],
}


def main() -> None:
    scenario = json.loads((GOLDEN / "scenario.json").read_text())
    sources = scenario["workspace_sources"]

    sources_dir = GOLDEN / "sources"
    for rel, text in sources.items():
        path = sources_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")

    strings_xml = scenario["device"]["fs"]["res/values/strings.xml"]
    apk_path = GOLDEN / "golden.apk"
    with zipfile.ZipFile(apk_path, "w", zipfile.ZIP_DEFLATED) as zf:
        def add(name: str, blob: bytes):
            zf.writestr(zipfile.ZipInfo(name, (2024, 1, 1, 0, 0, 0)), blob)
        add("AndroidManifest.xml", build_manifest(MANIFEST_SPEC))
        add("res/values/strings.xml", strings_xml.encode("utf-8"))
        add("classes.dex", b"dex\n035\x00" + b"\x00" * 32)

    finding = {
        "title": "Hardcoded AES key enables token forgery",
        "category": "CRYPTO",
        "description": "The password-reset token key is stored in plain text "
                       "in res/values/strings.xml, so anyone can forge tokens.",
        "locations": [{"file_path": "res/values/strings.xml",
                       "line_start": 2, "line_end": 2}],
        "confidence": "high",
    }
    (GOLDEN / "analyzer.json").write_text(json.dumps(
        {"script_version": "1", "mode": "sequence", "loop": False,
         "turns": [{"text": json.dumps([finding], ensure_ascii=False)}]},
        indent=2, ensure_ascii=False) + "\n")
    print(f"golden bundle refreshed under {GOLDEN}")


if __name__ == "__main__":
    main()
