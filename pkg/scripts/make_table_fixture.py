#!/usr/bin/env python3
"""Build the benchmark detection-table fixture from its transcription.

Cross-checks every column against the published totals (alert sums,
detected counts) before writing, so a transcription slip cannot land in
the fixture. Output: src/droidvet/fixtures/table6.json and the golden
CSV grid for the bench command.
"""

import csv
import io
import json
from pathlib import Path

TOOLS = ["mobsf", "apkhunt", "trueseeing", "g25f", "g25p", "oss", "o3",
         "agg_g25f", "agg_g25p", "agg_oss", "agg_o3"]

AGGREGATORS = {"agg_g25f", "agg_g25p", "agg_oss", "agg_o3"}

TOOL_LABELS = {
    "mobsf": "MobSF", "apkhunt": "APKHunt", "trueseeing": "Trueseeing",
    "g25f": "gemini-2.5-flash", "g25p": "gemini-2.5-pro", "oss": "gpt-oss-120b",
    "o3": "o3", "agg_g25f": "gemini-2.5-flash (Agg)",
    "agg_g25p": "gemini-2.5-pro (Agg)", "agg_oss": "gpt-oss-120b (Agg)",
    "agg_o3": "o3 (Agg)",
}

# (name, category, [(count, detected) x 11])
ROWS = [
    ("BlockCipher-ECB-InformationExposure", "CRYPTO",
     [(95, 1), (25, 1), (18, 1), (3, 0), (3, 1), (6, 1), (4, 1),
      (3, 1), (3, 1), (4, 1), (3, 1)]),
    ("BlockCipher-NonRandomIV-InformationExposure", "CRYPTO",
     [(91, 0), (24, 0), (18, 0), (3, 1), (2, 1), (5, 1), (4, 1),
      (2, 1), (2, 1), (3, 1), (3, 1)]),
    ("ConstantKey-ForgeryAttack", "CRYPTO",
     [(107, 0), (22, 0), (17, 1), (2, 1), (2, 1), (4, 1), (3, 1),
      (1, 1), (1, 1), (3, 1), (2, 1)]),
    ("ExposedCredentials-InformationExposure", "CRYPTO",
     [(91, 0), (23, 0), (16, 0), (1, 1), (1, 1), (3, 1), (2, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("PBE-ConstantSalt-InformationExposure", "CRYPTO",
     [(95, 0), (24, 0), (18, 0), (3, 0), (3, 1), (4, 1), (3, 1),
      (3, 1), (2, 1), (2, 1), (3, 1)]),
    ("DynamicRegBroadcastReceiver-UnrestrictedAccess", "ICC",
     [(92, 0), (23, 0), (16, 0), (1, 1), (1, 1), (2, 1), (2, 1),
      (2, 1), (1, 1), (3, 1), (1, 1)]),
    ("EmptyPendingIntent-PrivEscalation", "ICC",
     [(94, 0), (22, 0), (15, 0), (1, 1), (1, 1), (3, 1), (2, 1),
      (1, 1), (1, 1), (1, 1), (1, 1)]),
    ("FragmentInjection-PrivEscalation", "ICC",
     [(94, 0), (21, 0), (15, 0), (1, 1), (1, 1), (2, 1), (1, 1),
      (1, 1), (1, 1), (1, 1), (1, 1)]),
    ("HighPriority-ActivityHijack", "ICC",
     [(94, 0), (21, 1), (15, 0), (2, 1), (3, 1), (2, 1), (2, 1),
      (3, 1), (2, 1), (3, 1), (2, 1)]),
    ("ImplicitPendingIntent-IntentHijack", "ICC",
     [(95, 0), (22, 0), (15, 0), (2, 0), (2, 0), (3, 0), (3, 1),
      (2, 1), (2, 1), (3, 1), (2, 1)]),
    ("InadequatePathPermission-InformationExposure", "ICC",
     [(94, 0), (23, 0), (16, 0), (1, 0), (1, 0), (4, 0), (2, 1),
      (1, 1), (1, 1), (3, 1), (1, 1)]),
    ("IncorrectHandlingImplicitIntent-UnauthorizedAccess", "ICC",
     [(92, 0), (21, 0), (15, 1), (1, 1), (1, 1), (2, 1), (3, 1),
      (3, 1), (1, 1), (2, 1), (2, 1)]),
    ("NoValidityCheckOnBroadcastMsg-UnintendedInvocation", "ICC",
     [(95, 0), (23, 0), (17, 1), (1, 0), (2, 0), (3, 1), (2, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("OrderedBroadcast-DataInjection", "ICC",
     [(93, 0), (24, 0), (17, 0), (1, 0), (1, 0), (4, 0), (1, 0),
      (2, 0), (1, 0), (2, 0), (1, 0)]),
    ("StickyBroadcast-DataInjection", "ICC",
     [(94, 0), (23, 0), (16, 0), (1, 1), (1, 1), (2, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("TaskAffinity-ActivityHijack", "ICC",
     [(94, 0), (23, 0), (16, 0), (2, 0), (2, 0), (6, 0), (1, 0),
      (2, 0), (1, 0), (2, 0), (1, 0)]),
    ("TaskAffinity-LauncherActivity-PhishingAttack", "ICC",
     [(94, 0), (21, 0), (15, 0), (0, 0), (0, 0), (3, 0), (0, 0),
      (1, 0), (1, 0), (3, 0), (1, 0)]),
    ("TaskAffinity-PhishingAttack", "ICC",
     [(94, 0), (23, 0), (16, 0), (2, 0), (2, 0), (2, 0), (1, 0),
      (1, 0), (1, 0), (2, 0), (1, 0)]),
    ("TaskAffinityAndReparenting-PhishingAndDoSAttack", "ICC",
     [(91, 0), (21, 0), (15, 0), (1, 0), (2, 0), (7, 0), (1, 0),
      (2, 0), (1, 0), (4, 0), (2, 0)]),
    ("UnhandledException-DOS", "ICC",
     [(89, 0), (20, 0), (13, 0), (1, 1), (1, 1), (2, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("UnprotectedBroadcastRecv-PrivEscalation", "ICC",
     [(91, 0), (24, 1), (18, 1), (1, 1), (2, 1), (2, 1), (1, 1),
      (2, 1), (2, 1), (1, 1), (1, 1)]),
    ("WeakChecksOnDynamicInvocation-DataInjection", "ICC",
     [(91, 0), (23, 0), (17, 0), (1, 1), (1, 1), (3, 1), (2, 1),
      (2, 1), (1, 1), (2, 1), (1, 1)]),
    ("CheckValidity-InformationExposure", "NETWORKING",
     [(97, 1), (25, 1), (16, 0), (2, 1), (2, 1), (3, 1), (1, 1),
      (1, 1), (1, 1), (3, 1), (1, 1)]),
    ("IncorrectHostNameVerification-MITM", "NETWORKING",
     [(97, 1), (25, 1), (16, 0), (2, 1), (2, 1), (1, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("InsecureSSLSocket-MITM", "NETWORKING",
     [(95, 0), (23, 0), (17, 0), (1, 0), (1, 0), (1, 0), (1, 0),
      (1, 0), (1, 0), (1, 0), (2, 0)]),
    ("InsecureSSLSocketFactory-MITM", "NETWORKING",
     [(95, 1), (24, 0), (16, 0), (1, 1), (2, 1), (1, 1), (1, 1),
      (1, 1), (1, 1), (1, 1), (1, 1)]),
    ("InvalidCertificateAuthority-MITM", "NETWORKING",
     [(97, 1), (25, 1), (16, 0), (3, 1), (2, 1), (4, 1), (3, 1),
      (1, 1), (2, 1), (2, 1), (1, 1)]),
    ("OpenSocket-InformationLeak", "NETWORKING",
     [(91, 0), (22, 0), (17, 0), (2, 0), (1, 0), (4, 0), (1, 0),
      (2, 0), (2, 0), (2, 0), (2, 0)]),
    ("UnEncryptedSocketComm-MITM", "NETWORKING",
     [(97, 0), (22, 0), (17, 1), (2, 1), (1, 0), (3, 1), (1, 1),
      (2, 1), (1, 1), (4, 1), (2, 1)]),
    ("UnpinnedCertificates-MITM", "NETWORKING",
     [(96, 1), (27, 1), (17, 0), (2, 1), (3, 0), (4, 0), (1, 0),
      (2, 1), (2, 1), (4, 1), (2, 1)]),
    ("MergeManifest-UnintendedBehavior", "NONAPI",
     [(94, 0), (23, 0), (16, 0), (1, 1), (2, 1), (3, 1), (2, 1),
      (1, 1), (2, 1), (2, 1), (2, 1)]),
    ("OutdatedLibrary-DirectoryTraversal", "NONAPI",
     [(93, 0), (21, 0), (15, 0), (1, 1), (1, 1), (5, 1), (3, 1),
      (2, 1), (1, 1), (3, 1), (2, 1)]),
    ("UnnecessaryPerms-PrivEscalation", "PERMISSION",
     [(94, 0), (23, 0), (16, 0), (1, 0), (1, 0), (3, 1), (2, 0),
      (2, 0), (1, 0), (2, 0), (1, 0)]),
    ("WeakPermission-UnauthorizedAccess", "PERMISSION",
     [(91, 0), (22, 1), (15, 0), (1, 0), (1, 1), (3, 0), (2, 0),
      (1, 1), (1, 1), (3, 1), (1, 1)]),
    ("ExternalStorage-DataInjection", "STORAGE",
     [(91, 0), (21, 1), (15, 0), (1, 1), (2, 1), (1, 0), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("ExternalStorage-InformationLeak", "STORAGE",
     [(97, 0), (21, 1), (15, 0), (1, 1), (1, 1), (2, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("InternalStorage-DirectoryTraversal", "STORAGE",
     [(94, 0), (21, 0), (15, 0), (1, 1), (1, 1), (5, 1), (2, 1),
      (1, 1), (1, 1), (4, 1), (1, 1)]),
    ("InternalToExternalStorage-InformationLeak", "STORAGE",
     [(91, 0), (22, 0), (15, 0), (1, 1), (1, 1), (1, 1), (1, 0),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("SQLite-execSQL", "STORAGE",
     [(98, 0), (24, 1), (15, 0), (1, 1), (1, 1), (1, 1), (2, 1),
      (2, 1), (1, 1), (3, 1), (2, 1)]),
    ("SQLite-RawQuery-SQLInjection", "STORAGE",
     [(105, 0), (25, 1), (15, 0), (1, 1), (1, 1), (3, 1), (4, 1),
      (3, 1), (4, 1), (4, 1), (2, 1)]),
    ("SQLite-SQLInjection", "STORAGE",
     [(101, 0), (25, 1), (15, 0), (4, 1), (1, 1), (5, 1), (4, 1),
      (3, 1), (4, 1), (5, 1), (3, 1)]),
    ("CheckCallingOrSelfPermission-PrivilegeEscalation", "SYSTEM",
     [(91, 0), (23, 0), (16, 0), (1, 1), (1, 0), (4, 0), (3, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("CheckPermission-PrivilegeEscalation", "SYSTEM",
     [(94, 0), (23, 0), (16, 0), (2, 0), (2, 0), (3, 1), (3, 0),
      (1, 0), (1, 0), (4, 0), (1, 0)]),
    ("ClipboardUse-InformationExposure", "SYSTEM",
     [(91, 0), (23, 1), (16, 0), (1, 1), (1, 1), (1, 1), (1, 1),
      (1, 1), (1, 1), (3, 1), (1, 1)]),
    ("DynamicCodeLoading-CodeInjection", "SYSTEM",
     [(94, 0), (22, 0), (16, 0), (1, 1), (1, 1), (3, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("EnforceCallingOrSelfPermission-PrivilegeEscalation", "SYSTEM",
     [(91, 0), (23, 0), (16, 0), (1, 0), (1, 0), (3, 1), (3, 1),
      (2, 1), (1, 1), (3, 1), (2, 1)]),
    ("EnforcePermission-PrivilegeEscalation", "SYSTEM",
     [(91, 0), (23, 0), (16, 0), (1, 0), (1, 0), (5, 0), (2, 0),
      (1, 0), (2, 0), (4, 0), (1, 0)]),
    ("UniqueIDs-IdentityLeak", "SYSTEM",
     [(94, 0), (22, 0), (17, 1), (1, 1), (2, 1), (2, 1), (1, 1),
      (2, 1), (1, 1), (3, 1), (3, 1)]),
    ("HttpConnection-MITM", "WEB",
     [(91, 0), (23, 1), (17, 1), (1, 1), (1, 1), (2, 1), (1, 1),
      (2, 1), (1, 1), (1, 1), (1, 1)]),
    ("JavaScriptExecution-CodeInjection", "WEB",
     [(91, 0), (25, 1), (18, 0), (2, 1), (2, 1), (3, 1), (2, 1),
      (2, 1), (1, 1), (2, 1), (2, 1)]),
    ("UnsafeIntentURLImpl-InformationExposure", "WEB",
     [(93, 0), (25, 0), (17, 0), (1, 1), (1, 1), (5, 1), (3, 1),
      (2, 1), (2, 1), (3, 1), (2, 1)]),
    ("WebView-CookieOverwrite", "WEB",
     [(98, 0), (24, 0), (18, 0), (1, 0), (1, 0), (3, 0), (1, 0),
      (1, 0), (1, 0), (2, 0), (1, 0)]),
    ("WebView-NoUserPermission-InformationExposure", "WEB",
     [(94, 1), (25, 0), (17, 0), (2, 1), (2, 1), (3, 1), (2, 1),
      (1, 1), (2, 1), (3, 1), (2, 1)]),
    ("WebViewAllowContentAccess-UnauthorizedFileAccess", "WEB",
     [(94, 1), (27, 0), (18, 0), (3, 1), (2, 1), (4, 1), (2, 1),
      (2, 1), (1, 1), (2, 1), (2, 1)]),
    ("WebViewAllowFileAccess-UnauthorizedFileAccess", "WEB",
     [(93, 1), (26, 0), (17, 0), (1, 1), (1, 1), (4, 1), (1, 1),
      (1, 1), (1, 1), (3, 1), (1, 1)]),
    ("WebViewIgnoreSSLWarning-MITM", "WEB",
     [(95, 1), (26, 1), (18, 0), (1, 1), (1, 1), (3, 1), (1, 1),
      (1, 1), (1, 1), (2, 1), (1, 1)]),
    ("WebViewInterceptRequest-MITM", "WEB",
     [(94, 0), (30, 0), (19, 0), (3, 0), (4, 0), (5, 0), (5, 0),
      (2, 0), (2, 0), (3, 0), (1, 0)]),
    ("WebViewLoadDataWithBaseUrl-UnauthorizedFileAccess", "WEB",
     [(95, 1), (25, 1), (17, 0), (1, 1), (1, 1), (4, 0), (2, 1),
      (1, 1), (1, 1), (5, 1), (2, 1)]),
    ("WebViewOverrideUrl-MITM", "WEB",
     [(94, 0), (26, 0), (18, 0), (2, 1), (2, 1), (4, 1), (3, 0),
      (2, 1), (2, 1), (3, 1), (2, 1)]),
    ("WebViewProceed-UnauthorizedAccess", "WEB",
     [(102, 0), (27, 0), (18, 0), (2, 0), (3, 0), (5, 0), (3, 0),
      (2, 0), (1, 0), (4, 0), (2, 0)]),
]

PUBLISHED_ALERTS = {
    "mobsf": 5654, "apkhunt": 1405, "trueseeing": 978, "g25f": 89, "g25p": 92,
    "oss": 193, "o3": 116, "agg_g25f": 95, "agg_g25p": 82, "agg_oss": 157,
    "agg_o3": 91,
}
PUBLISHED_DETECTED = {
    "mobsf": 11, "apkhunt": 18, "trueseeing": 8, "g25f": 40, "g25p": 40,
    "oss": 42, "o3": 43, "agg_g25f": 47, "agg_g25p": 47, "agg_oss": 47,
    "agg_o3": 47,
}
PUBLISHED_RECALL = {
    "mobsf": "18.3", "apkhunt": "30.0", "trueseeing": "13.3", "g25f": "66.7",
    "g25p": "66.7", "oss": "70.0", "o3": "71.7", "agg_g25f": "78.3",
    "agg_g25p": "78.3", "agg_oss": "78.3", "agg_o3": "78.3",
}


def build() -> dict:
    assert len(ROWS) == 60, f"expected 60 rows, have {len(ROWS)}"
    problems = []
    for idx, tool in enumerate(TOOLS):
        alerts = sum(cells[idx][0] for _, _, cells in ROWS)
        detected = sum(cells[idx][1] for _, _, cells in ROWS)
        if alerts != PUBLISHED_ALERTS[tool]:
            problems.append(f"{tool}: alert sum {alerts} != "
                            f"{PUBLISHED_ALERTS[tool]}")
        if detected != PUBLISHED_DETECTED[tool]:
            problems.append(f"{tool}: detected {detected} != "
                            f"{PUBLISHED_DETECTED[tool]}")
    if problems:
        raise SystemExit("transcription mismatch:\n  " + "\n  ".join(problems))

    return {
        "schema_version": "1",
        "benchmark": {"name": "ghera", "labeled_vulnerabilities": 60},
        "tools": TOOLS,
        "tool_labels": TOOL_LABELS,
        "aggregators": sorted(AGGREGATORS),
        "published_totals": {"alerts": PUBLISHED_ALERTS,
                             "detected": PUBLISHED_DETECTED,
                             "recall_percent": PUBLISHED_RECALL},
        "rows": [
            {"name": name, "category": category,
             "cells": {tool: {"alerts": cells[i][0],
                              "detected": bool(cells[i][1])}
                       for i, tool in enumerate(TOOLS)}}
            for name, category, cells in ROWS
        ],
    }


def grid_csv(doc: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["vulnerability", "category"]
                    + [f"{t}_alerts" for t in doc["tools"]]
                    + [f"{t}_detected" for t in doc["tools"]])
    for row in doc["rows"]:
        writer.writerow(
            [row["name"], row["category"]]
            + [row["cells"][t]["alerts"] for t in doc["tools"]]
            + [int(row["cells"][t]["detected"]) for t in doc["tools"]])
    totals = doc["published_totals"]
    writer.writerow(["TOTAL_ALERTS", ""]
                    + [totals["alerts"][t] for t in doc["tools"]]
                    + ["" for _ in doc["tools"]])
    writer.writerow(["TOTAL_DETECTED", ""]
                    + ["" for _ in doc["tools"]]
                    + [totals["detected"][t] for t in doc["tools"]])
    writer.writerow(["RECALL_PERCENT", ""]
                    + ["" for _ in doc["tools"]]
                    + [totals["recall_percent"][t] for t in doc["tools"]])
    return out.getvalue()


if __name__ == "__main__":
    fixtures = Path(__file__).resolve().parents[1] / "src/droidvet/fixtures"
    doc = build()
    (fixtures / "table6.json").write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    (fixtures / "bench_grid.csv").write_text(grid_csv(doc))
    print("fixture verified against published totals; written")
