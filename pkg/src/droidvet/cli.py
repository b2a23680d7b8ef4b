"""Operator entry point: discover, validate, replay, bench, report.

Exit codes are stable: 0 success, 2 configuration problems, 3 model
backend failures, 4 device problems, 5 validation-infrastructure
failures (failed replay, tampered evidence, and similar).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import random
import sys
from decimal import Decimal
from pathlib import Path

from . import fixtures
from .apk.archive import open_apk, read_manifest
from .apk.sources import (ExclusionRules, FixtureDecompiler, SubprocessDecompiler,
                          decompile, filter_third_party)
from .device import SimDevice, load_scenario
from .device.adb import AdbBackend
from .discovery import (AggregationInput, AnalysisRequest, PassthroughProvider,
                        PromptBudget, aggregate, analyze)
from .errors import (BackendError, ConfigError, DeviceUnavailable, DroidvetError,
                     NoAdapter, ProviderError, SchemaError, TimeoutExceeded,
                     UnreplayableBackend)
from .gateway import (Gateway, HttpProvider, ModelConfig, ModelEndpoint,
                      ScriptedProvider)
from .metrics import (GroundTruthLabel, grid_csv, load_table_fixture,
                      render_markdown, stats_from_table, summarize)
from .sast import AdapterRegistry, ScannerReport, ingest_report, \
    warnings_to_candidates
from .schema import dump_findings, load_findings
from .transcript import TranscriptWriter, replay
from .validation import AgentBackends, SessionConfig, SessionLedger, run_session
from .workspace import Workspace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DEVICE = 4
EXIT_INFRA = 5

DEFAULT_SAST_CONFIG = {
    "tools": {
        "mobsf": {"adapter": "sarif"},
        "apkhunt": {"adapter": "jsonlines"},
        "trueseeing": {"adapter": "plaintext",
                       "pattern": r"^(?P<title>[^:]+):(?P<file>\S+?):(?P<line>\d+)"},
    }
}


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} {p} does not exist")
    return p


def _prepare_out(out: str, overwrite: bool) -> Path:
    path = Path(out)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise ConfigError(f"output dir {path} is not empty; pass --overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_backend(spec: str, agent: str, timeout_s: int = 300) -> ModelEndpoint:
    """Backend spec grammar: scripted:<file>, passthrough, or <model-id>
    served over HTTP from $DROIDVET_API_BASE."""
    if spec.startswith("scripted:"):
        provider = ScriptedProvider.from_file(_require(spec[9:],
                                                       f"{agent} script"))
        config = ModelConfig(provider="scripted", model=Path(spec[9:]).stem,
                             call_timeout_s=timeout_s)
    elif spec == "passthrough":
        provider = PassthroughProvider()
        config = ModelConfig(provider="mechanical", model="passthrough",
                             call_timeout_s=timeout_s)
    else:
        import os
        base = os.environ.get("DROIDVET_API_BASE", "")
        if not base:
            raise ConfigError(
                f"backend {spec!r} needs DROIDVET_API_BASE for live HTTP access")
        provider = HttpProvider(base)
        config = ModelConfig(provider="http", model=spec,
                             call_timeout_s=timeout_s)
    return ModelEndpoint(provider=provider, config=config, agent_name=agent)


def parse_decompiler(spec: str):
    if spec.startswith("fixture:"):
        return FixtureDecompiler(_require(spec[8:], "decompiled fixture tree"))
    return SubprocessDecompiler(spec.split())


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False,
                               sort_keys=True) + "\n", encoding="utf-8")


# -- discover ------------------------------------------------------------

def _discover_one(apk_path: Path, args, out: Path) -> dict:
    gateway = Gateway()
    pkg = open_apk(apk_path, max_bytes=args.max_apk_bytes)
    manifest = read_manifest(pkg) if "AndroidManifest.xml" in \
        pkg.entry_names() else None

    adapter = parse_decompiler(args.decompiler)
    tree = decompile(apk_path, adapter, out / "cache")
    rules = ExclusionRules.from_file(args.exclusions) if args.exclusions \
        else ExclusionRules.default()
    tree = filter_third_party(tree, rules)

    analyzer = parse_backend(args.analyzer, "analyzer", args.call_timeout)
    request = AnalysisRequest(
        source=tree, manifest=manifest,
        budget=PromptBudget(max_input_tokens=args.max_input_tokens,
                            chunking=not args.no_chunking))
    candidate_sets = [(analyzer.backend_id, tuple(
        analyze(request, analyzer, gateway=gateway)))]

    if args.sast:
        registry = AdapterRegistry.from_config(
            json.loads(Path(args.sast_config).read_text())
            if args.sast_config else DEFAULT_SAST_CONFIG)
        formatter = parse_backend(args.formatter, "formatter", args.call_timeout)
        for item in args.sast:
            tool, _, report_path = item.partition("=")
            report = ScannerReport(
                tool=tool, format="auto",
                body=_require(report_path, "scanner report").read_bytes())
            output = ingest_report(report, registry.get(tool))
            found = warnings_to_candidates(list(output.warnings), formatter,
                                           gateway=gateway)
            candidate_sets.append((f"sast:{tool}", tuple(found)))

    aggregator = parse_backend(args.aggregator, "aggregator", args.call_timeout)
    findings = aggregate(AggregationInput(candidate_sets=tuple(candidate_sets)),
                         aggregator, gateway=gateway)

    stem = apk_path.stem
    (out / f"{stem}.findings.json").write_text(dump_findings(findings))
    prompt, completion = gateway.total_tokens()
    ledger = {
        "apk": str(apk_path),
        "package": pkg.package_name,
        "loc_retained": tree.total_loc(),
        "files_retained": len(tree.files),
        "files_excluded": len(tree.excluded),
        "findings": len(findings),
        "exchanges": len(gateway.exchanges),
        "prompt_tokens": prompt,
        "completion_tokens": completion,
    }
    _write_json(out / f"{stem}.discovery_ledger.json", ledger)
    return {"apk": str(apk_path), "findings": len(findings),
            "findings_file": f"{stem}.findings.json"}


def cmd_discover(args) -> int:
    out = _prepare_out(args.out, args.overwrite)
    apks = []
    if args.apk:
        apks.append(_require(args.apk, "apk"))
    if args.corpus:
        corpus = _require(args.corpus, "corpus dir")
        apks.extend(sorted(corpus.glob("*.apk")))
    if not apks:
        raise ConfigError("nothing to analyze: pass --apk or --corpus")
    index = [_discover_one(apk, args, out) for apk in apks]
    _write_json(out / "index.json", {"schema_version": "1", "runs": index})
    total = sum(r["findings"] for r in index)
    print(f"discover: {len(apks)} apk(s), {total} speculative finding(s) "
          f"-> {out}")
    return EXIT_OK


# -- validate ------------------------------------------------------------

def _device_factory(spec: str):
    if spec.startswith("sim:"):
        scenario = load_scenario(_require(spec[4:], "scenario"))
        return "sim", lambda: SimDevice(scenario), scenario
    if spec == "adb" or spec.startswith("adb:"):
        serial = spec[4:] or None
        return "adb", lambda: AdbBackend(serial=serial), None
    raise ConfigError(f"unknown device spec {spec!r} (use sim:<file> or adb)")


def _validate_one(finding, backends, scenario, device_factory, out: Path,
                  args) -> SessionLedger:
    from .schema import ValidationOutcome
    from .tools import ToolRegistry
    try:
        device = device_factory()
    except DeviceUnavailable as exc:
        # no reachable device: the session cannot start, record the outcome
        ledger = SessionLedger(session_id=f"s-{finding.id[2:14]}",
                               finding_id=finding.id,
                               finding_title=finding.title,
                               apk_id=args.apk_id,
                               max_iterations=args.max_iterations)
        ledger.outcome = ValidationOutcome.TECHNICAL_ERROR
        ledger.notes = f"DeviceUnavailable: {exc}"
        (out / "ledgers").mkdir(parents=True, exist_ok=True)
        _write_json(out / "ledgers" / f"{finding.id}.json", ledger.to_dict())
        return ledger
    ws = Workspace.for_session(out / "workspace", f"s-{finding.id[2:14]}")
    if scenario is not None and scenario.workspace_sources:
        ws.seed_sources(scenario.workspace_sources)
    transcript = TranscriptWriter(out / "transcripts" /
                                  f"{finding.id}.jsonl")
    config = SessionConfig(max_iterations=args.max_iterations,
                           step_budget=args.step_budget)
    try:
        ledger, promoted = run_session(
            finding, backends, ToolRegistry(), device, ws,
            config=config, transcript=transcript, apk_id=args.apk_id)
    finally:
        transcript.close()
    _write_json(out / "ledgers" / f"{finding.id}.json", ledger.to_dict())
    (out / "findings" / f"{finding.id}.json").parent.mkdir(parents=True,
                                                           exist_ok=True)
    _write_json(out / "findings" / f"{finding.id}.json", promoted.to_dict())
    return ledger


def cmd_validate(args) -> int:
    out = _prepare_out(args.out, args.overwrite)
    findings = load_findings(_require(args.findings, "findings file")
                             .read_text(encoding="utf-8"))
    kind, device_factory, scenario = _device_factory(args.device)
    (out / "ledgers").mkdir(exist_ok=True)
    (out / "transcripts").mkdir(exist_ok=True)

    if not findings:
        _write_json(out / "summary.json",
                    {"schema_version": "1", "sessions": 0, "outcomes": {}})
        print("validate: no findings, nothing to do")
        return EXIT_OK

    def backends() -> AgentBackends:
        return AgentBackends(
            planner=parse_backend(args.planner, "planner", args.call_timeout),
            executor=parse_backend(args.executor, "executor", args.call_timeout),
            validator=parse_backend(args.validator, "validator",
                                    args.call_timeout))

    jobs = 1 if kind == "adb" else max(1, args.jobs)
    ledgers: list[SessionLedger] = []
    if jobs == 1:
        for finding in findings:
            ledgers.append(_validate_one(finding, backends(), scenario,
                                         device_factory, out, args))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_validate_one, finding, backends(), scenario,
                                   device_factory, out, args)
                       for finding in findings]
            ledgers = [f.result() for f in futures]

    report = summarize(ledgers)
    _write_json(out / "summary.json", report)
    (out / "summary.md").write_text(render_markdown(report))
    for ledger in ledgers:
        symbol = ledger.outcome.symbol if ledger.outcome else "?"
        print(f"{symbol} {ledger.finding_id} "
              f"iterations={ledger.iterations_used} "
              f"claims={ledger.claims_total}/{ledger.claims_rejected}")
    technical = sum(1 for l in ledgers
                    if l.outcome is not None
                    and l.outcome.value == "technical_error")
    if technical == len(ledgers):
        print("validate: every session ended in TechnicalError", file=sys.stderr)
        return EXIT_DEVICE
    return EXIT_OK


# -- replay --------------------------------------------------------------

def cmd_replay(args) -> int:
    report = replay(_require(args.transcript, "transcript"),
                    scenario_path=args.scenario)
    print(f"{report.verdict}: {report.events_checked} events checked"
          + (f", first divergence at event {report.first_divergence} "
             f"({report.reason})" if not report.ok else ""))
    return EXIT_OK if report.ok else EXIT_INFRA


# -- bench ---------------------------------------------------------------

def cmd_bench(args) -> int:
    out = _prepare_out(args.out, args.overwrite)
    table_path = Path(args.table) if args.table else \
        fixtures.fixture_path("table6.json")
    doc = load_table_fixture(_require(table_path, "detection table"))
    stats = stats_from_table(doc)
    (out / "grid.csv").write_text(grid_csv(doc))
    report = summarize([], stats=stats)
    _write_json(out / "bench_report.json", report)
    (out / "bench_report.md").write_text(render_markdown(report))
    print(f"bench: {len(stats)} tools -> {out}")
    return EXIT_OK


# -- report --------------------------------------------------------------

def cmd_report(args) -> int:
    out = _prepare_out(args.out, args.overwrite)
    ledger_dir = _require(args.ledgers, "ledger dir")
    ledgers = [SessionLedger.from_dict(json.loads(p.read_text()))
               for p in sorted(ledger_dir.glob("*.json"))]
    labels = None
    if args.labels:
        raw = json.loads(_require(args.labels, "labels file").read_text())
        labels = [GroundTruthLabel(apk_id=l["apk_id"], name=l["name"],
                                   category=l.get("category", ""))
                  for l in raw["labels"]]
    report = summarize(ledgers, labels=labels,
                       actionable=args.actionable or None)
    _write_json(out / "report.json", report)
    (out / "report.md").write_text(render_markdown(report))
    print(f"report: {len(ledgers)} session(s) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droidvet",
        description="Agentic discovery and PoC-backed validation of Android "
                    "APK vulnerabilities")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for retry jitter (core logic is seedless)")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="extract, analyze, aggregate one or "
                                        "more APKs")
    d.add_argument("--apk")
    d.add_argument("--corpus")
    d.add_argument("--sast", action="append", default=[],
                   metavar="TOOL=REPORT")
    d.add_argument("--sast-config")
    d.add_argument("--analyzer", required=True)
    d.add_argument("--aggregator", required=True)
    d.add_argument("--formatter", default="passthrough")
    d.add_argument("--decompiler", default="jadx")
    d.add_argument("--exclusions")
    d.add_argument("--max-input-tokens", type=int, default=100_000)
    d.add_argument("--no-chunking", action="store_true")
    d.add_argument("--max-apk-bytes", type=int, default=5 * 1024 * 1024)
    d.add_argument("--call-timeout", type=int, default=300)
    d.add_argument("--out", required=True)
    d.add_argument("--overwrite", action="store_true")
    d.set_defaults(func=cmd_discover)

    v = sub.add_parser("validate", help="run validation sessions over a "
                                        "findings file")
    v.add_argument("--findings", required=True)
    v.add_argument("--device", required=True, help="sim:<scenario.json> or adb")
    v.add_argument("--planner", required=True)
    v.add_argument("--executor", required=True)
    v.add_argument("--validator", required=True)
    v.add_argument("--max-iterations", type=int, default=20)
    v.add_argument("--step-budget", type=int, default=25)
    v.add_argument("--call-timeout", type=int, default=300)
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--apk-id", default="")
    v.add_argument("--out", required=True)
    v.add_argument("--overwrite", action="store_true")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("replay", help="re-execute a recorded sim transcript")
    r.add_argument("--transcript", required=True)
    r.add_argument("--scenario")
    r.set_defaults(func=cmd_replay)

    b = sub.add_parser("bench", help="emit the benchmark grid and efficiency "
                                     "report")
    b.add_argument("--table")
    b.add_argument("--out", required=True)
    b.add_argument("--overwrite", action="store_true")
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="summarize session ledgers")
    p.add_argument("--ledgers", required=True)
    p.add_argument("--labels")
    p.add_argument("--actionable", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    random.seed(args.seed)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, NoAdapter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendError, ProviderError, TimeoutExceeded) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DeviceUnavailable as exc:
        print(f"device error: {exc}", file=sys.stderr)
        return EXIT_DEVICE
    except UnreplayableBackend as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except DroidvetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
