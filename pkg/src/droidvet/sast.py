"""Third-party scanner ingestion: adapters, normalization, and the formatter.

Scanner output bodies are kept byte-exact; each discrete item either
becomes a Warning or lands in the dropped list with a reason, never a
silent loss. The formatter backend then turns warnings into candidate
findings, with mechanical guards: it may merge warnings but never split
one into several, and it cannot invent code locations.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .errors import BackendError, NoAdapter, UnparseableReport
from .gateway import Gateway, ModelEndpoint
from .prompts import render_prompt
from .schema import (CodeLocation, Confidence, Severity, StandardizedVulnerability,
                     Warning, category_from_token)

log = logging.getLogger("droidvet.sast")


@dataclass(frozen=True)
class ScannerReport:
    tool: str
    format: str              # json | sarif | plaintext
    body: bytes
    captured_at: str = ""

    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class DroppedItem:
    fragment: str
    reason: str


@dataclass(frozen=True)
class FormatterOutput:
    warnings: tuple[Warning, ...]
    dropped: tuple[DroppedItem, ...] = ()

    @property
    def item_count(self) -> int:
        return len(self.warnings) + len(self.dropped)


_SARIF_SEVERITY = {"none": Severity.INFO, "note": Severity.LOW,
                   "warning": Severity.MEDIUM, "error": Severity.HIGH}


class ReportAdapter:
    """Parses one scanner's report body into warnings plus dropped items."""

    name = "abstract"

    def parse(self, report: ScannerReport) -> FormatterOutput:
        raise NotImplementedError


class SarifAdapter(ReportAdapter):
    """SARIF 2.1.0: one item per run result."""

    name = "sarif"

    def parse(self, report: ScannerReport) -> FormatterOutput:
        try:
            doc = json.loads(report.body)
            runs = doc["runs"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UnparseableReport(f"{report.tool}: not a SARIF document: "
                                    f"{exc}") from exc
        warnings: list[Warning] = []
        dropped: list[DroppedItem] = []
        for run in runs:
            for result in run.get("results", []):
                raw = json.dumps(result, ensure_ascii=False, sort_keys=True)
                try:
                    title = result.get("ruleId") or \
                        result["message"]["text"].splitlines()[0]
                    location = None
                    locs = result.get("locations") or []
                    if locs:
                        physical = locs[0].get("physicalLocation", {})
                        uri = physical.get("artifactLocation", {}).get("uri")
                        region = physical.get("region", {})
                        if uri and region.get("startLine"):
                            start = int(region["startLine"])
                            location = CodeLocation(
                                uri, start, int(region.get("endLine", start)))
                    warnings.append(Warning(
                        source_tool=report.tool,
                        title=str(title),
                        raw_payload=raw,
                        category_hint=result.get("ruleId"),
                        location=location,
                        severity_hint=_SARIF_SEVERITY.get(result.get("level")),
                    ))
                except Exception as exc:
                    dropped.append(DroppedItem(fragment=raw[:300],
                                               reason=str(exc)))
        return FormatterOutput(tuple(warnings), tuple(dropped))


class JsonLinesAdapter(ReportAdapter):
    """One JSON object per line; field names configurable per tool."""

    name = "jsonlines"

    def __init__(self, fields: dict | None = None):
        fields = fields or {}
        self.title_field = fields.get("title", "title")
        self.file_field = fields.get("file", "file")
        self.line_field = fields.get("line", "line")
        self.severity_field = fields.get("severity", "severity")
        self.category_field = fields.get("category", "category")

    def parse(self, report: ScannerReport) -> FormatterOutput:
        lines = [l for l in report.text().splitlines() if l.strip()]
        if not lines:
            raise UnparseableReport(f"{report.tool}: empty report body")
        warnings: list[Warning] = []
        dropped: list[DroppedItem] = []
        for line in lines:
            try:
                item = json.loads(line)
                title = item[self.title_field]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                dropped.append(DroppedItem(fragment=line[:300], reason=str(exc)))
                continue
            location = None
            if item.get(self.file_field) and item.get(self.line_field):
                line_no = int(item[self.line_field])
                location = CodeLocation(str(item[self.file_field]),
                                        line_no, line_no)
            severity = None
            raw_severity = str(item.get(self.severity_field, "")).lower()
            if raw_severity in Severity._value2member_map_:
                severity = Severity(raw_severity)
            warnings.append(Warning(
                source_tool=report.tool, title=str(title), raw_payload=line,
                category_hint=item.get(self.category_field),
                location=location, severity_hint=severity))
        return FormatterOutput(tuple(warnings), tuple(dropped))


class PlaintextAdapter(ReportAdapter):
    """Regex with named groups (title, file, line) over line-oriented text.

    Every non-empty, non-comment line is a discrete item; lines the
    pattern cannot parse are dropped with a reason.
    """

    name = "plaintext"

    def __init__(self, pattern: str):
        self.pattern = re.compile(pattern)
        if "title" not in self.pattern.groupindex:
            raise ValueError("plaintext pattern needs a named group 'title'")

    def parse(self, report: ScannerReport) -> FormatterOutput:
        lines = [l for l in report.text().splitlines()
                 if l.strip() and not l.lstrip().startswith("#")]
        if not lines:
            raise UnparseableReport(f"{report.tool}: empty report body")
        warnings: list[Warning] = []
        dropped: list[DroppedItem] = []
        for line in lines:
            m = self.pattern.search(line)
            if not m:
                dropped.append(DroppedItem(fragment=line[:300],
                                           reason="pattern did not match"))
                continue
            groups = m.groupdict()
            location = None
            if groups.get("file") and groups.get("line"):
                line_no = int(groups["line"])
                location = CodeLocation(groups["file"], line_no, line_no)
            warnings.append(Warning(source_tool=report.tool,
                                    title=groups["title"].strip(),
                                    raw_payload=line, location=location))
        return FormatterOutput(tuple(warnings), tuple(dropped))


ADAPTER_KINDS = {"sarif": SarifAdapter, "jsonlines": JsonLinesAdapter,
                 "plaintext": PlaintextAdapter}


class AdapterRegistry:
    """tool id -> adapter, loadable from a JSON config file."""

    def __init__(self):
        self._adapters: dict[str, ReportAdapter] = {}

    def register(self, tool: str, adapter: ReportAdapter) -> None:
        self._adapters[tool] = adapter

    def get(self, tool: str) -> ReportAdapter:
        try:
            return self._adapters[tool]
        except KeyError:
            raise NoAdapter(f"no report adapter registered for {tool!r}") from None

    @classmethod
    def from_config(cls, config: dict) -> "AdapterRegistry":
        registry = cls()
        for tool, spec in config.get("tools", {}).items():
            kind = spec.get("adapter")
            if kind == "sarif":
                registry.register(tool, SarifAdapter())
            elif kind == "jsonlines":
                registry.register(tool, JsonLinesAdapter(spec.get("fields")))
            elif kind == "plaintext":
                registry.register(tool, PlaintextAdapter(spec["pattern"]))
            else:
                raise NoAdapter(f"unknown adapter kind {kind!r} for {tool!r}")
        return registry


def ingest_report(report: ScannerReport, adapter: ReportAdapter) -> FormatterOutput:
    """Normalize one scanner report; every item becomes a warning or a
    dropped record."""
    if not report.body.strip():
        raise UnparseableReport(f"{report.tool}: empty report body")
    output = adapter.parse(report)
    for item in output.dropped:
        log.info("dropped %s item: %s", report.tool, item.reason)
    return output


def parse_findings_array(text: str, default_origin: frozenset[str]
                         ) -> list[StandardizedVulnerability]:
    """Shared decoder for backend responses carrying a findings JSON array."""
    cleaned = text.strip()
    fenced = re.search(r"```(?:json)?\s*(\[.*\])\s*```", cleaned, re.DOTALL)
    if fenced:
        cleaned = fenced.group(1)
    start, end = cleaned.find("["), cleaned.rfind("]")
    if start == -1 or end <= start:
        raise BackendError(f"backend did not return a JSON array: {text[:120]!r}")
    try:
        raw = json.loads(cleaned[start:end + 1])
    except json.JSONDecodeError as exc:
        raise BackendError(f"backend array is malformed JSON: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise BackendError("backend response must be a JSON array")
    findings = []
    for item in raw:
        if not isinstance(item, dict):
            raise BackendError("every finding must be a JSON object")
        try:
            findings.append(StandardizedVulnerability(
                title=str(item["title"]),
                category=category_from_token(str(item["category"])),
                description=str(item.get("description", "")),
                locations=tuple(CodeLocation.from_dict(loc)
                                for loc in item.get("locations", [])),
                origin=frozenset(item.get("origin") or default_origin),
                confidence=Confidence(item.get("confidence", "medium")),
            ))
        except (KeyError, ValueError) as exc:
            raise BackendError(f"bad finding object: {exc}") from exc
    return findings


def warnings_to_candidates(warnings: list[Warning], endpoint: ModelEndpoint,
                           gateway: Gateway | None = None
                           ) -> list[StandardizedVulnerability]:
    """Turn normalized warnings into speculative candidate findings.

    All-or-nothing per batch: a malformed backend response discards the
    whole batch. Mapping is many-to-one or one-to-one, never one-to-many,
    and locations must appear verbatim in some input warning.
    """
    if not warnings:
        return []
    gateway = gateway or Gateway()
    source_tools = frozenset(w.source_tool for w in warnings)
    payload = json.dumps([w.to_dict() for w in warnings], ensure_ascii=False,
                         indent=2)
    messages = [
        {"role": "system", "content": render_prompt("formatter")},
        {"role": "user", "content": "BEGIN_WARNINGS\n" + payload + "\nEND_WARNINGS"},
    ]
    turn = gateway.complete(endpoint, messages, [])
    if turn.text is None:
        raise BackendError("formatter backend returned no text")
    findings = parse_findings_array(turn.text, default_origin=source_tools)

    if len(findings) > len(warnings):
        raise BackendError(
            f"formatter split warnings: {len(findings)} findings from "
            f"{len(warnings)} warnings")
    haystack = "\n".join(
        w.raw_payload + "\n" + (w.location.file_path if w.location else "")
        for w in warnings)
    for finding in findings:
        if not finding.origin <= source_tools:
            raise BackendError(f"finding {finding.title!r} claims origins "
                               f"{sorted(finding.origin - source_tools)} not "
                               "present in the input")
        for loc in finding.locations:
            if loc.file_path not in haystack:
                raise BackendError(f"finding {finding.title!r} fabricates "
                                   f"location {loc.file_path!r}")
    return findings
