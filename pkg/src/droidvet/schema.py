"""Shared domain types: findings, warnings, evidence, and the finding lifecycle.

Everything here is an immutable value object. A finding starts life
speculative, and exactly one validation outcome later moves it to
validated or refuted; nothing ever moves it back.

JSON encoding is canonical: lower_snake_case field names, tagged with
"schema_version": "1", and stable under encode/decode round-trips.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import IllegalTransition, MissingPoC, SchemaError

SCHEMA_VERSION = "1"


class Severity(enum.Enum):
    INFO = "info"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class Confidence(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Lifecycle(enum.Enum):
    SPECULATIVE = "speculative"
    VALIDATED = "validated"
    REFUTED = "refuted"


class GheraCategory(enum.Enum):
    CRYPTO = "CRYPTO"
    ICC = "ICC"
    NETWORKING = "NETWORKING"
    NONAPI = "NONAPI"
    PERMISSION = "PERMISSION"
    STORAGE = "STORAGE"
    SYSTEM = "SYSTEM"
    WEB = "WEB"


class RealWorldType(enum.Enum):
    AUTHORIZATION = "Authorization"
    NETWORK_COMMUNICATION = "NetworkCommunication"
    CODE_INJECTION = "CodeInjection"
    WEBVIEW = "WebView"
    DATA_EXPOSURE = "DataExposure"
    INTER_COMPONENT_COMMUNICATION = "InterComponentCommunication"


class ValidationOutcome(enum.Enum):
    """Terminal classification of one validation session.

    The live pipeline emits only the first four; the misclassification
    variants exist for fixture-based evaluation against ground truth.
    """

    VALIDATED_TP = "validated_tp"        # ★
    FILTERED_FP = "filtered_fp"          # ✧
    TP_AS_FP = "tp_misclassified_as_fp"  # ⊗
    FP_AS_TP = "fp_misclassified_as_tp"  # ⊙
    TECHNICAL_ERROR = "technical_error"  # ×
    MAX_ITERATIONS = "max_iterations"    # •

    @property
    def symbol(self) -> str:
        return _OUTCOME_SYMBOLS[self]


_OUTCOME_SYMBOLS = {
    ValidationOutcome.VALIDATED_TP: "★",
    ValidationOutcome.FILTERED_FP: "✧",
    ValidationOutcome.TP_AS_FP: "⊗",
    ValidationOutcome.FP_AS_TP: "⊙",
    ValidationOutcome.TECHNICAL_ERROR: "×",
    ValidationOutcome.MAX_ITERATIONS: "•",
}

LIVE_OUTCOMES = frozenset({
    ValidationOutcome.VALIDATED_TP,
    ValidationOutcome.FILTERED_FP,
    ValidationOutcome.TECHNICAL_ERROR,
    ValidationOutcome.MAX_ITERATIONS,
})


class EvidenceKind(enum.Enum):
    SCREENSHOT = "screenshot"
    UI_LAYOUT = "ui_layout"
    LOG_EXCERPT = "log_excerpt"
    FILE_ARTIFACT = "file_artifact"
    SCRIPT_OUTPUT = "script_output"
    CLAIM_TEXT = "claim_text"


def category_from_token(token: str) -> GheraCategory | RealWorldType:
    """Resolve a category token against both category vocabularies."""
    for enum_cls in (GheraCategory, RealWorldType):
        try:
            return enum_cls(token)
        except ValueError:
            continue
    raise SchemaError(f"unknown category token {token!r}", path="category")


@dataclass(frozen=True)
class CodeLocation:
    file_path: str
    line_start: int
    line_end: int
    symbol: str | None = None

    def __post_init__(self):
        if self.line_start < 1 or self.line_end < self.line_start:
            raise SchemaError(
                f"invalid line range {self.line_start}..{self.line_end}",
                path="code_location")

    def to_dict(self) -> dict:
        d = {"file_path": self.file_path, "line_start": self.line_start,
             "line_end": self.line_end}
        if self.symbol is not None:
            d["symbol"] = self.symbol
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CodeLocation":
        try:
            return cls(d["file_path"], int(d["line_start"]), int(d["line_end"]),
                       d.get("symbol"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad code location: {exc}", path="code_location") from exc

    def sort_key(self) -> tuple:
        return (self.file_path, self.line_start, self.line_end, self.symbol or "")


@dataclass(frozen=True)
class EvidenceRef:
    """Pointer to a content-addressed artifact inside the session workspace."""

    kind: EvidenceKind
    uri: str
    digest: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "uri": self.uri, "digest": self.digest}

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceRef":
        try:
            return cls(EvidenceKind(d["kind"]), d["uri"], d["digest"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad evidence ref: {exc}", path="evidence") from exc


@dataclass(frozen=True)
class Warning:
    """Raw, unvalidated item emitted by a scanner; raw_payload is byte-exact."""

    source_tool: str
    title: str
    raw_payload: str
    category_hint: str | None = None
    location: CodeLocation | None = None
    severity_hint: Severity | None = None

    def __post_init__(self):
        if not self.source_tool:
            raise SchemaError("warning source_tool must be non-empty", path="warning")

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "source_tool": self.source_tool,
            "title": self.title,
            "raw_payload": self.raw_payload,
        }
        if self.category_hint is not None:
            d["category_hint"] = self.category_hint
        if self.location is not None:
            d["location"] = self.location.to_dict()
        if self.severity_hint is not None:
            d["severity_hint"] = self.severity_hint.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Warning":
        try:
            return cls(
                source_tool=d["source_tool"],
                title=d["title"],
                raw_payload=d["raw_payload"],
                category_hint=d.get("category_hint"),
                location=CodeLocation.from_dict(d["location"]) if d.get("location") else None,
                severity_hint=Severity(d["severity_hint"]) if d.get("severity_hint") else None,
            )
        except KeyError as exc:
            raise SchemaError(f"warning missing field {exc}", path="warning") from exc


def finding_id(title: str, category: GheraCategory | RealWorldType,
               locations: tuple[CodeLocation, ...] | list[CodeLocation]) -> str:
    """Deterministic dedup key: content hash of title, category, sorted locations."""
    payload = json.dumps(
        {
            "title": title,
            "category": category.value,
            "locations": [loc.to_dict() for loc in sorted(locations, key=CodeLocation.sort_key)],
        },
        sort_keys=True, separators=(",", ":"),
    )
    return "v-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class StandardizedVulnerability:
    """The unified finding record that flows from discovery into validation."""

    title: str
    category: GheraCategory | RealWorldType
    description: str
    locations: tuple[CodeLocation, ...]
    origin: frozenset[str]
    confidence: Confidence = Confidence.MEDIUM
    evidence: tuple[EvidenceRef, ...] = ()
    lifecycle: Lifecycle = Lifecycle.SPECULATIVE
    id: str = ""

    def __post_init__(self):
        if not self.origin:
            raise SchemaError("finding origin must be non-empty", path="origin")
        if not self.id:
            object.__setattr__(self, "id", finding_id(self.title, self.category, self.locations))
        if self.lifecycle is Lifecycle.VALIDATED and not self.evidence:
            raise SchemaError("validated finding requires at least one PoC evidence ref",
                              path="evidence")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "title": self.title,
            "category": self.category.value,
            "description": self.description,
            "locations": [loc.to_dict() for loc in self.locations],
            "evidence": [ev.to_dict() for ev in self.evidence],
            "origin": sorted(self.origin),
            "confidence": self.confidence.value,
            "lifecycle": self.lifecycle.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizedVulnerability":
        try:
            return cls(
                title=d["title"],
                category=category_from_token(d["category"]),
                description=d["description"],
                locations=tuple(CodeLocation.from_dict(x) for x in d.get("locations", [])),
                origin=frozenset(d["origin"]),
                confidence=Confidence(d.get("confidence", "medium")),
                evidence=tuple(EvidenceRef.from_dict(x) for x in d.get("evidence", [])),
                lifecycle=Lifecycle(d.get("lifecycle", "speculative")),
                id=d.get("id", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"finding missing field {exc}", path="finding") from exc

    def sort_key(self) -> tuple:
        loc = self.locations[0].sort_key() if self.locations else ("", 0, 0, "")
        return (self.category.value, loc[0], loc[1], self.title)


def promote_finding(v: StandardizedVulnerability, outcome: ValidationOutcome,
                    poc: EvidenceRef | None = None) -> StandardizedVulnerability:
    """Apply a validation outcome to a speculative finding.

    ValidatedTP requires a PoC reference and yields a validated finding;
    FilteredFP yields a refuted one; every other outcome leaves the
    finding speculative.
    """
    if v.lifecycle is not Lifecycle.SPECULATIVE:
        raise IllegalTransition(f"finding {v.id} is already {v.lifecycle.value}")
    if outcome is ValidationOutcome.VALIDATED_TP:
        if poc is None:
            raise MissingPoC(f"finding {v.id}: ValidatedTP without a PoC artifact")
        return replace(v, lifecycle=Lifecycle.VALIDATED,
                       evidence=v.evidence + (poc,))
    if outcome is ValidationOutcome.FILTERED_FP:
        return replace(v, lifecycle=Lifecycle.REFUTED)
    return v


def dump_findings(findings: list[StandardizedVulnerability]) -> str:
    """Serialize a findings file (the discovery -> validation handoff format)."""
    return json.dumps(
        {"schema_version": SCHEMA_VERSION,
         "findings": [f.to_dict() for f in findings]},
        indent=2, ensure_ascii=False) + "\n"


def load_findings(text: str) -> list[StandardizedVulnerability]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"findings file is not valid JSON: {exc.msg}",
                          line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict) or "findings" not in doc:
        raise SchemaError("findings file must be an object with a findings array")
    return [StandardizedVulnerability.from_dict(x) for x in doc["findings"]]
