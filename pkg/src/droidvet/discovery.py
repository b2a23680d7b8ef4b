"""Model-backed analysis of extracted code and candidate aggregation.

analyze() walks the retained source tree under a token budget, chunking
by whole files (oversized files are elided head+tail). aggregate()
unifies candidate sets from every analyzer and scanner: the backend
proposes the consolidation, then mechanical passes enforce what the
model cannot be trusted with: a non-security deny-list, hash-level
dedup, non-inflation, origin provenance, and a stable output order.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .apk.axml import ManifestModel
from .apk.sources import SourceTree
from .errors import BackendError, ContextOverflow, DegenerateOutput, EmptySourceTree
from .gateway import Gateway, ModelEndpoint, ModelProvider, ModelTurn, estimate_tokens
from .prompts import render_prompt
from .sast import parse_findings_array
from .schema import StandardizedVulnerability

log = logging.getLogger("droidvet.discovery")

# mechanical backstop: aggregation output matching these is never a
# security finding, whatever the backend thought
NON_SECURITY_DENYLIST = ("code style", "styling", "performance", "readability",
                         "formatting", "documentation")

ELISION_MARKER = "... [elided {count} lines] ..."


@dataclass(frozen=True)
class PromptBudget:
    max_input_tokens: int
    chunking: bool = True

    def __post_init__(self):
        if self.max_input_tokens <= 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class AnalysisRequest:
    source: SourceTree
    manifest: ManifestModel | None
    budget: PromptBudget
    persona: str = "analyzer"


@dataclass(frozen=True)
class AggregationInput:
    candidate_sets: tuple[tuple[str, tuple[StandardizedVulnerability, ...]], ...]

    def __post_init__(self):
        ids = [source for source, _ in self.candidate_sets]
        if len(ids) != len(set(ids)):
            raise ValueError("candidate set source ids must be unique")

    @property
    def source_ids(self) -> frozenset[str]:
        return frozenset(source for source, _ in self.candidate_sets)

    @property
    def total_candidates(self) -> int:
        return sum(len(findings) for _, findings in self.candidate_sets)


def _file_section(tree: SourceTree, path: str, loc: int,
                  budget_tokens: int) -> str:
    text = tree.read(path)
    section = f"==== FILE {path} ({loc} lines) ====\n{text}\n"
    if estimate_tokens(section) <= budget_tokens:
        return section
    # oversized single file: keep head and tail, mark the elision
    lines = text.splitlines()
    keep = max(10, budget_tokens // 20)
    head, tail = lines[:keep], lines[-keep:]
    elided = len(lines) - len(head) - len(tail)
    body = "\n".join(head) + "\n" + ELISION_MARKER.format(count=max(elided, 0)) \
        + "\n" + "\n".join(tail)
    return f"==== FILE {path} ({loc} lines, truncated) ====\n{body}\n"


def build_chunks(req: AnalysisRequest) -> list[str]:
    """Pack retained files into prompt chunks that fit the budget.

    Splits only at file boundaries; a file larger than the whole budget
    is elided head+tail rather than split mid-file.
    """
    header = ""
    if req.manifest is not None:
        header = "==== MANIFEST ====\n" + json.dumps(
            req.manifest.to_dict(), indent=2, ensure_ascii=False) + "\n"
    budget = req.budget.max_input_tokens
    header_tokens = estimate_tokens(header)
    if header_tokens >= budget:
        raise ContextOverflow("manifest alone exceeds the input budget")

    sections = [_file_section(req.source, f.path, f.loc, budget - header_tokens)
                for f in req.source.files]
    total = header_tokens + sum(estimate_tokens(s) for s in sections)
    if total <= budget:
        return [header + "".join(sections)]
    if not req.budget.chunking:
        raise ContextOverflow(
            f"sources need ~{total} tokens, budget is {budget} and chunking "
            "is disabled")

    chunks: list[str] = []
    current = header
    current_tokens = header_tokens
    for section in sections:
        section_tokens = estimate_tokens(section)
        if current_tokens + section_tokens > budget and current != header:
            chunks.append(current)
            current, current_tokens = header, header_tokens
        current += section
        current_tokens += section_tokens
    if current != header or not chunks:
        chunks.append(current)
    return chunks


def analyze(req: AnalysisRequest, endpoint: ModelEndpoint,
            gateway: Gateway | None = None) -> list[StandardizedVulnerability]:
    """Run the vulnerability analyzer over one extracted application."""
    if not req.source.files:
        raise EmptySourceTree("no retained source files to analyze")
    gateway = gateway or Gateway()
    origin = frozenset({endpoint.backend_id})
    system = render_prompt(req.persona)
    findings: dict[str, StandardizedVulnerability] = {}
    for chunk in build_chunks(req):
        turn = gateway.complete(endpoint, [
            {"role": "system", "content": system},
            {"role": "user", "content": chunk},
        ], [])
        if turn.text is None:
            raise BackendError("analyzer backend returned no text")
        for finding in parse_findings_array(turn.text, default_origin=origin):
            findings.setdefault(finding.id, finding)
    return sorted(findings.values(), key=StandardizedVulnerability.sort_key)


def _merge(a: StandardizedVulnerability,
           b: StandardizedVulnerability) -> StandardizedVulnerability:
    from dataclasses import replace
    evidence = list(a.evidence)
    seen = {e.digest for e in evidence}
    for item in b.evidence:
        if item.digest not in seen:
            evidence.append(item)
            seen.add(item.digest)
    return replace(a, origin=a.origin | b.origin, evidence=tuple(evidence))


def aggregate(agg_input: AggregationInput, endpoint: ModelEndpoint,
              gateway: Gateway | None = None) -> list[StandardizedVulnerability]:
    """Consolidate all candidate sets into the final speculative findings."""
    if not agg_input.candidate_sets:
        raise ValueError("aggregation needs at least one candidate set")
    if agg_input.total_candidates == 0:
        return []
    gateway = gateway or Gateway()

    candidates_json = json.dumps(
        [{"source": source,
          "findings": [f.to_dict() for f in findings],
          "raw_titles": [f.title for f in findings]}
         for source, findings in agg_input.candidate_sets],
        ensure_ascii=False, indent=2)
    turn = gateway.complete(endpoint, [
        {"role": "system", "content": render_prompt("aggregator")},
        {"role": "user", "content": "BEGIN_CANDIDATES\n" + candidates_json
                                    + "\nEND_CANDIDATES"},
    ], [])
    if turn.text is None:
        raise BackendError("aggregator backend returned no text")
    proposed = parse_findings_array(turn.text,
                                    default_origin=agg_input.source_ids)

    if len(proposed) > agg_input.total_candidates:
        raise DegenerateOutput(
            f"aggregation inflated {agg_input.total_candidates} candidates "
            f"into {len(proposed)} findings")

    kept: dict[str, StandardizedVulnerability] = {}
    for finding in proposed:
        text = (finding.title + " " + finding.description).lower()
        if any(term in text for term in NON_SECURITY_DENYLIST):
            log.info("filtered non-security item: %s", finding.title)
            continue
        if not finding.origin <= agg_input.source_ids:
            raise BackendError(
                f"finding {finding.title!r} claims origins "
                f"{sorted(finding.origin - agg_input.source_ids)} that "
                "contributed no candidates")
        if finding.id in kept:
            kept[finding.id] = _merge(kept[finding.id], finding)
        else:
            kept[finding.id] = finding
    return sorted(kept.values(), key=StandardizedVulnerability.sort_key)


class PassthroughProvider(ModelProvider):
    """Deterministic aggregation/formatter backend: echoes the candidate
    findings verbatim. Useful for offline runs and mechanical property
    tests where the consolidation itself is not under test."""

    _BLOCK = re.compile(r"BEGIN_(CANDIDATES|WARNINGS)\n(.*)\nEND_\1", re.DOTALL)

    def generate(self, conversation, tool_manifest, config):
        content = str(conversation[-1].get("content", ""))
        match = self._BLOCK.search(content)
        if not match:
            raise BackendError("passthrough provider found no candidate block")
        doc = json.loads(match.group(2))
        if match.group(1) == "CANDIDATES":
            merged = []
            for entry in doc:
                merged.extend(entry["findings"])
            text = json.dumps(merged, ensure_ascii=False)
        else:
            text = json.dumps([
                {"title": w["title"],
                 "category": w.get("category_hint") or "SYSTEM",
                 "description": w.get("title", ""),
                 "locations": [w["location"]] if w.get("location") else [],
                 "origin": [w["source_tool"]]}
                for w in doc], ensure_ascii=False)
        prompt_toks = sum(estimate_tokens(str(m.get("content", "")))
                          for m in conversation)
        return ModelTurn(text=text), prompt_toks, estimate_tokens(text)
