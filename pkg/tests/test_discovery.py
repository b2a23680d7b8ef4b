"""Analyzer chunking and the aggregator's mechanical guarantees."""

from __future__ import annotations

import json
import random

import pytest

from droidvet.apk.sources import SourceFile, SourceTree
from droidvet.discovery import (AggregationInput, AnalysisRequest, PassthroughProvider,
                                PromptBudget, aggregate, analyze, build_chunks)
from droidvet.errors import ContextOverflow, DegenerateOutput, EmptySourceTree
from droidvet.gateway import ModelConfig, ModelEndpoint, ScriptedProvider
from droidvet.schema import (CodeLocation, GheraCategory, Lifecycle,
                             StandardizedVulnerability)


def tree_from(tmp_path, files: dict[str, str]) -> SourceTree:
    entries = []
    for rel, text in files.items():
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        entries.append(SourceFile(rel, text.count("\n")))
    return SourceTree(root=tmp_path, files=tuple(entries))


def endpoint_for(turns, agent="analyzer"):
    return ModelEndpoint(provider=ScriptedProvider(turns=turns),
                         config=ModelConfig(provider="scripted", model="fx"),
                         agent_name=agent)


def passthrough_endpoint():
    return ModelEndpoint(provider=PassthroughProvider(),
                         config=ModelConfig(provider="mechanical",
                                            model="passthrough"),
                         agent_name="aggregator")


FINDING_JSON = [{
    "title": "Hardcoded AES key in string resources",
    "category": "CRYPTO",
    "description": "Constant key allows forging password reset tokens.",
    "locations": [{"file_path": "res/values/strings.xml",
                   "line_start": 2, "line_end": 2}],
    "confidence": "high",
}]


def test_analyze_golden_fixture_single_crypto_finding(tmp_path):
    tree = tree_from(tmp_path, {
        "res/values/strings.xml":
            '<resources>\n<string name="encryption_key">0123456789!@#$%^'
            "</string>\n</resources>\n",
        "com/ghera/tokenio/TokenActivity.java": "class TokenActivity {}\n"})
    request = AnalysisRequest(source=tree, manifest=None,
                              budget=PromptBudget(max_input_tokens=8000))
    found = analyze(request, endpoint_for([
        {"text": json.dumps(FINDING_JSON)}]))
    assert len(found) == 1
    assert found[0].category is GheraCategory.CRYPTO
    assert found[0].locations[0].file_path == "res/values/strings.xml"
    assert found[0].lifecycle is Lifecycle.SPECULATIVE
    assert found[0].origin == {"scripted:fx"}


def test_analyze_empty_tree_is_precondition_error(tmp_path):
    tree = SourceTree(root=tmp_path, files=())
    request = AnalysisRequest(source=tree, manifest=None,
                              budget=PromptBudget(max_input_tokens=1000))
    with pytest.raises(EmptySourceTree):
        analyze(request, endpoint_for([]))


def test_oversized_tree_without_chunking_overflows(tmp_path):
    tree = tree_from(tmp_path, {"big.java": "x" * 40_000 + "\n"})
    request = AnalysisRequest(
        source=tree, manifest=None,
        budget=PromptBudget(max_input_tokens=200, chunking=False))
    with pytest.raises(ContextOverflow):
        analyze(request, endpoint_for([]))


def test_chunking_splits_at_file_boundaries(tmp_path):
    files = {f"f{i}.java": ("line\n" * 100) for i in range(6)}
    tree = tree_from(tmp_path, files)
    request = AnalysisRequest(source=tree, manifest=None,
                              budget=PromptBudget(max_input_tokens=400))
    chunks = build_chunks(request)
    assert len(chunks) > 1
    for name in files:
        assert sum(chunk.count(f"FILE {name} ") for chunk in chunks) == 1


def test_single_oversized_file_elided_head_and_tail(tmp_path):
    body = "\n".join(f"line {i}" for i in range(2000)) + "\n"
    tree = tree_from(tmp_path, {"huge.java": body})
    request = AnalysisRequest(source=tree, manifest=None,
                              budget=PromptBudget(max_input_tokens=500))
    chunks = build_chunks(request)
    assert len(chunks) == 1
    assert "[elided" in chunks[0]
    assert "line 0" in chunks[0] and "line 1999" in chunks[0]
    assert "truncated" in chunks[0]


def make_finding(title, file="App.java", line=1, origin=("analyzer",),
                 category=GheraCategory.CRYPTO) -> StandardizedVulnerability:
    return StandardizedVulnerability(
        title=title, category=category, description=f"about {title}",
        locations=(CodeLocation(file, line, line),),
        origin=frozenset(origin))


def test_aggregate_seven_duplicates_collapse_to_one():
    sets = tuple(
        (f"tool{i}", (make_finding("ConstantKey forgery",
                                   file="res/values/strings.xml", line=3,
                                   origin=(f"tool{i}",)),))
        for i in range(7))
    agg_input = AggregationInput(candidate_sets=sets)
    # oracle, computed without any backend: all seven share one dedup key
    assert len({f.id for _, fs in sets for f in fs}) == 1
    out = aggregate(agg_input, passthrough_endpoint())
    assert len(out) == 1
    assert out[0].origin == {f"tool{i}" for i in range(7)}


def test_aggregate_single_empty_set():
    agg_input = AggregationInput(candidate_sets=(("only", ()),))
    assert aggregate(agg_input, passthrough_endpoint()) == []


def test_aggregate_inflation_is_degenerate_output():
    agg_input = AggregationInput(candidate_sets=(
        ("a", (make_finding("one issue", origin=("a",)),)),))
    granular = [{"title": f"sub-issue {i}", "category": "CRYPTO",
                 "description": "", "locations": [
                     {"file_path": "App.java", "line_start": i + 1,
                      "line_end": i + 1}],
                 "origin": ["a"]} for i in range(2)]
    with pytest.raises(DegenerateOutput):
        aggregate(agg_input, endpoint_for([{"text": json.dumps(granular)}],
                                          agent="aggregator"))


def test_aggregate_denylist_backstop_filters_non_security():
    agg_input = AggregationInput(candidate_sets=(
        ("a", (make_finding("real crypto flaw", origin=("a",)),
               make_finding("code style: long method", origin=("a",)))),))
    out = aggregate(agg_input, passthrough_endpoint())
    assert [f.title for f in out] == ["real crypto flaw"]


def test_aggregate_unique_source_ids_enforced():
    with pytest.raises(ValueError):
        AggregationInput(candidate_sets=(("a", ()), ("a", ())))


def test_aggregate_randomized_properties():
    rng = random.Random(0xA66)
    categories = list(GheraCategory)
    for _ in range(300):
        n_sets = rng.randint(1, 5)
        sets = []
        for s in range(n_sets):
            findings = tuple(
                make_finding(f"issue {rng.randint(0, 6)}",
                             file=f"f{rng.randint(0, 3)}.java",
                             line=rng.randint(1, 4),
                             origin=(f"src{s}",),
                             category=rng.choice(categories))
                for _ in range(rng.randint(0, 4)))
            sets.append((f"src{s}", findings))
        agg_input = AggregationInput(candidate_sets=tuple(sets))
        out = aggregate(agg_input, passthrough_endpoint())
        # non-inflation
        assert len(out) <= agg_input.total_candidates
        # origin subset
        assert all(f.origin <= agg_input.source_ids for f in out)
        # hash-level dedup: no duplicate ids
        assert len({f.id for f in out}) == len(out)
        # deterministic ordering
        assert [f.id for f in out] == \
            [f.id for f in sorted(out, key=StandardizedVulnerability.sort_key)]


def test_table_fixture_aggregation_reproduces_consolidated_counts():
    """Each benchmark row aggregates to its recorded consolidated count;
    the pro-model aggregation column sums to 82 findings."""
    from droidvet import fixtures
    doc = json.loads(fixtures.fixture_path("table6.json").read_text())
    detection_tools = [t for t in doc["tools"] if t not in doc["aggregators"]]

    total = 0
    for row in doc["rows"]:
        expected_count = row["cells"]["agg_g25p"]["alerts"]
        candidate_sets = []
        for tool in detection_tools:
            alerts = row["cells"][tool]["alerts"]
            findings = tuple(
                make_finding(f"{row['name']} candidate {i}",
                             file=f"{row['name']}.java", line=i + 1,
                             origin=(tool,),
                             category=GheraCategory(row["category"]))
                for i in range(min(alerts, 120)))
            candidate_sets.append((tool, findings))
        agg_input = AggregationInput(candidate_sets=tuple(candidate_sets))
        consolidated = [
            {"title": f"{row['name']} consolidated {k}",
             "category": row["category"],
             "description": f"merged report {k} for {row['name']}",
             "locations": [{"file_path": f"{row['name']}.java",
                            "line_start": k + 1, "line_end": k + 1}],
             "origin": detection_tools}
            for k in range(expected_count)]
        out = aggregate(agg_input,
                        endpoint_for([{"text": json.dumps(consolidated)}],
                                     agent="aggregator"))
        assert len(out) == expected_count, row["name"]
        total += len(out)
    assert total == 82
