"""Core domain types: lifecycle rules, enum cardinalities, round-trips."""

from __future__ import annotations

import random

import pytest

from droidvet.errors import IllegalTransition, MissingPoC, SchemaError
from droidvet.schema import (CodeLocation, Confidence, EvidenceKind, EvidenceRef,
                             GheraCategory, Lifecycle, RealWorldType, Severity,
                             StandardizedVulnerability, ValidationOutcome, Warning,
                             dump_findings, finding_id, load_findings,
                             promote_finding)


def make_finding(**overrides) -> StandardizedVulnerability:
    base = dict(
        title="Hardcoded AES key in resources",
        category=GheraCategory.CRYPTO,
        description="The token key is embedded in strings.xml.",
        locations=(CodeLocation("res/values/strings.xml", 4, 4),),
        origin=frozenset({"analyzer"}),
    )
    base.update(overrides)
    return StandardizedVulnerability(**base)


POC = EvidenceRef(EvidenceKind.SCRIPT_OUTPUT, "evidence/abc", "deadbeef")


def test_enum_cardinalities():
    assert len(GheraCategory) == 8
    assert len(RealWorldType) == 6
    assert len(ValidationOutcome) == 6
    assert {o.symbol for o in ValidationOutcome} == {"★", "✧", "⊗", "⊙", "×", "•"}


def test_promote_validated_tp_with_poc():
    out = promote_finding(make_finding(), ValidationOutcome.VALIDATED_TP, POC)
    assert out.lifecycle is Lifecycle.VALIDATED
    assert POC in out.evidence


def test_promote_filtered_fp_refutes():
    out = promote_finding(make_finding(), ValidationOutcome.FILTERED_FP)
    assert out.lifecycle is Lifecycle.REFUTED


def test_promote_validated_tp_without_poc_is_error():
    with pytest.raises(MissingPoC):
        promote_finding(make_finding(), ValidationOutcome.VALIDATED_TP, None)


def test_promote_other_outcomes_keep_speculative():
    for outcome in (ValidationOutcome.TECHNICAL_ERROR, ValidationOutcome.MAX_ITERATIONS):
        assert promote_finding(make_finding(), outcome).lifecycle is Lifecycle.SPECULATIVE


def test_lifecycle_is_one_way():
    validated = promote_finding(make_finding(), ValidationOutcome.VALIDATED_TP, POC)
    refuted = promote_finding(make_finding(), ValidationOutcome.FILTERED_FP)
    for done in (validated, refuted):
        with pytest.raises(IllegalTransition):
            promote_finding(done, ValidationOutcome.FILTERED_FP)


def test_validated_requires_evidence_at_construction():
    with pytest.raises(SchemaError):
        make_finding(lifecycle=Lifecycle.VALIDATED)


def test_empty_origin_rejected():
    with pytest.raises(SchemaError):
        make_finding(origin=frozenset())


def test_bad_location_range_rejected():
    with pytest.raises(SchemaError):
        CodeLocation("a.java", 5, 4)
    with pytest.raises(SchemaError):
        CodeLocation("a.java", 0, 4)


def test_finding_id_ignores_location_order():
    locs = (CodeLocation("b.java", 2, 3), CodeLocation("a.java", 1, 1))
    assert finding_id("t", GheraCategory.ICC, locs) == finding_id(
        "t", GheraCategory.ICC, tuple(reversed(locs)))


def _random_location(rng: random.Random) -> CodeLocation:
    start = rng.randint(1, 500)
    return CodeLocation(
        file_path=f"src/{rng.choice('abcdef')}/{rng.randint(0, 99)}.java",
        line_start=start,
        line_end=start + rng.randint(0, 20),
        symbol=rng.choice([None, "com.x.Cls.method"]))


def _random_finding(rng: random.Random) -> StandardizedVulnerability:
    category = rng.choice(list(GheraCategory) + list(RealWorldType))
    finding = StandardizedVulnerability(
        title="finding " + "".join(rng.choices("abcdefgh", k=8)),
        category=category,
        description="desc " + "".join(rng.choices("xyz \n", k=30)),
        locations=tuple(_random_location(rng) for _ in range(rng.randint(0, 3))),
        origin=frozenset(rng.sample(["mobsf", "apkhunt", "o3", "g25p", "scan"],
                                    rng.randint(1, 4))),
        confidence=rng.choice(list(Confidence)),
        evidence=tuple(
            EvidenceRef(rng.choice(list(EvidenceKind)), f"evidence/{i}", f"{i:08x}")
            for i in range(rng.randint(0, 2))),
    )
    if rng.random() < 0.3:
        finding = promote_finding(
            finding, ValidationOutcome.FILTERED_FP) if rng.random() < 0.5 else \
            promote_finding(finding, ValidationOutcome.VALIDATED_TP, POC)
    return finding


def test_serialization_round_trip_randomized():
    rng = random.Random(2027)
    for _ in range(500):
        finding = _random_finding(rng)
        again = StandardizedVulnerability.from_dict(finding.to_dict())
        assert again == finding
        assert again.id == finding.id

        warning = Warning(
            source_tool=rng.choice(["mobsf", "trueseeing"]),
            title="w" + str(rng.random()),
            raw_payload="raw \x00 bytes preserved? " + str(rng.getrandbits(64)),
            category_hint=rng.choice([None, "crypto"]),
            location=rng.choice([None, _random_location(rng)]),
            severity_hint=rng.choice([None] + list(Severity)),
        )
        assert Warning.from_dict(warning.to_dict()) == warning


def test_findings_file_round_trip():
    rng = random.Random(7)
    findings = [_random_finding(rng) for _ in range(5)]
    assert load_findings(dump_findings(findings)) == findings


def test_findings_file_schema_version_tag():
    text = dump_findings([make_finding()])
    assert '"schema_version": "1"' in text


def test_load_findings_bad_json_reports_position():
    with pytest.raises(SchemaError) as err:
        load_findings("{ not json")
    assert err.value.line == 1


def test_unknown_category_token_rejected():
    doc = make_finding().to_dict()
    doc["category"] = "NON-API"
    with pytest.raises(SchemaError):
        StandardizedVulnerability.from_dict(doc)
