"""Binary manifest parser: differential fixtures, export rule, fuzz totality."""

from __future__ import annotations

import random
import struct

import pytest

from droidvet.apk.axml import parse_binary_manifest, resolve_exported
from droidvet.errors import (DroidvetError, MalformedChunk, StringPoolOutOfBounds,
                             UnsupportedEncoding)

from axml_builder import build_manifest, expected_model
from manifest_fixtures import EXPORT_RESOLUTION_CASES, MANIFEST_FIXTURES

PARSE_ERRORS = (MalformedChunk, StringPoolOutOfBounds, UnsupportedEncoding)


@pytest.mark.parametrize("spec", MANIFEST_FIXTURES,
                         ids=[s["package"] for s in MANIFEST_FIXTURES])
def test_differential_against_declared_fixture(spec):
    model = parse_binary_manifest(build_manifest(spec))
    assert model.to_dict() == expected_model(spec)


def test_component_with_filter_and_no_exported_attr_defaults_true():
    spec = {"package": "com.x",
            "components": [{"kind": "activity", "name": ".A", "exported": None,
                            "intent_filters": [{"actions": ["a.b.C"]}]}]}
    model = parse_binary_manifest(build_manifest(spec))
    comp = model.components[0]
    assert comp.exported is True
    assert comp.resolved_by_default is True


def test_manifest_with_zero_components():
    model = parse_binary_manifest(build_manifest({"package": "com.none"}))
    assert model.components == ()
    assert model.package_name == "com.none"


def test_fixture_app_counts():
    spec = {
        "package": "com.counts",
        "permissions_declared": ["com.counts.ONE", "com.counts.TWO"],
        "components": [
            {"kind": "activity", "name": ".A", "exported": True},
            {"kind": "receiver", "name": ".R", "exported": False},
        ],
    }
    model = parse_binary_manifest(build_manifest(spec))
    assert [c.kind for c in model.components] == ["activity", "receiver"]
    assert len(model.permissions_declared) == 2
    assert model.to_dict() == expected_model(spec)


@pytest.mark.parametrize("kind,explicit,has_filter,want,by_default",
                         EXPORT_RESOLUTION_CASES)
def test_export_resolution_table(kind, explicit, has_filter, want, by_default):
    assert resolve_exported(explicit, has_filter) == (want, by_default)
    comp_spec = {"kind": kind, "name": ".C", "exported": explicit}
    if has_filter:
        comp_spec["intent_filters"] = [{"actions": ["x.y.Z"]}]
    model = parse_binary_manifest(build_manifest(
        {"package": "com.table", "components": [comp_spec]}))
    assert model.components[0].exported is want
    assert model.components[0].resolved_by_default is by_default


def test_not_an_xml_chunk():
    with pytest.raises(MalformedChunk):
        parse_binary_manifest(b"\x00\x00\x00\x00\x00\x00\x00\x00")
    with pytest.raises(MalformedChunk):
        parse_binary_manifest(b"")


def test_unknown_chunk_type_is_typed_error():
    base = build_manifest({"package": "com.x"})
    # append a bogus chunk inside the declared file size
    bogus = struct.pack("<HHI", 0x0777, 8, 8)
    raised = base[:8] + bogus + base[8:]
    patched = struct.pack("<HHI", 0x0003, 8, len(raised)) + raised[8:]
    with pytest.raises(MalformedChunk):
        parse_binary_manifest(patched)


def test_string_pool_bounds_checked():
    blob = bytearray(build_manifest({"package": "com.x"}))
    # inflate the declared string count far past the pool capacity
    struct.pack_into("<I", blob, 8 + 8, 0xFFFF)
    with pytest.raises((StringPoolOutOfBounds, MalformedChunk)):
        parse_binary_manifest(bytes(blob))


def _mutate(valid: bytes, rng: random.Random) -> bytes:
    blob = bytearray(valid)
    for _ in range(rng.randint(1, 8)):
        op = rng.randrange(3)
        if op == 0 and blob:
            blob[rng.randrange(len(blob))] = rng.randrange(256)
        elif op == 1 and len(blob) > 8:
            at = rng.randrange(len(blob))
            del blob[at:at + rng.randint(1, 32)]
        else:
            at = rng.randrange(len(blob) + 1)
            blob[at:at] = bytes(rng.randrange(256) for _ in range(rng.randint(1, 8)))
    return bytes(blob)


def run_manifest_fuzz(iterations: int, seed: int = 0xA2) -> int:
    """Mutate valid manifests; parsing must yield a model or a typed error."""
    rng = random.Random(seed)
    corpus = [build_manifest(spec) for spec in MANIFEST_FIXTURES]
    crashes = 0
    for i in range(iterations):
        data = _mutate(corpus[i % len(corpus)], rng)
        try:
            parse_binary_manifest(data)
        except PARSE_ERRORS:
            pass
        except Exception:
            crashes += 1
            raise
    return crashes


def test_fuzz_totality_smoke():
    assert run_manifest_fuzz(20_000) == 0


@pytest.mark.nightly
def test_fuzz_totality_nightly_million():
    assert run_manifest_fuzz(1_000_000) == 0


def test_parse_errors_are_droidvet_errors():
    for exc in PARSE_ERRORS:
        assert issubclass(exc, DroidvetError)
