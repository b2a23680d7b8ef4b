"""Parser for the binary-encoded Android manifest (AXML chunk stream).

The format is a sequence of length-prefixed chunks: a string pool, an
optional resource-id map, then namespace/element events. Only the
subset needed for security triage is extracted: package identity, SDK
bounds, declared/used permissions, and the four component kinds with
their intent filters and export policy.

The parser is total over arbitrary bytes: any malformed input raises
one of the typed errors below, never an unhandled exception. Counts
and offsets read from the input are bounded against the enclosing
chunk before use so fuzzed length fields cannot trigger huge
allocations or unbounded loops.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..errors import MalformedChunk, StringPoolOutOfBounds, UnsupportedEncoding

RES_XML_TYPE = 0x0003
RES_STRING_POOL_TYPE = 0x0001
RES_XML_RESOURCE_MAP_TYPE = 0x0180
RES_XML_START_NAMESPACE_TYPE = 0x0100
RES_XML_END_NAMESPACE_TYPE = 0x0101
RES_XML_START_ELEMENT_TYPE = 0x0102
RES_XML_END_ELEMENT_TYPE = 0x0103
RES_XML_CDATA_TYPE = 0x0104

UTF8_FLAG = 1 << 8

TYPE_REFERENCE = 0x01
TYPE_STRING = 0x03
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12

ANDROID_NS = "http://schemas.android.com/apk/res/android"

# Attribute resource ids from the public android.R.attr space; used to
# recover attribute names when an obfuscator blanked the name string.
ATTR_RESOURCE_NAMES = {
    0x01010003: "name",
    0x01010006: "permission",
    0x01010010: "exported",
    0x01010027: "scheme",
    0x01010028: "host",
    0x0101020C: "minSdkVersion",
    0x01010270: "targetSdkVersion",
}

COMPONENT_KINDS = ("activity", "service", "receiver", "provider")


@dataclass(frozen=True)
class IntentFilter:
    actions: tuple[str, ...] = ()
    categories: tuple[str, ...] = ()
    data: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"actions": list(self.actions), "categories": list(self.categories),
                "data": list(self.data)}


@dataclass(frozen=True)
class Component:
    kind: str
    name: str
    exported: bool
    intent_filters: tuple[IntentFilter, ...] = ()
    required_permission: str | None = None
    resolved_by_default: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "exported": self.exported,
            "resolved_by_default": self.resolved_by_default,
            "intent_filters": [f.to_dict() for f in self.intent_filters],
            "required_permission": self.required_permission,
        }


@dataclass(frozen=True)
class ManifestModel:
    package_name: str
    components: tuple[Component, ...] = ()
    permissions_declared: tuple[str, ...] = ()
    permissions_used: tuple[str, ...] = ()
    min_sdk: int | None = None
    target_sdk: int | None = None

    def to_dict(self) -> dict:
        return {
            "package_name": self.package_name,
            "components": [c.to_dict() for c in self.components],
            "permissions_declared": list(self.permissions_declared),
            "permissions_used": list(self.permissions_used),
            "min_sdk": self.min_sdk,
            "target_sdk": self.target_sdk,
        }


def resolve_exported(attr_value: bool | None, has_intent_filter: bool) -> tuple[bool, bool]:
    """Export policy: explicit attribute wins; otherwise the pre-SDK-31
    default applies (exported iff the component declares an intent filter).

    Returns (exported, resolved_by_default).
    """
    if attr_value is not None:
        return attr_value, False
    return has_intent_filter, True


class _StringPool:
    def __init__(self, data: bytes, chunk_offset: int, header_size: int, chunk_size: int):
        body = data[chunk_offset:chunk_offset + chunk_size]
        if len(body) < 28:
            raise MalformedChunk("string pool chunk shorter than its fixed header")
        (string_count, style_count, flags, strings_start,
         styles_start) = struct.unpack_from("<IIIII", body, 8)
        self.utf8 = bool(flags & UTF8_FLAG)
        self.body = body
        # A pool cannot hold more offsets than fit between the header and
        # the string data; reject counts that imply reading outside it.
        max_offsets = max(0, (len(body) - header_size) // 4)
        if string_count > max_offsets:
            raise StringPoolOutOfBounds(
                f"string count {string_count} exceeds chunk capacity {max_offsets}")
        if strings_start > len(body):
            raise StringPoolOutOfBounds("string data offset beyond chunk end")
        self.strings_start = strings_start
        self.offsets = list(struct.unpack_from(f"<{string_count}I", body, header_size))
        self._cache: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self.offsets)

    def get(self, index: int) -> str:
        if index in self._cache:
            return self._cache[index]
        if index < 0 or index >= len(self.offsets):
            raise StringPoolOutOfBounds(f"string index {index} out of range")
        pos = self.strings_start + self.offsets[index]
        if pos < 0 or pos >= len(self.body):
            raise StringPoolOutOfBounds(f"string offset {pos} outside pool data")
        text = self._decode_utf8(pos) if self.utf8 else self._decode_utf16(pos)
        self._cache[index] = text
        return text

    def _decode_utf16(self, pos: int) -> str:
        body = self.body
        if pos + 2 > len(body):
            raise StringPoolOutOfBounds("truncated UTF-16 length prefix")
        length = struct.unpack_from("<H", body, pos)[0]
        pos += 2
        if length & 0x8000:
            if pos + 2 > len(body):
                raise StringPoolOutOfBounds("truncated extended UTF-16 length")
            length = ((length & 0x7FFF) << 16) | struct.unpack_from("<H", body, pos)[0]
            pos += 2
        end = pos + length * 2
        if end > len(body):
            raise StringPoolOutOfBounds("UTF-16 string runs past pool end")
        try:
            return body[pos:end].decode("utf-16-le")
        except UnicodeDecodeError as exc:
            raise UnsupportedEncoding(f"undecodable UTF-16 string: {exc.reason}") from exc

    def _decode_utf8(self, pos: int) -> str:
        body = self.body

        def varlen(p: int) -> tuple[int, int]:
            if p >= len(body):
                raise StringPoolOutOfBounds("truncated UTF-8 length prefix")
            v = body[p]
            p += 1
            if v & 0x80:
                if p >= len(body):
                    raise StringPoolOutOfBounds("truncated extended UTF-8 length")
                v = ((v & 0x7F) << 8) | body[p]
                p += 1
            return v, p

        _, pos = varlen(pos)          # character count, unused
        byte_len, pos = varlen(pos)
        end = pos + byte_len
        if end > len(body):
            raise StringPoolOutOfBounds("UTF-8 string runs past pool end")
        try:
            return body[pos:end].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnsupportedEncoding(f"undecodable UTF-8 string: {exc.reason}") from exc


@dataclass
class _Attr:
    ns: str
    name: str
    value: object


class _PendingComponent:
    def __init__(self, kind: str, attrs: list[_Attr]):
        self.kind = kind
        name = _android_attr(attrs, "name")
        self.name = str(name) if name is not None else ""
        self.exported_attr = _as_bool(_android_attr(attrs, "exported"))
        permission = _android_attr(attrs, "permission")
        self.permission = str(permission) if permission is not None else None
        self.filters: list[IntentFilter] = []


def _android_attr(attrs: list[_Attr], name: str):
    for a in attrs:
        if a.name == name and a.ns in (ANDROID_NS, ""):
            return a.value
    return None


def _as_bool(v) -> bool | None:
    if v is None:
        return None
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v != 0
    return str(v).strip().lower() == "true"


def _as_int(v) -> int | None:
    if v is None or isinstance(v, bool):
        return v if v is None else int(v)
    try:
        return int(str(v), 0)
    except ValueError:
        return None


def _qualify(name: str, package: str) -> str:
    if not name or not package:
        return name
    if name.startswith("."):
        return package + name
    if "." not in name:
        return f"{package}.{name}"
    return name


def parse_binary_manifest(data: bytes) -> ManifestModel:
    """Decode an AndroidManifest.xml chunk stream into a ManifestModel.

    Raises MalformedChunk, StringPoolOutOfBounds, or UnsupportedEncoding
    on ill-formed input; never anything else.
    """
    if len(data) < 8:
        raise MalformedChunk("input shorter than a chunk header")
    file_type, header_size, file_size = struct.unpack_from("<HHI", data, 0)
    if file_type != RES_XML_TYPE:
        raise MalformedChunk(f"expected XML chunk type 0x0003, got 0x{file_type:04x}")
    if header_size < 8 or header_size > len(data):
        raise MalformedChunk(f"bad file header size {header_size}")
    limit = min(file_size, len(data))

    pool: _StringPool | None = None
    resource_map: list[int] = []
    ns_uris: dict[str, str] = {}

    package = ""
    min_sdk: int | None = None
    target_sdk: int | None = None
    declared: list[str] = []
    used: list[str] = []
    components: list[Component] = []

    element_stack: list[str] = []
    component: _PendingComponent | None = None
    component_depth = 0
    filter_actions: list[str] = []
    filter_categories: list[str] = []
    filter_data: list[str] = []
    in_filter = False

    def pool_string(idx: int) -> str:
        if idx == 0xFFFFFFFF:
            return ""
        if pool is None:
            raise MalformedChunk("element chunk before string pool")
        return pool.get(idx)

    def attr_name(idx: int) -> str:
        name = pool_string(idx)
        if not name and idx < len(resource_map):
            name = ATTR_RESOURCE_NAMES.get(resource_map[idx], "")
        return name

    def typed_value(raw_idx: int, dtype: int, payload: int):
        if raw_idx != 0xFFFFFFFF:
            return pool_string(raw_idx)
        if dtype == TYPE_INT_BOOLEAN:
            return payload != 0
        if dtype in (TYPE_INT_DEC, TYPE_INT_HEX):
            # reinterpret as signed 32-bit, matching resource semantics
            return payload - 0x100000000 if payload >= 0x80000000 else payload
        if dtype == TYPE_STRING:
            return pool_string(payload)
        if dtype == TYPE_REFERENCE:
            return f"@0x{payload:08x}"
        return payload

    def finish_component():
        nonlocal component
        if component is None:
            return
        exported, by_default = resolve_exported(component.exported_attr,
                                                bool(component.filters))
        components.append(Component(
            kind=component.kind,
            name=_qualify(component.name, package),
            exported=exported,
            intent_filters=tuple(component.filters),
            required_permission=component.permission,
            resolved_by_default=by_default,
        ))
        component = None

    pos = header_size
    while pos + 8 <= limit:
        try:
            chunk_type, chunk_header, chunk_size = struct.unpack_from("<HHI", data, pos)
        except struct.error as exc:  # pragma: no cover - guarded by loop bound
            raise MalformedChunk(f"truncated chunk header at {pos}") from exc
        if chunk_size < 8 or pos + chunk_size > limit:
            raise MalformedChunk(
                f"chunk at {pos} declares size {chunk_size} beyond input")
        if chunk_header < 8 or chunk_header > chunk_size:
            raise MalformedChunk(f"chunk at {pos} has bad header size {chunk_header}")
        body_at = pos + chunk_header

        if chunk_type == RES_STRING_POOL_TYPE:
            pool = _StringPool(data, pos, chunk_header, chunk_size)

        elif chunk_type == RES_XML_RESOURCE_MAP_TYPE:
            count = (chunk_size - chunk_header) // 4
            resource_map = list(struct.unpack_from(f"<{count}I", data, body_at))

        elif chunk_type == RES_XML_START_NAMESPACE_TYPE:
            # node header carries lineNumber+comment; body is prefix, uri
            if chunk_size - chunk_header < 8:
                raise MalformedChunk("namespace chunk too small")
            prefix_idx, uri_idx = struct.unpack_from("<II", data, body_at)
            ns_uris[pool_string(prefix_idx)] = pool_string(uri_idx)

        elif chunk_type == RES_XML_END_NAMESPACE_TYPE:
            pass

        elif chunk_type == RES_XML_START_ELEMENT_TYPE:
            if chunk_size - chunk_header < 20:
                raise MalformedChunk("start-element chunk too small")
            (ns_idx, name_idx, attr_start, attr_size,
             attr_count, _, _, _) = struct.unpack_from("<IIHHHHHH", data, body_at)
            if attr_size < 20:
                raise MalformedChunk(f"attribute record size {attr_size} too small")
            attrs_at = body_at + attr_start
            if attrs_at + attr_count * attr_size > pos + chunk_size:
                raise MalformedChunk("attributes run past element chunk")
            tag = pool_string(name_idx)
            attrs: list[_Attr] = []
            for i in range(attr_count):
                a = attrs_at + i * attr_size
                a_ns, a_name, a_raw, _a_tv_size, a_dtype, a_data = struct.unpack_from(
                    "<IIIHxBI", data, a)
                attrs.append(_Attr(
                    ns=pool_string(a_ns),
                    name=attr_name(a_name),
                    value=typed_value(a_raw, a_dtype, a_data),
                ))
            element_stack.append(tag)

            if tag == "manifest":
                pkg = next((a.value for a in attrs if a.name == "package"), "")
                package = str(pkg) if pkg is not None else ""
            elif tag == "uses-sdk":
                min_sdk = _as_int(_android_attr(attrs, "minSdkVersion")) or min_sdk
                target_sdk = _as_int(_android_attr(attrs, "targetSdkVersion")) or target_sdk
            elif tag == "permission":
                v = _android_attr(attrs, "name")
                if v:
                    declared.append(str(v))
            elif tag == "uses-permission":
                v = _android_attr(attrs, "name")
                if v:
                    used.append(str(v))
            elif tag in COMPONENT_KINDS and component is None:
                component = _PendingComponent(tag, attrs)
                component_depth = len(element_stack)
            elif tag == "intent-filter" and component is not None:
                in_filter = True
                filter_actions, filter_categories, filter_data = [], [], []
            elif in_filter and tag == "action":
                v = _android_attr(attrs, "name")
                if v:
                    filter_actions.append(str(v))
            elif in_filter and tag == "category":
                v = _android_attr(attrs, "name")
                if v:
                    filter_categories.append(str(v))
            elif in_filter and tag == "data":
                parts = [f"{a.name}={a.value}" for a in attrs
                         if a.name and a.value not in (None, "")]
                if parts:
                    filter_data.append(";".join(sorted(parts)))

        elif chunk_type == RES_XML_END_ELEMENT_TYPE:
            if chunk_size - chunk_header < 8:
                raise MalformedChunk("end-element chunk too small")
            if element_stack:
                tag = element_stack.pop()
                if in_filter and tag == "intent-filter" and component is not None:
                    component.filters.append(IntentFilter(
                        tuple(filter_actions), tuple(filter_categories),
                        tuple(filter_data)))
                    in_filter = False
                elif component is not None and len(element_stack) < component_depth:
                    finish_component()

        elif chunk_type == RES_XML_CDATA_TYPE:
            pass

        else:
            raise MalformedChunk(f"unknown chunk type 0x{chunk_type:04x} at {pos}")

        pos += chunk_size

    finish_component()
    return ManifestModel(
        package_name=package,
        components=tuple(components),
        permissions_declared=tuple(declared),
        permissions_used=tuple(used),
        min_sdk=min_sdk,
        target_sdk=target_sdk,
    )
