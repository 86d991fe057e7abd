"""The attribute value universe: tagged scalars and homogeneous lists.

Every comparison a policy can make is over these values. Tags are closed:
naturals, strings, booleans, enum atoms, entity references, and lists of a
single element tag. Values are immutable and hashable so they can live in
frozen AST nodes and serve as dict keys.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from .errors import SchemaViolationError


class Tag(str, Enum):
    NAT = "nat"
    STR = "str"
    BOOL = "bool"
    ENUM = "enum"
    REF = "ref"
    LIST = "list"


@dataclass(frozen=True)
class EnumDecl:
    """A named finite enumeration; member order is significant (it indexes
    membership proofs)."""

    name: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise SchemaViolationError(f"enum {self.name} has no members")
        if len(set(self.members)) != len(self.members):
            raise SchemaViolationError(f"enum {self.name} has duplicate members")

    def index_of(self, atom: str) -> int:
        return self.members.index(atom)


@dataclass(frozen=True)
class Value:
    """A runtime attribute value.

    payload by tag: NAT -> int, STR -> str, BOOL -> bool, ENUM -> atom name
    (with enum_name set), REF -> entity id, LIST -> tuple of element Values
    (with elem set to the shared element descriptor, or None when empty).
    """

    tag: Tag
    payload: Any
    enum_name: str | None = None
    elem: str | None = None

    def describe(self) -> str:
        if self.tag is Tag.ENUM:
            return f"{self.payload}"
        if self.tag is Tag.LIST:
            return "[" + ", ".join(v.describe() for v in self.payload) + "]"
        if self.tag is Tag.STR:
            return repr(self.payload)
        if self.tag is Tag.BOOL:
            return "true" if self.payload else "false"
        return str(self.payload)


def nat(n: int) -> Value:
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise SchemaViolationError(f"nat payload must be a non-negative int, got {n!r}")
    return Value(Tag.NAT, n)


def string(s: str) -> Value:
    return Value(Tag.STR, str(s))


def boolean(b: bool) -> Value:
    return Value(Tag.BOOL, bool(b))


def atom(enum_name: str, member: str) -> Value:
    return Value(Tag.ENUM, member, enum_name=enum_name)


def ref(entity_id: str) -> Value:
    return Value(Tag.REF, str(entity_id))


def elem_descriptor(v: Value) -> str:
    """Single-token description of a scalar's tag, used for list homogeneity."""
    if v.tag is Tag.LIST:
        raise SchemaViolationError("nested lists are not part of the value universe")
    if v.tag is Tag.ENUM:
        return f"enum:{v.enum_name}"
    return v.tag.value


def list_of(items: list[Value] | tuple[Value, ...], elem: str | None = None) -> Value:
    """Build a homogeneous list value. The stored element descriptor is always
    derived from the payload (None when empty) so equal payloads compare equal;
    a passed `elem` only asserts against the derived one."""
    items = tuple(items)
    descs = {elem_descriptor(v) for v in items}
    if len(descs) > 1:
        raise SchemaViolationError(f"list elements are not homogeneous: {sorted(descs)}")
    inferred = next(iter(descs)) if descs else None
    if elem is not None and inferred is not None and elem != inferred:
        raise SchemaViolationError(f"list declared {elem} but holds {inferred}")
    return Value(Tag.LIST, items, elem=inferred)


@dataclass(frozen=True)
class ValueType:
    """Static type of an attribute or expression, as declared in a schema."""

    tag: Tag
    enum_name: str | None = None
    ref_kind: str | None = None
    elem: "ValueType | None" = None

    def describe(self) -> str:
        if self.tag is Tag.ENUM:
            return self.enum_name or "enum"
        if self.tag is Tag.REF:
            return f"ref {self.ref_kind}" if self.ref_kind else "ref"
        if self.tag is Tag.LIST:
            return f"list {self.elem.describe()}" if self.elem else "list"
        return self.tag.value


NAT_T = ValueType(Tag.NAT)
STR_T = ValueType(Tag.STR)
BOOL_T = ValueType(Tag.BOOL)


def enum_t(name: str) -> ValueType:
    return ValueType(Tag.ENUM, enum_name=name)


def ref_t(kind: str | None = None) -> ValueType:
    return ValueType(Tag.REF, ref_kind=kind)


def list_t(elem: ValueType) -> ValueType:
    return ValueType(Tag.LIST, elem=elem)


def type_of_value(v: Value) -> ValueType:
    """Best static type recoverable from a runtime value alone (ref kinds
    need a store and stay unconstrained here)."""
    if v.tag is Tag.ENUM:
        return enum_t(v.enum_name or "")
    if v.tag is Tag.REF:
        return ref_t(None)
    if v.tag is Tag.LIST:
        if not v.payload:
            return ValueType(Tag.LIST, elem=None)
        return list_t(type_of_value(v.payload[0]))
    return ValueType(v.tag)


def types_compatible(a: ValueType, b: ValueType) -> bool:
    """Structural compatibility with wildcards: a ref without a kind matches
    any ref, a list without an element type matches any list."""
    if a.tag is not b.tag:
        return False
    if a.tag is Tag.ENUM:
        return a.enum_name == b.enum_name
    if a.tag is Tag.REF:
        return a.ref_kind is None or b.ref_kind is None or a.ref_kind == b.ref_kind
    if a.tag is Tag.LIST:
        if a.elem is None or b.elem is None:
            return True
        return types_compatible(a.elem, b.elem)
    return True


def value_to_wire(v: Value) -> dict:
    """Encode as the {tag, payload} wire object."""
    if v.tag is Tag.ENUM:
        return {"tag": "enum", "payload": {"enum": v.enum_name, "atom": v.payload}}
    if v.tag is Tag.LIST:
        return {
            "tag": "list",
            "payload": {"elem": v.elem, "items": [value_to_wire(x) for x in v.payload]},
        }
    return {"tag": v.tag.value, "payload": v.payload}


def value_from_wire(obj: Any) -> Value:
    """Decode and re-validate a wire value; raises SchemaViolationError on
    malformed input."""
    if not isinstance(obj, dict) or "tag" not in obj or "payload" not in obj:
        raise SchemaViolationError(f"malformed value object: {obj!r}")
    tag = obj["tag"]
    payload = obj["payload"]
    if tag == "nat":
        return nat(payload)
    if tag == "str":
        if not isinstance(payload, str):
            raise SchemaViolationError(f"str payload must be a string, got {payload!r}")
        return string(payload)
    if tag == "bool":
        if not isinstance(payload, bool):
            raise SchemaViolationError(f"bool payload must be a boolean, got {payload!r}")
        return boolean(payload)
    if tag == "enum":
        if (
            not isinstance(payload, dict)
            or not isinstance(payload.get("enum"), str)
            or not isinstance(payload.get("atom"), str)
        ):
            raise SchemaViolationError(f"malformed enum payload: {payload!r}")
        return atom(payload["enum"], payload["atom"])
    if tag == "ref":
        if not isinstance(payload, str):
            raise SchemaViolationError(f"ref payload must be an id string, got {payload!r}")
        return ref(payload)
    if tag == "list":
        if not isinstance(payload, dict) or not isinstance(payload.get("items"), list):
            raise SchemaViolationError(f"malformed list payload: {payload!r}")
        items = [value_from_wire(x) for x in payload["items"]]
        return list_of(items, elem=payload.get("elem"))
    raise SchemaViolationError(f"unknown value tag: {tag!r}")


def canonical_sort_key(v: Value) -> tuple:
    """Deterministic ordering for report output; not a semantic order."""
    if v.tag is Tag.LIST:
        return (v.tag.value, tuple(canonical_sort_key(x) for x in v.payload))
    return (v.tag.value, str(v.enum_name or ""), str(v.payload))
