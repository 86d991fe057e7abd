"""Entity schemas, entities, and the immutable entity store.

The store is the engine's snapshot of ground truth: every quantifier domain
and every attribute lookup during local evaluation comes from here. Stores
are immutable; updates return a new store (copy-on-write), so concurrent
decisions can safely share one snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import DanglingEntityRefError, SchemaViolationError
from .values import EnumDecl, Tag, Value, ValueType, types_compatible


@dataclass(frozen=True)
class EntitySchema:
    """Declares the attribute names and types for one entity kind."""

    kind: str
    attributes: Mapping[str, ValueType]

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))


@dataclass(frozen=True)
class Entity:
    """An identified subject of policy: a globally unique id URI, a kind,
    and attribute values. Identity is the id, never a display name."""

    id: str
    kind: str
    attributes: Mapping[str, Value]

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))

    @property
    def name(self) -> str:
        """Local handle: the last path segment of the id URI."""
        return self.id.rsplit(":", 1)[-1].rsplit("/", 1)[-1]


@dataclass(frozen=True)
class EntityStore:
    schemas: Mapping[str, EntitySchema]
    enums: Mapping[str, EnumDecl]
    entities: Mapping[str, Entity]

    def __post_init__(self) -> None:
        object.__setattr__(self, "schemas", MappingProxyType(dict(self.schemas)))
        object.__setattr__(self, "enums", MappingProxyType(dict(self.enums)))
        object.__setattr__(self, "entities", MappingProxyType(dict(self.entities)))

    @classmethod
    def build(
        cls,
        schemas: Iterable[EntitySchema],
        enums: Iterable[EnumDecl],
        entities: Iterable[Entity],
    ) -> "EntityStore":
        """Construct and validate: unique ids, schema conformance for every
        attribute, declared enum members, and referential integrity."""
        schema_map = {s.kind: s for s in schemas}
        enum_map = {e.name: e for e in enums}
        entity_map: dict[str, Entity] = {}
        for ent in entities:
            if ent.id in entity_map:
                raise SchemaViolationError(f"duplicate entity id {ent.id}")
            entity_map[ent.id] = ent
        store = cls(schema_map, enum_map, entity_map)
        for ent in entity_map.values():
            store._validate_entity(ent)
        return store

    def _validate_entity(self, ent: Entity) -> None:
        schema = self.schemas.get(ent.kind)
        if schema is None:
            raise SchemaViolationError(f"entity {ent.id} has undeclared kind {ent.kind}")
        for attr, value in ent.attributes.items():
            declared = schema.attributes.get(attr)
            if declared is None:
                raise SchemaViolationError(
                    f"entity {ent.id} carries undeclared attribute {attr!r}"
                )
            self.check_value(value, declared, context=f"{ent.id}.{attr}")

    def check_value(self, value: Value, declared: ValueType, context: str = "") -> None:
        """Assert a value conforms to a declared type, resolving ref kinds
        and enum membership against this store."""
        where = f" at {context}" if context else ""
        if value.tag is not declared.tag:
            raise SchemaViolationError(
                f"expected {declared.describe()}, got {value.tag.value}{where}"
            )
        if value.tag is Tag.ENUM:
            decl = self.enums.get(declared.enum_name or "")
            if declared.enum_name != value.enum_name:
                raise SchemaViolationError(
                    f"expected {declared.describe()}, got {value.enum_name}{where}"
                )
            if decl is None or value.payload not in decl.members:
                raise SchemaViolationError(
                    f"{value.payload!r} is not a member of enum {declared.enum_name}{where}"
                )
        elif value.tag is Tag.REF:
            target = self.entities.get(value.payload)
            if target is None:
                raise DanglingEntityRefError(value.payload)
            if declared.ref_kind is not None and target.kind != declared.ref_kind:
                raise SchemaViolationError(
                    f"reference {value.payload} has kind {target.kind}, "
                    f"expected {declared.ref_kind}{where}"
                )
        elif value.tag is Tag.LIST:
            for item in value.payload:
                if declared.elem is not None:
                    self.check_value(item, declared.elem, context)

    def resolve(self, entity_id: str) -> Entity:
        ent = self.entities.get(entity_id)
        if ent is None:
            raise DanglingEntityRefError(entity_id)
        return ent

    def entities_of_kind(self, kind: str) -> list[Entity]:
        """All entities of a kind in canonical (id-lexicographic) order; this
        is the enumeration order quantifier proofs commit to."""
        return sorted(
            (e for e in self.entities.values() if e.kind == kind), key=lambda e: e.id
        )

    def with_entity(self, ent: Entity) -> "EntityStore":
        """Copy-on-write update; the receiver is unchanged."""
        merged = dict(self.entities)
        merged[ent.id] = ent
        updated = EntityStore(self.schemas, self.enums, merged)
        updated._validate_entity(ent)
        return updated
