"""Deterministic expression resolution against a store snapshot.

resolve_expr is pure: the same (expression, binding, store, claims) always
yields the identical value. Claim precedence applies to attribute leaves
only — a trusted claim for (subject, property) wins over the store, so
proofs built for remote verification never depend on verifier-invisible
local state. Builtin internals (the port -> network -> public walk) read the
store directly.
"""
from __future__ import annotations

from typing import Mapping, Protocol, Union

from .ast import Attr, AttrExpr, Builtin, CmpOp, Literal, Var
from .errors import MissingAttributeError, PolityError
from .model import Entity, EntityStore
from .values import Tag, Value, boolean, list_of, nat, ref


class TrustedValues(Protocol):
    """Anything that can answer: is there a trusted value for this
    (subject id, property)? Returns (value, claim content hash) or None.
    The claims module's ClaimBag satisfies this."""

    def trusted_value(self, subject: str, prop: str) -> tuple[Value, str] | None: ...


Binding = Mapping[str, Union[Entity, Value]]


def attribute_value(
    entity: Entity,
    attr: str,
    store: EntityStore,
    claims: TrustedValues | None = None,
) -> tuple[Value, str | None]:
    """Look up one attribute, claim-first. Returns (value, claim_ref) where
    claim_ref is the content hash of the winning claim, or None when the
    value came from the store."""
    if claims is not None:
        hit = claims.trusted_value(entity.id, attr)
        if hit is not None:
            value, claim_ref = hit
            return value, claim_ref
    value = entity.attributes.get(attr)
    if value is None:
        raise MissingAttributeError(entity.id, attr)
    return value, None


def resolve_expr(
    e: AttrExpr,
    env: Binding,
    store: EntityStore,
    claims: TrustedValues | None = None,
) -> Value:
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Var):
        bound = env[e.name]
        if isinstance(bound, Entity):
            return ref(bound.id)
        return bound
    if isinstance(e, Attr):
        bound = env[e.var]
        if not isinstance(bound, Entity):
            raise PolityError(f"variable {e.var} is not entity-valued")
        value, _ = attribute_value(bound, e.attr, store, claims)
        return value
    if isinstance(e, Builtin):
        args = [resolve_expr(a, env, store, claims) for a in e.args]
        return apply_builtin(e.name, args, store)
    raise TypeError(f"unknown expression node {e!r}")


def apply_builtin(name: str, args: list[Value], store: EntityStore) -> Value:
    if name == "length":
        (lst,) = args
        return nat(len(lst.payload))
    if name == "intersect":
        a, b = args
        return intersect(a, b)
    if name == "exposedPorts":
        (ports,) = args
        return exposed_ports(ports, store)
    raise PolityError(f"unknown builtin {name!r}")


def intersect(a: Value, b: Value) -> Value:
    """Elements of the first list also present in the second, keeping the
    first list's order and duplicates."""
    second = set(b.payload)
    kept = tuple(x for x in a.payload if x in second)
    return list_of(kept, elem=a.elem)


def exposed_ports(ports: Value, store: EntityStore) -> Value:
    """Sublist of port references whose network has public = true, in input
    order."""
    kept = []
    for port_ref in ports.payload:
        port = store.resolve(port_ref.payload)
        net_ref = port.attributes.get("network")
        if net_ref is None:
            raise MissingAttributeError(port.id, "network")
        network = store.resolve(net_ref.payload)
        public = network.attributes.get("public")
        if public is None:
            raise MissingAttributeError(network.id, "public")
        if public == boolean(True):
            kept.append(port_ref)
    return list_of(kept, elem=ports.elem)


def compare_values(op: CmpOp, lhs: Value, rhs: Value) -> bool:
    if op is CmpOp.EQ:
        return lhs == rhs
    if op is CmpOp.NEQ:
        return lhs != rhs
    if lhs.tag is not Tag.NAT or rhs.tag is not Tag.NAT:
        raise PolityError(f"ordering comparison on non-nat values: {op.value}")
    if op is CmpOp.LE:
        return lhs.payload <= rhs.payload
    if op is CmpOp.LT:
        return lhs.payload < rhs.payload
    if op is CmpOp.GE:
        return lhs.payload >= rhs.payload
    if op is CmpOp.GT:
        return lhs.payload > rhs.payload
    raise PolityError(f"unknown comparison {op!r}")
