"""Policy AST: attribute expressions, propositions, rules, and bundles.

A policy holds iff some rule's body holds, so a policy is a disjunction over
its rules. Rule bodies are closed under the policy parameters plus any
quantifier binders. PolicyRef nodes are surface syntax only: the typechecker
inlines them (macro expansion) and rejects recursion, so evaluation never
sees one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from .values import Value

# Builtin function registry is closed; the typechecker rejects anything else.
BUILTINS = ("length", "exposedPorts", "intersect")


class CmpOp(str, Enum):
    EQ = "=="
    NEQ = "!="
    LE = "<="
    LT = "<"
    GE = ">="
    GT = ">"

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "CmpOp":
        return cls[name.upper()]


# --- attribute expressions -------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Value
    # Entity-ref literals keep the referent's kind from name resolution so
    # the typechecker stays precise without consulting a store.
    ref_kind: str | None = None


@dataclass(frozen=True)
class Attr:
    var: str
    attr: str


@dataclass(frozen=True)
class Builtin:
    name: str
    args: tuple["AttrExpr", ...]


@dataclass(frozen=True)
class Var:
    name: str


AttrExpr = Union[Literal, Attr, Builtin, Var]


# --- propositions ------------------------------------------------------------


@dataclass(frozen=True)
class Cmp:
    lhs: AttrExpr
    op: CmpOp
    rhs: AttrExpr


@dataclass(frozen=True)
class Member:
    elem: AttrExpr
    set: AttrExpr


@dataclass(frozen=True)
class EmptyIntersect:
    a: AttrExpr
    b: AttrExpr


@dataclass(frozen=True)
class And:
    p: "Proposition"
    q: "Proposition"


@dataclass(frozen=True)
class Or:
    p: "Proposition"
    q: "Proposition"


@dataclass(frozen=True)
class Not:
    p: "Proposition"


@dataclass(frozen=True)
class Exists:
    var: str
    domain: str
    body: "Proposition"


@dataclass(frozen=True)
class Forall:
    var: str
    domain: str
    body: "Proposition"


@dataclass(frozen=True)
class PolicyRef:
    """Reference to another policy by name; eliminated at typecheck."""

    name: str
    args: tuple[AttrExpr, ...]


Proposition = Union[Cmp, Member, EmptyIntersect, And, Or, Not, Exists, Forall, PolicyRef]


# --- rules, policies, bundles -----------------------------------------------


@dataclass(frozen=True)
class PolicyRule:
    name: str
    body: Proposition


@dataclass(frozen=True)
class Policy:
    name: str
    params: tuple[tuple[str, str], ...]  # (identifier, kind)
    rules: tuple[PolicyRule, ...]


@dataclass(frozen=True)
class Bundle:
    """Everything one source set declares. Entity attribute names, enum
    declarations, named constants, and policies, fully name-resolved."""

    enums: tuple
    schemas: tuple
    entities: tuple
    policies: tuple[Policy, ...]
    consts: tuple[tuple[str, Value], ...] = ()

    def enum(self, name: str):
        for e in self.enums:
            if e.name == name:
                return e
        return None

    def policy(self, name: str) -> Policy | None:
        for p in self.policies:
            if p.name == name:
                return p
        return None

    def const(self, name: str) -> Value | None:
        for n, v in self.consts:
            if n == name:
                return v
        return None

    def entity_by_name(self, name: str):
        for e in self.entities:
            if e.name == name:
                return e
        return None


def free_vars(p: Proposition) -> set[str]:
    """Exact set of unbound variables in a proposition."""

    def expr_vars(e: AttrExpr) -> set[str]:
        if isinstance(e, Literal):
            return set()
        if isinstance(e, Var):
            return {e.name}
        if isinstance(e, Attr):
            return {e.var}
        if isinstance(e, Builtin):
            out: set[str] = set()
            for a in e.args:
                out |= expr_vars(a)
            return out
        raise TypeError(f"unknown expression node {e!r}")

    if isinstance(p, Cmp):
        return expr_vars(p.lhs) | expr_vars(p.rhs)
    if isinstance(p, Member):
        return expr_vars(p.elem) | expr_vars(p.set)
    if isinstance(p, EmptyIntersect):
        return expr_vars(p.a) | expr_vars(p.b)
    if isinstance(p, (And, Or)):
        return free_vars(p.p) | free_vars(p.q)
    if isinstance(p, Not):
        return free_vars(p.p)
    if isinstance(p, (Exists, Forall)):
        return free_vars(p.body) - {p.var}
    if isinstance(p, PolicyRef):
        out: set[str] = set()
        for a in p.args:
            out |= expr_vars(a)
        return out
    raise TypeError(f"unknown proposition node {p!r}")


def proposition_size(p: Proposition) -> int:
    """Node count over the proposition and its expressions; the evaluation
    step budget scales with this."""

    def expr_size(e: AttrExpr) -> int:
        if isinstance(e, Builtin):
            return 1 + sum(expr_size(a) for a in e.args)
        return 1

    if isinstance(p, Cmp):
        return 1 + expr_size(p.lhs) + expr_size(p.rhs)
    if isinstance(p, Member):
        return 1 + expr_size(p.elem) + expr_size(p.set)
    if isinstance(p, EmptyIntersect):
        return 1 + expr_size(p.a) + expr_size(p.b)
    if isinstance(p, (And, Or)):
        return 1 + proposition_size(p.p) + proposition_size(p.q)
    if isinstance(p, Not):
        return 1 + proposition_size(p.p)
    if isinstance(p, (Exists, Forall)):
        return 1 + proposition_size(p.body)
    if isinstance(p, PolicyRef):
        return 1 + sum(1 for _ in p.args)
    raise TypeError(f"unknown proposition node {p!r}")


def quantifier_depth(p: Proposition) -> int:
    if isinstance(p, (And, Or)):
        return max(quantifier_depth(p.p), quantifier_depth(p.q))
    if isinstance(p, Not):
        return quantifier_depth(p.p)
    if isinstance(p, (Exists, Forall)):
        return 1 + quantifier_depth(p.body)
    return 0
