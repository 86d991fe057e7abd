"""Static checking of policies: name/type discipline and policy inlining.

Rejects ill-formed propositions before evaluation ever runs: unknown
attributes, tag mismatches, unbound variables, non-finite quantifier
domains, and unknown builtins. Policy-to-policy references are expanded
here (a referenced policy becomes the disjunction of its rule bodies);
recursion among policies is rejected so evaluation always terminates.

A TypedPolicy's rule bodies are fully inlined and reference-free, which is
what the evaluator and the proof verifier both consume — both sides of the
trust boundary typecheck the same bundle and agree on the expanded shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .ast import (
    And,
    Attr,
    AttrExpr,
    Builtin,
    BUILTINS,
    Cmp,
    CmpOp,
    EmptyIntersect,
    Exists,
    Forall,
    Literal,
    Member,
    Not,
    Or,
    Policy,
    PolicyRef,
    Proposition,
    Var,
)
from .errors import PolityError
from .model import EntitySchema
from .values import (
    EnumDecl,
    NAT_T,
    Tag,
    ValueType,
    enum_t,
    ref_t,
    type_of_value,
    types_compatible,
)

# Domain names that are syntactically valid but not finitely enumerable.
_INFINITE_DOMAINS = {"nat", "str", "bool", "int", "string"}


@dataclass(frozen=True)
class TypeIssue:
    kind: str
    policy: str
    rule: str
    path: str
    message: str
    expected: str | None = None
    found: str | None = None

    def render(self) -> str:
        loc = f"{self.policy}/{self.rule}" if self.rule else self.policy
        detail = self.message
        if self.expected is not None or self.found is not None:
            detail += f" (expected {self.expected}, found {self.found})"
        return f"{self.kind} at {loc}:{self.path}: {detail}"


class TypecheckError(PolityError):
    def __init__(self, issues: list[TypeIssue]):
        super().__init__(
            "; ".join(i.render() for i in issues[:5])
            + (f" (+{len(issues) - 5} more)" if len(issues) > 5 else "")
        )
        self.issues = issues


@dataclass(frozen=True)
class TypedRule:
    name: str
    body: Proposition  # inlined; contains no PolicyRef nodes


@dataclass(frozen=True)
class TypedPolicy:
    name: str
    params: tuple[tuple[str, str], ...]
    rules: tuple[TypedRule, ...]

    def rule(self, name: str) -> TypedRule | None:
        for r in self.rules:
            if r.name == name:
                return r
        return None

    def proposition(self) -> Proposition:
        """The policy as one proposition: the disjunction of its rules."""
        return _or_fold([r.body for r in self.rules])


def _or_fold(bodies: list[Proposition]) -> Proposition:
    if not bodies:
        raise PolityError("policy has no rules")
    out = bodies[-1]
    for body in reversed(bodies[:-1]):
        out = Or(body, out)
    return out


# --- inlining ----------------------------------------------------------------


def _subst_expr(e: AttrExpr, mapping: Mapping[str, str]) -> AttrExpr:
    if isinstance(e, Var):
        return Var(mapping.get(e.name, e.name))
    if isinstance(e, Attr):
        return Attr(mapping.get(e.var, e.var), e.attr)
    if isinstance(e, Builtin):
        return Builtin(e.name, tuple(_subst_expr(a, mapping) for a in e.args))
    return e


def _subst(p: Proposition, mapping: Mapping[str, str], taken: set[str]) -> Proposition:
    """Capture-avoiding variable substitution; binders colliding with the
    substitution image are renamed deterministically."""
    if isinstance(p, Cmp):
        return Cmp(_subst_expr(p.lhs, mapping), p.op, _subst_expr(p.rhs, mapping))
    if isinstance(p, Member):
        return Member(_subst_expr(p.elem, mapping), _subst_expr(p.set, mapping))
    if isinstance(p, EmptyIntersect):
        return EmptyIntersect(_subst_expr(p.a, mapping), _subst_expr(p.b, mapping))
    if isinstance(p, And):
        return And(_subst(p.p, mapping, taken), _subst(p.q, mapping, taken))
    if isinstance(p, Or):
        return Or(_subst(p.p, mapping, taken), _subst(p.q, mapping, taken))
    if isinstance(p, Not):
        return Not(_subst(p.p, mapping, taken))
    if isinstance(p, (Exists, Forall)):
        var = p.var
        inner = dict(mapping)
        if var in taken or var in mapping.values():
            fresh = var
            n = 2
            while fresh in taken or fresh in mapping.values():
                fresh = f"{var}_{n}"
                n += 1
            inner[var] = fresh
            var = fresh
        else:
            inner.pop(var, None)
        body = _subst(p.body, inner, taken | {var})
        cls = Exists if isinstance(p, Exists) else Forall
        return cls(var, p.domain, body)
    if isinstance(p, PolicyRef):
        return PolicyRef(p.name, tuple(_subst_expr(a, mapping) for a in p.args))
    raise TypeError(f"unknown proposition node {p!r}")


class _Checker:
    def __init__(
        self,
        schemas: Mapping[str, EntitySchema],
        enums: Mapping[str, EnumDecl],
        policies: Mapping[str, Policy],
    ):
        self.schemas = schemas
        self.enums = enums
        self.policies = policies
        self.issues: list[TypeIssue] = []

    # -- issue helpers

    def _issue(self, kind: str, policy: str, rule: str, path: str, message: str,
               expected: str | None = None, found: str | None = None) -> None:
        self.issues.append(TypeIssue(kind, policy, rule, path, message, expected, found))

    # -- inlining

    def inline(
        self,
        p: Proposition,
        scope: dict[str, tuple[str, str]],
        stack: tuple[str, ...],
        policy: str,
        rule: str,
        path: str,
    ) -> Proposition:
        if isinstance(p, (Cmp, Member, EmptyIntersect)):
            return p
        if isinstance(p, And):
            return And(
                self.inline(p.p, scope, stack, policy, rule, path + ".left"),
                self.inline(p.q, scope, stack, policy, rule, path + ".right"),
            )
        if isinstance(p, Or):
            return Or(
                self.inline(p.p, scope, stack, policy, rule, path + ".left"),
                self.inline(p.q, scope, stack, policy, rule, path + ".right"),
            )
        if isinstance(p, Not):
            return Not(self.inline(p.p, scope, stack, policy, rule, path + ".sub"))
        if isinstance(p, (Exists, Forall)):
            inner = dict(scope)
            inner[p.var] = self._domain_binding(p.domain)
            body = self.inline(p.body, inner, stack, policy, rule, path + ".body")
            cls = Exists if isinstance(p, Exists) else Forall
            return cls(p.var, p.domain, body)
        if isinstance(p, PolicyRef):
            return self._expand_ref(p, scope, stack, policy, rule, path)
        raise TypeError(f"unknown proposition node {p!r}")

    def _domain_binding(self, domain: str) -> tuple[str, str]:
        if domain in self.schemas:
            return ("kind", domain)
        if domain in self.enums:
            return ("enum", domain)
        return ("unknown", domain)

    def _expand_ref(
        self,
        p: PolicyRef,
        scope: dict[str, tuple[str, str]],
        stack: tuple[str, ...],
        policy: str,
        rule: str,
        path: str,
    ) -> Proposition:
        trivially_false = Cmp(_lit_nat(0), CmpOp.EQ, _lit_nat(1))
        target = self.policies.get(p.name)
        if target is None:
            self._issue("UnknownPolicy", policy, rule, path,
                        f"reference to undeclared policy {p.name!r}")
            return trivially_false
        if p.name in stack:
            self._issue("RecursivePolicy", policy, rule, path,
                        f"recursive policy reference {' -> '.join(stack + (p.name,))}")
            return trivially_false
        if len(p.args) != len(target.params):
            self._issue("ArityMismatch", policy, rule, path,
                        f"{p.name} takes {len(target.params)} arguments, got {len(p.args)}")
            return trivially_false
        mapping: dict[str, str] = {}
        ok = True
        for (param, kind), arg in zip(target.params, p.args):
            if not isinstance(arg, Var):
                self._issue("PolicyRefArg", policy, rule, path,
                            f"argument to {p.name} must be a variable")
                ok = False
                continue
            binding = scope.get(arg.name)
            if binding is None:
                self._issue("UnboundVariable", policy, rule, path,
                            f"unbound variable {arg.name!r} in reference to {p.name}")
                ok = False
                continue
            if binding != ("kind", kind):
                self._issue("KindMismatch", policy, rule, path,
                            f"argument {arg.name!r} to {p.name}",
                            expected=kind, found=binding[1])
                ok = False
                continue
            mapping[param] = arg.name
        if not ok:
            return trivially_false
        body = _or_fold([r.body for r in target.rules])
        taken = set(scope) | set(mapping.values())
        body = _subst(body, mapping, taken)
        return self.inline(body, scope, stack + (p.name,), policy, rule, path)

    # -- expression typing

    def type_expr(
        self,
        e: AttrExpr,
        scope: dict[str, tuple[str, str]],
        policy: str,
        rule: str,
        path: str,
    ) -> ValueType | None:
        if isinstance(e, Literal):
            t = type_of_value(e.value)
            if t.tag is Tag.REF and e.ref_kind:
                return ref_t(e.ref_kind)
            return t
        if isinstance(e, Var):
            binding = scope.get(e.name)
            if binding is None:
                self._issue("UnboundVariable", policy, rule, path,
                            f"unbound variable {e.name!r}")
                return None
            domain_kind, name = binding
            if domain_kind == "kind":
                return ref_t(name)
            if domain_kind == "enum":
                return enum_t(name)
            return None
        if isinstance(e, Attr):
            binding = scope.get(e.var)
            if binding is None:
                self._issue("UnboundVariable", policy, rule, path,
                            f"unbound variable {e.var!r}")
                return None
            domain_kind, name = binding
            if domain_kind != "kind":
                self._issue("UnknownAttribute", policy, rule, path,
                            f"{e.var!r} is not entity-valued; cannot project {e.attr!r}")
                return None
            schema = self.schemas.get(name)
            if schema is None or e.attr not in schema.attributes:
                self._issue("UnknownAttribute", policy, rule, path,
                            f"kind {name} has no attribute {e.attr!r}")
                return None
            return schema.attributes[e.attr]
        if isinstance(e, Builtin):
            return self._type_builtin(e, scope, policy, rule, path)
        raise TypeError(f"unknown expression node {e!r}")

    def _type_builtin(self, e, scope, policy, rule, path) -> ValueType | None:
        if e.name not in BUILTINS:
            self._issue("UnknownBuiltin", policy, rule, path,
                        f"builtin {e.name!r} is not in the registry")
            return None
        arg_types = [
            self.type_expr(a, scope, policy, rule, f"{path}.args[{i}]")
            for i, a in enumerate(e.args)
        ]
        if any(t is None for t in arg_types):
            return None
        if e.name == "length":
            if len(arg_types) != 1 or arg_types[0].tag is not Tag.LIST:
                self._issue("TagMismatch", policy, rule, path,
                            "length expects one list argument",
                            expected="list", found=_show(arg_types))
                return None
            return NAT_T
        if e.name == "intersect":
            if len(arg_types) != 2 or any(t.tag is not Tag.LIST for t in arg_types):
                self._issue("TagMismatch", policy, rule, path,
                            "intersect expects two list arguments",
                            expected="list, list", found=_show(arg_types))
                return None
            a, b = arg_types
            if not types_compatible(a, b):
                self._issue("TagMismatch", policy, rule, path,
                            "intersect arguments have different element types",
                            expected=a.describe(), found=b.describe())
                return None
            return a if a.elem is not None else b
        if e.name == "exposedPorts":
            if len(arg_types) != 1 or arg_types[0].tag is not Tag.LIST:
                self._issue("TagMismatch", policy, rule, path,
                            "exposedPorts expects one list argument",
                            expected="list ref", found=_show(arg_types))
                return None
            t = arg_types[0]
            if t.elem is not None:
                if t.elem.tag is not Tag.REF:
                    self._issue("TagMismatch", policy, rule, path,
                                "exposedPorts expects a list of entity references",
                                expected="list ref", found=t.describe())
                    return None
                if t.elem.ref_kind is not None:
                    self._check_port_shape(t.elem.ref_kind, policy, rule, path)
            return t
        raise PolityError(f"unhandled builtin {e.name!r}")

    def _check_port_shape(self, kind: str, policy: str, rule: str, path: str) -> None:
        """exposedPorts needs kind.network -> ref k2 and k2.public -> bool."""
        schema = self.schemas.get(kind)
        net = schema.attributes.get("network") if schema else None
        if net is None or net.tag is not Tag.REF:
            self._issue("UnknownAttribute", policy, rule, path,
                        f"kind {kind} lacks a 'network' reference attribute "
                        "required by exposedPorts")
            return
        if net.ref_kind is not None:
            net_schema = self.schemas.get(net.ref_kind)
            public = net_schema.attributes.get("public") if net_schema else None
            if public is None or public.tag is not Tag.BOOL:
                self._issue("UnknownAttribute", policy, rule, path,
                            f"kind {net.ref_kind} lacks a boolean 'public' attribute "
                            "required by exposedPorts")

    # -- proposition checking (over inlined bodies)

    def check_prop(
        self,
        p: Proposition,
        scope: dict[str, tuple[str, str]],
        policy: str,
        rule: str,
        path: str,
    ) -> None:
        if isinstance(p, Cmp):
            lt = self.type_expr(p.lhs, scope, policy, rule, path + ".lhs")
            rt = self.type_expr(p.rhs, scope, policy, rule, path + ".rhs")
            if lt is None or rt is None:
                return
            if not types_compatible(lt, rt):
                self._issue("TagMismatch", policy, rule, path + ".rhs",
                            f"comparison {p.op.value} operands disagree",
                            expected=lt.describe(), found=rt.describe())
                return
            if p.op not in (CmpOp.EQ, CmpOp.NEQ):
                for side, t in (("lhs", lt), ("rhs", rt)):
                    if t.tag is not Tag.NAT:
                        self._issue("TagMismatch", policy, rule, f"{path}.{side}",
                                    f"ordering {p.op.value} applies to nat only",
                                    expected="nat", found=t.describe())
            return
        if isinstance(p, Member):
            et = self.type_expr(p.elem, scope, policy, rule, path + ".elem")
            st = self.type_expr(p.set, scope, policy, rule, path + ".set")
            if et is None or st is None:
                return
            if st.tag is not Tag.LIST:
                self._issue("TagMismatch", policy, rule, path + ".set",
                            "membership requires a list on the right",
                            expected="list", found=st.describe())
                return
            if st.elem is not None and not types_compatible(et, st.elem):
                self._issue("TagMismatch", policy, rule, path + ".elem",
                            "membership element type differs from the list's",
                            expected=st.elem.describe(), found=et.describe())
            return
        if isinstance(p, EmptyIntersect):
            at = self.type_expr(p.a, scope, policy, rule, path + ".a")
            bt = self.type_expr(p.b, scope, policy, rule, path + ".b")
            if at is None or bt is None:
                return
            for side, t in (("a", at), ("b", bt)):
                if t.tag is not Tag.LIST:
                    self._issue("TagMismatch", policy, rule, f"{path}.{side}",
                                "empty-intersection requires lists",
                                expected="list", found=t.describe())
                    return
            if not types_compatible(at, bt):
                self._issue("TagMismatch", policy, rule, path + ".b",
                            "empty-intersection element types disagree",
                            expected=at.describe(), found=bt.describe())
            return
        if isinstance(p, And) or isinstance(p, Or):
            self.check_prop(p.p, scope, policy, rule, path + ".left")
            self.check_prop(p.q, scope, policy, rule, path + ".right")
            return
        if isinstance(p, Not):
            self.check_prop(p.p, scope, policy, rule, path + ".sub")
            return
        if isinstance(p, (Exists, Forall)):
            binding = self._domain_binding(p.domain)
            if binding[0] == "unknown":
                detail = (
                    f"domain {p.domain!r} is not finitely enumerable"
                    if p.domain in _INFINITE_DOMAINS
                    else f"domain {p.domain!r} is neither a kind nor an enum"
                )
                self._issue("NonFiniteDomain", policy, rule, path, detail)
                return
            inner = dict(scope)
            inner[p.var] = binding
            self.check_prop(p.body, inner, policy, rule, path + ".body")
            return
        raise TypeError(f"proposition not inlined before checking: {p!r}")


def _lit_nat(n: int):
    from .values import nat as mk_nat

    return Literal(mk_nat(n))


def _show(types: list[ValueType | None]) -> str:
    return ", ".join(t.describe() if t else "?" for t in types)


def check_policy(
    policy: Policy,
    schemas: Iterable[EntitySchema] | Mapping[str, EntitySchema],
    enums: Iterable[EnumDecl] | Mapping[str, EnumDecl],
    policies: Iterable[Policy] | Mapping[str, Policy] = (),
) -> tuple[TypedPolicy | None, list[TypeIssue]]:
    """Inline and type-check one policy; returns (typed, issues). typed is
    None whenever issues is non-empty."""
    schema_map = schemas if isinstance(schemas, Mapping) else {s.kind: s for s in schemas}
    enum_map = enums if isinstance(enums, Mapping) else {e.name: e for e in enums}
    policy_map = (
        policies if isinstance(policies, Mapping) else {p.name: p for p in policies}
    )
    checker = _Checker(schema_map, enum_map, policy_map)

    scope: dict[str, tuple[str, str]] = {}
    for param, kind in policy.params:
        if kind not in schema_map:
            checker._issue("UnknownAttribute", policy.name, "", "params",
                           f"parameter {param!r} has undeclared kind {kind!r}")
        scope[param] = ("kind", kind)

    typed_rules = []
    for rule in policy.rules:
        body = checker.inline(rule.body, dict(scope), (policy.name,), policy.name,
                              rule.name, "body")
        checker.check_prop(body, dict(scope), policy.name, rule.name, "body")
        typed_rules.append(TypedRule(rule.name, body))

    if checker.issues:
        return None, checker.issues
    return TypedPolicy(policy.name, policy.params, tuple(typed_rules)), []


def typecheck(
    policy: Policy,
    schemas: Iterable[EntitySchema] | Mapping[str, EntitySchema],
    enums: Iterable[EnumDecl] | Mapping[str, EnumDecl],
    policies: Iterable[Policy] | Mapping[str, Policy] = (),
) -> TypedPolicy:
    typed, issues = check_policy(policy, schemas, enums, policies)
    if issues:
        raise TypecheckError(issues)
    return typed


def typecheck_bundle(bundle) -> dict[str, TypedPolicy]:
    """Check every policy in a bundle; raises TypecheckError carrying all
    issues across all policies."""
    issues: list[TypeIssue] = []
    typed: dict[str, TypedPolicy] = {}
    for pol in bundle.policies:
        t, errs = check_policy(pol, bundle.schemas, bundle.enums, bundle.policies)
        if errs:
            issues.extend(errs)
        else:
            typed[pol.name] = t
    if issues:
        raise TypecheckError(issues)
    return typed
