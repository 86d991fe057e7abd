"""The decision procedure: total evaluation to a proof or a refutation.

decide never answers with silence — every typed, closed proposition over a
finite store yields Yes(proof) or No(refutation). Recursion is structural
on the proposition and quantifier domains are snapshotted at entry, so
evaluation always terminates; an optional step budget turns the bound into
a runtime assertion.

Determinism rules, fixed so independently produced proofs are identical:
existential witnesses are the first satisfying element in canonical domain
order (entities id-lexicographic, enum atoms in declaration order);
conjunction refutations name the first failing side; rule order is
declaration order.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    And,
    Attr,
    AttrExpr,
    Builtin,
    Cmp,
    EmptyIntersect,
    Exists,
    Forall,
    Literal,
    Member,
    Not,
    Or,
    Proposition,
    Var,
)
from .errors import (
    ArityMismatchError,
    KindMismatchError,
    PolityError,
    StepBudgetExceededError,
)
from .model import Entity, EntityStore
from .prooftree import (
    AndProof,
    AndRefut,
    ClaimEv,
    CmpProof,
    CmpRefut,
    Dec,
    EmptyIntersectProof,
    Evidence,
    ExistsProof,
    ExistsRefut,
    ForallProof,
    ForallRefut,
    LiteralEv,
    MemberProof,
    MemberRefut,
    NonEmptyIntersectRefut,
    NotProof,
    NotRefut,
    OrProof,
    OrRefut,
    PolicyRefut,
    Proof,
)
from .resolve import TrustedValues, apply_builtin, attribute_value, compare_values
from .typecheck import TypedPolicy
from .values import Value, atom, ref


def describe_expr(e: AttrExpr) -> str:
    """Store-independent rendering for evidence descriptions."""
    if isinstance(e, Literal):
        return e.value.describe()
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Attr):
        return f"{e.var}.{e.attr}"
    if isinstance(e, Builtin):
        return f"{e.name}(" + ", ".join(describe_expr(a) for a in e.args) + ")"
    raise PolityError(f"unknown expression node {e!r}")


@dataclass
class _Ctx:
    store: EntityStore
    claims: TrustedValues | None
    budget: int | None
    steps: int = 0

    def tick(self) -> None:
        self.steps += 1
        if self.budget is not None and self.steps > self.budget:
            raise StepBudgetExceededError(
                f"evaluation exceeded the step budget of {self.budget}"
            )


def _eval_value(e: AttrExpr, env, ctx: _Ctx) -> Value:
    """Claim-aware value of an expression (claims win at attribute leaves)."""
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Var):
        bound = env[e.name]
        return ref(bound.id) if isinstance(bound, Entity) else bound
    if isinstance(e, Attr):
        bound = env[e.var]
        value, _ = attribute_value(bound, e.attr, ctx.store, ctx.claims)
        return value
    if isinstance(e, Builtin):
        args = [_eval_value(a, env, ctx) for a in e.args]
        return apply_builtin(e.name, args, ctx.store)
    raise PolityError(f"unknown expression node {e!r}")


def _eval_operand(e: AttrExpr, env, ctx: _Ctx) -> tuple[Value, Evidence]:
    """Value plus the evidence leaf recorded for it. Only a bare attribute
    projection can be claim-backed; anything computed is the producer's own
    literal assertion."""
    if isinstance(e, Attr):
        bound = env[e.var]
        value, claim_ref = attribute_value(bound, e.attr, ctx.store, ctx.claims)
        if claim_ref is not None:
            return value, ClaimEv(claim_ref, value)
        return value, LiteralEv(value, describe_expr(e))
    value = _eval_value(e, env, ctx)
    return value, LiteralEv(value, describe_expr(e))


def _domain_elements(domain: str, ctx: _Ctx) -> list[tuple[str, object]]:
    """(witness label, binding) pairs in canonical enumeration order."""
    if domain in ctx.store.schemas:
        return [(e.id, e) for e in ctx.store.entities_of_kind(domain)]
    decl = ctx.store.enums.get(domain)
    if decl is not None:
        return [(m, atom(domain, m)) for m in decl.members]
    raise PolityError(f"quantifier domain {domain!r} is not in the store")


def _decide(p: Proposition, env: dict, ctx: _Ctx) -> Dec:
    ctx.tick()
    if isinstance(p, Cmp):
        lv, le = _eval_operand(p.lhs, env, ctx)
        rv, re_ = _eval_operand(p.rhs, env, ctx)
        if compare_values(p.op, lv, rv):
            return Dec.yes(CmpProof(p.op, le, re_))
        return Dec.no(CmpRefut(p.op, le, re_))
    if isinstance(p, Member):
        ev, ee = _eval_operand(p.elem, env, ctx)
        sv, se = _eval_operand(p.set, env, ctx)
        for index, item in enumerate(sv.payload):
            if item == ev:
                return Dec.yes(MemberProof(index, ee, se))
        mismatches = tuple((i, item) for i, item in enumerate(sv.payload))
        return Dec.no(MemberRefut(ee, se, mismatches))
    if isinstance(p, EmptyIntersect):
        av, ae = _eval_operand(p.a, env, ctx)
        bv, be = _eval_operand(p.b, env, ctx)
        b_items = list(bv.payload)
        for index_a, item in enumerate(av.payload):
            if item in b_items:
                return Dec.no(NonEmptyIntersectRefut(
                    item, index_a, b_items.index(item), ae, be))
        return Dec.yes(EmptyIntersectProof(ae, be))
    if isinstance(p, And):
        left = _decide(p.p, env, ctx)
        if not left.is_yes:
            return Dec.no(AndRefut("inj1", left.refutation))
        right = _decide(p.q, env, ctx)
        if not right.is_yes:
            return Dec.no(AndRefut("inj2", right.refutation))
        return Dec.yes(AndProof(left.proof, right.proof))
    if isinstance(p, Or):
        left = _decide(p.p, env, ctx)
        if left.is_yes:
            return Dec.yes(OrProof("inj1", left.proof))
        right = _decide(p.q, env, ctx)
        if right.is_yes:
            return Dec.yes(OrProof("inj2", right.proof))
        return Dec.no(OrRefut(left.refutation, right.refutation))
    if isinstance(p, Not):
        inner = _decide(p.p, env, ctx)
        if inner.is_yes:
            return Dec.no(NotRefut(inner.proof))
        return Dec.yes(NotProof(inner.refutation))
    if isinstance(p, Exists):
        refutations = []
        for witness, binding in _domain_elements(p.domain, ctx):
            sub = _decide(p.body, {**env, p.var: binding}, ctx)
            if sub.is_yes:
                return Dec.yes(ExistsProof(witness, sub.proof))
            refutations.append(sub.refutation)
        return Dec.no(ExistsRefut(tuple(refutations)))
    if isinstance(p, Forall):
        proofs = []
        for witness, binding in _domain_elements(p.domain, ctx):
            sub = _decide(p.body, {**env, p.var: binding}, ctx)
            if not sub.is_yes:
                return Dec.no(ForallRefut(witness, sub.refutation))
            proofs.append(sub.proof)
        return Dec.yes(ForallProof(tuple(proofs)))
    raise PolityError(f"cannot decide untypechecked node {p!r}")


def decide(
    p: Proposition,
    env: dict,
    store: EntityStore,
    claims: TrustedValues | None = None,
    budget: int | None = None,
) -> Dec:
    """Decide a typed, closed-under-env proposition. Total: always Yes or No.

    env binds variables to Entity objects (kind domains) or enum atom Values
    (enum domains). A trusted claim for (subject, property) takes precedence
    over the store at attribute leaves.
    """
    ctx = _Ctx(store=store, claims=claims, budget=budget)
    return _decide(p, dict(env), ctx)


@dataclass(frozen=True)
class PolicyDecision:
    """Outcome of a policy: the first rule that proved, or every rule's
    refutation bundled for auditability."""

    rule_name: str | None
    dec: Dec

    @property
    def is_yes(self) -> bool:
        return self.dec.is_yes


def decide_policy(
    pol: TypedPolicy,
    args: list[Entity],
    store: EntityStore,
    claims: TrustedValues | None = None,
    budget: int | None = None,
) -> PolicyDecision:
    """Try rules in declaration order; first Yes wins with its rule name. If
    every rule refutes, the decision carries all per-rule refutations."""
    if len(args) != len(pol.params):
        raise ArityMismatchError(
            f"{pol.name} takes {len(pol.params)} arguments, got {len(args)}"
        )
    env: dict = {}
    for (param, kind), entity in zip(pol.params, args):
        if entity.kind != kind:
            raise KindMismatchError(
                f"{pol.name} parameter {param!r} expects kind {kind}, "
                f"got {entity.kind} ({entity.id})"
            )
        env[param] = entity
    ctx = _Ctx(store=store, claims=claims, budget=budget)
    refutations: list[tuple[str, object]] = []
    for rule in pol.rules:
        sub = _decide(rule.body, dict(env), ctx)
        if sub.is_yes:
            return PolicyDecision(rule.name, sub)
        refutations.append((rule.name, sub.refutation))
    return PolicyDecision(None, Dec.no(PolicyRefut(tuple(refutations))))


def filter_with_proofs(
    pol: TypedPolicy,
    ids: list[str],
    store: EntityStore,
    claims: TrustedValues | None = None,
) -> list[tuple[str, Proof]]:
    """Keep exactly the entities the policy admits, in input order, paired
    with their proofs."""
    kept: list[tuple[str, Proof]] = []
    for entity_id in ids:
        entity = store.resolve(entity_id)
        decision = decide_policy(pol, [entity], store, claims)
        if decision.is_yes:
            kept.append((entity_id, decision.dec.proof))
    return kept
