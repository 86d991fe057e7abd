"""Proof and refutation trees: the evidence a decision carries.

Every node mirrors one proposition constructor, so a proof is checkable by
structural comparison against the policy that produced it. Leaves carry
Evidence: either a literal value as the producer resolved it, or a reference
(by content hash) to a signed claim shipped alongside the proof.

Refutations are constructive counter-evidence, not silence: a failed
conjunction names the failing side, a failed existential refutes every
domain element, a failed universal names its counterexample.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .ast import CmpOp
from .canonical import canonical_json_bytes, sha256_hex
from .errors import EnvelopeError
from .values import Value, value_from_wire, value_to_wire


@dataclass(frozen=True)
class LiteralEv:
    """The producer's resolved value for an operand, with a human-readable
    description of the expression it came from."""

    value: Value
    expr: str


@dataclass(frozen=True)
class ClaimEv:
    """A value vouched for by a signed claim; claim_ref is the content hash
    of the claim carried in the envelope's claim set."""

    claim_ref: str
    value: Value


Evidence = Union[LiteralEv, ClaimEv]


# --- proofs -------------------------------------------------------------------


@dataclass(frozen=True)
class CmpProof:
    op: CmpOp
    lhs_ev: Evidence
    rhs_ev: Evidence


@dataclass(frozen=True)
class MemberProof:
    index: int
    elem_ev: Evidence
    set_ev: Evidence


@dataclass(frozen=True)
class EmptyIntersectProof:
    a_ev: Evidence
    b_ev: Evidence


@dataclass(frozen=True)
class AndProof:
    left: "Proof"
    right: "Proof"


@dataclass(frozen=True)
class OrProof:
    side: str  # 'inj1' | 'inj2'
    sub: "Proof"


@dataclass(frozen=True)
class NotProof:
    sub: "Refutation"


@dataclass(frozen=True)
class ExistsProof:
    witness: str  # entity id or enum atom
    sub: "Proof"


@dataclass(frozen=True)
class ForallProof:
    subs: tuple["Proof", ...]  # one per domain element, canonical order


Proof = Union[
    CmpProof, MemberProof, EmptyIntersectProof, AndProof, OrProof, NotProof,
    ExistsProof, ForallProof,
]


# --- refutations ----------------------------------------------------------------


@dataclass(frozen=True)
class CmpRefut:
    op: CmpOp
    lhs_ev: Evidence
    rhs_ev: Evidence


@dataclass(frozen=True)
class MemberRefut:
    elem_ev: Evidence
    set_ev: Evidence
    # one entry per set element: (index, that element's value), each unequal
    # to the elem evidence
    mismatches: tuple[tuple[int, Value], ...]


@dataclass(frozen=True)
class NonEmptyIntersectRefut:
    witness: Value
    index_a: int
    index_b: int
    a_ev: Evidence
    b_ev: Evidence


@dataclass(frozen=True)
class AndRefut:
    side: str  # 'inj1' | 'inj2' — which conjunct failed
    sub: "Refutation"


@dataclass(frozen=True)
class OrRefut:
    left: "Refutation"
    right: "Refutation"


@dataclass(frozen=True)
class NotRefut:
    sub: Proof  # the inner proposition held, refuting its negation


@dataclass(frozen=True)
class ExistsRefut:
    subs: tuple["Refutation", ...]  # one per domain element, canonical order


@dataclass(frozen=True)
class ForallRefut:
    witness: str
    sub: "Refutation"


@dataclass(frozen=True)
class PolicyRefut:
    """Denial bundle for a whole policy: every rule's refutation, in rule
    order, so denials stay explainable."""

    rules: tuple[tuple[str, "Refutation"], ...]


Refutation = Union[
    CmpRefut, MemberRefut, NonEmptyIntersectRefut, AndRefut, OrRefut, NotRefut,
    ExistsRefut, ForallRefut, PolicyRefut,
]


@dataclass(frozen=True)
class Dec:
    """A decision: exactly one of proof or refutation is set."""

    proof: Proof | None = None
    refutation: Refutation | None = None

    def __post_init__(self) -> None:
        if (self.proof is None) == (self.refutation is None):
            raise EnvelopeError("a decision carries exactly one of proof/refutation")

    @property
    def is_yes(self) -> bool:
        return self.proof is not None

    @classmethod
    def yes(cls, proof: Proof) -> "Dec":
        return cls(proof=proof)

    @classmethod
    def no(cls, refutation: Refutation) -> "Dec":
        return cls(refutation=refutation)


# --- wire encoding ----------------------------------------------------------------


def evidence_to_wire(ev: Evidence) -> dict:
    if isinstance(ev, LiteralEv):
        return {"kind": "lit", "value": value_to_wire(ev.value), "expr": ev.expr}
    return {"kind": "claim", "ref": ev.claim_ref, "value": value_to_wire(ev.value)}


def evidence_from_wire(obj) -> Evidence:
    if not isinstance(obj, dict):
        raise EnvelopeError(f"malformed evidence: {obj!r}")
    kind = obj.get("kind")
    if kind == "lit":
        return LiteralEv(value_from_wire(obj.get("value")), str(obj.get("expr", "")))
    if kind == "claim":
        ref = obj.get("ref")
        if not isinstance(ref, str):
            raise EnvelopeError("claim evidence lacks a ref")
        return ClaimEv(ref, value_from_wire(obj.get("value")))
    raise EnvelopeError(f"unknown evidence kind {kind!r}")


def proof_to_wire(p: Proof) -> dict:
    if isinstance(p, CmpProof):
        return {"kind": "cmp", "op": p.op.wire,
                "lhs": evidence_to_wire(p.lhs_ev), "rhs": evidence_to_wire(p.rhs_ev)}
    if isinstance(p, MemberProof):
        return {"kind": "member", "index": p.index,
                "elem": evidence_to_wire(p.elem_ev), "set": evidence_to_wire(p.set_ev)}
    if isinstance(p, EmptyIntersectProof):
        return {"kind": "emptyintersect",
                "a": evidence_to_wire(p.a_ev), "b": evidence_to_wire(p.b_ev)}
    if isinstance(p, AndProof):
        return {"kind": "and", "left": proof_to_wire(p.left), "right": proof_to_wire(p.right)}
    if isinstance(p, OrProof):
        return {"kind": "or", "side": p.side, "sub": proof_to_wire(p.sub)}
    if isinstance(p, NotProof):
        return {"kind": "not", "sub": refutation_to_wire(p.sub)}
    if isinstance(p, ExistsProof):
        return {"kind": "exists", "witness": p.witness, "sub": proof_to_wire(p.sub)}
    if isinstance(p, ForallProof):
        return {"kind": "forall", "subs": [proof_to_wire(s) for s in p.subs]}
    raise EnvelopeError(f"unknown proof node {p!r}")


def refutation_to_wire(r: Refutation) -> dict:
    if isinstance(r, CmpRefut):
        return {"kind": "refut-cmp", "op": r.op.wire,
                "lhs": evidence_to_wire(r.lhs_ev), "rhs": evidence_to_wire(r.rhs_ev)}
    if isinstance(r, MemberRefut):
        return {"kind": "refut-member",
                "elem": evidence_to_wire(r.elem_ev), "set": evidence_to_wire(r.set_ev),
                "mismatches": [{"index": i, "value": value_to_wire(v)}
                               for i, v in r.mismatches]}
    if isinstance(r, NonEmptyIntersectRefut):
        return {"kind": "refut-emptyintersect", "witness": value_to_wire(r.witness),
                "indexA": r.index_a, "indexB": r.index_b,
                "a": evidence_to_wire(r.a_ev), "b": evidence_to_wire(r.b_ev)}
    if isinstance(r, AndRefut):
        return {"kind": "refut-and", "side": r.side, "sub": refutation_to_wire(r.sub)}
    if isinstance(r, OrRefut):
        return {"kind": "refut-or", "left": refutation_to_wire(r.left),
                "right": refutation_to_wire(r.right)}
    if isinstance(r, NotRefut):
        return {"kind": "refut-not", "sub": proof_to_wire(r.sub)}
    if isinstance(r, ExistsRefut):
        return {"kind": "refut-exists", "subs": [refutation_to_wire(s) for s in r.subs]}
    if isinstance(r, ForallRefut):
        return {"kind": "refut-forall", "witness": r.witness,
                "sub": refutation_to_wire(r.sub)}
    if isinstance(r, PolicyRefut):
        return {"kind": "refut-policy",
                "rules": [{"rule": name, "refutation": refutation_to_wire(sub)}
                          for name, sub in r.rules]}
    raise EnvelopeError(f"unknown refutation node {r!r}")


def _require(obj: dict, key: str):
    if key not in obj:
        raise EnvelopeError(f"proof node missing field {key!r}")
    return obj[key]


def proof_from_wire(obj) -> Proof:
    if not isinstance(obj, dict):
        raise EnvelopeError(f"malformed proof node: {obj!r}")
    kind = obj.get("kind")
    try:
        if kind == "cmp":
            return CmpProof(CmpOp.from_wire(_require(obj, "op")),
                            evidence_from_wire(_require(obj, "lhs")),
                            evidence_from_wire(_require(obj, "rhs")))
        if kind == "member":
            index = _require(obj, "index")
            if not isinstance(index, int) or index < 0:
                raise EnvelopeError(f"bad member index {index!r}")
            return MemberProof(index,
                               evidence_from_wire(_require(obj, "elem")),
                               evidence_from_wire(_require(obj, "set")))
        if kind == "emptyintersect":
            return EmptyIntersectProof(evidence_from_wire(_require(obj, "a")),
                                       evidence_from_wire(_require(obj, "b")))
        if kind == "and":
            return AndProof(proof_from_wire(_require(obj, "left")),
                            proof_from_wire(_require(obj, "right")))
        if kind == "or":
            side = _require(obj, "side")
            if side not in ("inj1", "inj2"):
                raise EnvelopeError(f"bad or-side {side!r}")
            return OrProof(side, proof_from_wire(_require(obj, "sub")))
        if kind == "not":
            return NotProof(refutation_from_wire(_require(obj, "sub")))
        if kind == "exists":
            witness = _require(obj, "witness")
            if not isinstance(witness, str):
                raise EnvelopeError(f"bad witness {witness!r}")
            return ExistsProof(witness, proof_from_wire(_require(obj, "sub")))
        if kind == "forall":
            subs = _require(obj, "subs")
            if not isinstance(subs, list):
                raise EnvelopeError("forall subs must be a list")
            return ForallProof(tuple(proof_from_wire(s) for s in subs))
    except KeyError as exc:
        raise EnvelopeError(f"malformed proof node: {exc}") from exc
    raise EnvelopeError(f"unknown proof kind {kind!r}")


def refutation_from_wire(obj) -> Refutation:
    if not isinstance(obj, dict):
        raise EnvelopeError(f"malformed refutation node: {obj!r}")
    kind = obj.get("kind")
    try:
        if kind == "refut-cmp":
            return CmpRefut(CmpOp.from_wire(_require(obj, "op")),
                            evidence_from_wire(_require(obj, "lhs")),
                            evidence_from_wire(_require(obj, "rhs")))
        if kind == "refut-member":
            mismatches = _require(obj, "mismatches")
            if not isinstance(mismatches, list):
                raise EnvelopeError("refut-member mismatches must be a list")
            return MemberRefut(
                evidence_from_wire(_require(obj, "elem")),
                evidence_from_wire(_require(obj, "set")),
                tuple((m["index"], value_from_wire(m["value"])) for m in mismatches),
            )
        if kind == "refut-emptyintersect":
            return NonEmptyIntersectRefut(
                value_from_wire(_require(obj, "witness")),
                _require(obj, "indexA"), _require(obj, "indexB"),
                evidence_from_wire(_require(obj, "a")),
                evidence_from_wire(_require(obj, "b")),
            )
        if kind == "refut-and":
            side = _require(obj, "side")
            if side not in ("inj1", "inj2"):
                raise EnvelopeError(f"bad refut-and side {side!r}")
            return AndRefut(side, refutation_from_wire(_require(obj, "sub")))
        if kind == "refut-or":
            return OrRefut(refutation_from_wire(_require(obj, "left")),
                           refutation_from_wire(_require(obj, "right")))
        if kind == "refut-not":
            return NotRefut(proof_from_wire(_require(obj, "sub")))
        if kind == "refut-exists":
            subs = _require(obj, "subs")
            if not isinstance(subs, list):
                raise EnvelopeError("refut-exists subs must be a list")
            return ExistsRefut(tuple(refutation_from_wire(s) for s in subs))
        if kind == "refut-forall":
            return ForallRefut(_require(obj, "witness"),
                               refutation_from_wire(_require(obj, "sub")))
        if kind == "refut-policy":
            rules = _require(obj, "rules")
            if not isinstance(rules, list):
                raise EnvelopeError("refut-policy rules must be a list")
            return PolicyRefut(tuple(
                (r["rule"], refutation_from_wire(r["refutation"])) for r in rules
            ))
    except KeyError as exc:
        raise EnvelopeError(f"malformed refutation node: {exc}") from exc
    raise EnvelopeError(f"unknown refutation kind {kind!r}")


def proof_hash(p: Proof) -> str:
    return sha256_hex(canonical_json_bytes(proof_to_wire(p)))


def refutation_hash(r: Refutation) -> str:
    return sha256_hex(canonical_json_bytes(refutation_to_wire(r)))


def claim_refs(p: Proof | Refutation) -> set[str]:
    """All claim content hashes referenced by the tree's evidence leaves."""
    refs: set[str] = set()

    def ev(e: Evidence) -> None:
        if isinstance(e, ClaimEv):
            refs.add(e.claim_ref)

    def walk(node) -> None:
        if isinstance(node, (CmpProof, CmpRefut)):
            ev(node.lhs_ev)
            ev(node.rhs_ev)
        elif isinstance(node, MemberProof):
            ev(node.elem_ev)
            ev(node.set_ev)
        elif isinstance(node, MemberRefut):
            ev(node.elem_ev)
            ev(node.set_ev)
        elif isinstance(node, EmptyIntersectProof):
            ev(node.a_ev)
            ev(node.b_ev)
        elif isinstance(node, NonEmptyIntersectRefut):
            ev(node.a_ev)
            ev(node.b_ev)
        elif isinstance(node, AndProof):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (OrProof, NotProof, ExistsProof, AndRefut, NotRefut,
                               ForallRefut)):
            walk(node.sub)
        elif isinstance(node, ForallProof):
            for s in node.subs:
                walk(s)
        elif isinstance(node, OrRefut):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, ExistsRefut):
            for s in node.subs:
                walk(s)
        elif isinstance(node, PolicyRefut):
            for _, s in node.rules:
                walk(s)
        else:
            raise EnvelopeError(f"unknown node {node!r}")

    walk(p)
    return refs
