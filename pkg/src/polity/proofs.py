"""Proof envelopes and the verify-not-recompute checker.

An envelope packages a decision for transport: which policy and rule it
proves, the argument entity ids, the proof tree, and the full signed claim
for every claim-backed leaf. Serialization is canonical, so equal envelopes
produce equal bytes and content hashes are stable.

verify re-derives acceptance from the envelope alone plus the verifier's own
copy of the policy: it never touches an entity store and never re-gathers
attributes. It checks (a) the proof tree is shape-valid for the named rule,
(b) leaf facts re-compute on the evidenced values, (c) every referenced
claim is signed by an issuer the verifier trusts for that property and both
producedAt and the verifier clock sit inside the claim window (and within
the configured skew of each other), and (d) disjunction sides and
existential witnesses are consistent with the rule body. Malformed input is
Rejected with a reason, never an exception.

Leaf-fact rechecks are implemented here, on purpose, without reusing the
evaluator's comparison and intersection helpers: the two routes stay
independent so one bug cannot silently agree with itself.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping

from .ast import (
    And,
    Attr,
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
from .canonical import (
    canonical_json_bytes,
    format_timestamp,
    parse_timestamp,
    sha256_hex,
)
from .claims import Claim, ClaimStatus, TrustStore, verify_claim
from .errors import EnvelopeError
from .prooftree import (
    AndProof,
    AndRefut,
    ClaimEv,
    CmpProof,
    CmpRefut,
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
    Proof,
    Refutation,
    claim_refs,
    proof_from_wire,
    proof_to_wire,
)
from .typecheck import TypedPolicy
from .values import EnumDecl, Tag, Value, atom, ref
from .ast import CmpOp


@dataclass(frozen=True)
class ProofEnvelope:
    policy_name: str
    rule_name: str
    args: tuple[str, ...]
    proof: Proof
    claim_set: tuple[Claim, ...]
    produced_at: datetime
    producer: str

    def __post_init__(self) -> None:
        available = {c.content_hash() for c in self.claim_set}
        for needed in claim_refs(self.proof):
            if needed not in available:
                raise EnvelopeError(f"proof references missing claim {needed}")

    def to_wire(self) -> dict:
        return {
            "policy": self.policy_name,
            "rule": self.rule_name,
            "args": list(self.args),
            "proof": proof_to_wire(self.proof),
            "claims": [c.to_wire() for c in self.claim_set],
            "producedAt": format_timestamp(self.produced_at),
            "producer": self.producer,
        }

    @classmethod
    def from_wire(cls, obj) -> "ProofEnvelope":
        if not isinstance(obj, dict):
            raise EnvelopeError(f"malformed envelope: {obj!r}")
        try:
            args = obj["args"]
            if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
                raise EnvelopeError("envelope args must be a list of entity ids")
            claims_raw = obj["claims"]
            if not isinstance(claims_raw, list):
                raise EnvelopeError("envelope claims must be a list")
            return cls(
                policy_name=str(obj["policy"]),
                rule_name=str(obj["rule"]),
                args=tuple(args),
                proof=proof_from_wire(obj["proof"]),
                claim_set=tuple(Claim.from_wire(c) for c in claims_raw),
                produced_at=parse_timestamp(obj["producedAt"]),
                producer=str(obj["producer"]),
            )
        except EnvelopeError:
            raise
        except Exception as exc:
            raise EnvelopeError(f"malformed envelope: {exc}") from exc


def build_envelope(
    policy_name: str,
    rule_name: str,
    args: list[str],
    proof: Proof,
    claim_lookup,
    produced_at: datetime,
    producer: str,
) -> ProofEnvelope:
    """Assemble an envelope, pulling every referenced claim out of a bag (or
    any object with by_hash)."""
    claims: list[Claim] = []
    for digest in sorted(claim_refs(proof)):
        claim = claim_lookup.by_hash(digest)
        if claim is None:
            raise EnvelopeError(f"no claim with hash {digest} available for envelope")
        claims.append(claim)
    return ProofEnvelope(
        policy_name=policy_name,
        rule_name=rule_name,
        args=tuple(args),
        proof=proof,
        claim_set=tuple(claims),
        produced_at=produced_at,
        producer=producer,
    )


def serialize(envelope: ProofEnvelope) -> bytes:
    """Canonical bytes: sorted keys, no insignificant whitespace, unpadded
    integers. Equal envelopes serialize to equal bytes."""
    return canonical_json_bytes(envelope.to_wire())


def deserialize(raw: bytes) -> ProofEnvelope:
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EnvelopeError(f"envelope is not valid JSON: {exc}") from exc
    return ProofEnvelope.from_wire(obj)


def envelope_hash(envelope: ProofEnvelope) -> str:
    return sha256_hex(serialize(envelope))


# --- verification -----------------------------------------------------------------


@dataclass(frozen=True)
class VerifyReport:
    verdict: str  # 'accepted' | 'rejected'
    failures: tuple[tuple[str, str], ...]  # (path into proof, reason)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "failures": [{"path": p, "reason": r} for p, r in self.failures],
        }


# Leaf arithmetic below is intentionally self-contained (no evaluator imports).


def _leaf_compare(op: CmpOp, lhs: Value, rhs: Value) -> bool | None:
    """None means the comparison itself is ill-formed for these values."""
    if op is CmpOp.EQ:
        return lhs == rhs
    if op is CmpOp.NEQ:
        return lhs != rhs
    if lhs.tag is not Tag.NAT or rhs.tag is not Tag.NAT:
        return None
    a, b = lhs.payload, rhs.payload
    return {CmpOp.LE: a <= b, CmpOp.LT: a < b, CmpOp.GE: a >= b, CmpOp.GT: a > b}[op]


class _Verifier:
    def __init__(
        self,
        policy: TypedPolicy,
        envelope: ProofEnvelope,
        trust: TrustStore,
        clock: datetime,
        enums: Mapping[str, EnumDecl],
        kinds: frozenset[str],
    ):
        self.policy = policy
        self.envelope = envelope
        self.trust = trust
        self.clock = clock
        self.enums = dict(enums)
        self.kinds = kinds
        self.failures: list[tuple[str, str]] = []
        self.claims_by_hash = {c.content_hash(): c for c in envelope.claim_set}
        self._claim_ok: dict[str, bool] = {}

    def fail(self, path: str, reason: str) -> None:
        self.failures.append((path, reason))

    # -- claim-backed evidence

    def _check_claim(self, digest: str, path: str) -> Claim | None:
        claim = self.claims_by_hash.get(digest)
        if claim is None:
            self.fail(path, "UnknownClaimRef")
            return None
        if digest in self._claim_ok:
            return claim if self._claim_ok[digest] else None
        ok = True
        verdict = verify_claim(claim, self.trust.trust, self.trust.pubkeys, self.clock)
        reason_by_status = {
            ClaimStatus.BAD_SIGNATURE: "SignatureInvalid",
            ClaimStatus.UNTRUSTED_ISSUER: "UntrustedIssuer",
            ClaimStatus.EXPIRED: "ClaimExpired",
            ClaimStatus.NOT_YET_VALID: "ClaimNotYetValid",
        }
        if verdict.status is not ClaimStatus.TRUSTED:
            self.fail(path, reason_by_status[verdict.status])
            ok = False
        else:
            produced = self.envelope.produced_at
            if not (claim.issued_at <= produced < claim.expires_at):
                self.fail(path, "ClaimExpired" if produced >= claim.expires_at
                          else "ClaimNotYetValid")
                ok = False
            skew = abs((self.clock - produced).total_seconds())
            if skew > self.trust.max_skew_seconds:
                self.fail(path, "SkewExceeded")
                ok = False
        if digest != claim.content_hash():
            self.fail(path, "UnknownClaimRef")
            ok = False
        self._claim_ok[digest] = ok
        return claim if ok else None

    def evidence_value(self, ev: Evidence, operand, binding, path: str) -> Value | None:
        """Validate one evidence leaf against its operand expression and
        return the value to recheck with."""
        if isinstance(ev, ClaimEv):
            if not isinstance(operand, Attr):
                self.fail(path, "ShapeMismatch")
                return None
            claim = self._check_claim(ev.claim_ref, path)
            if claim is None:
                return None
            if claim.value != ev.value:
                self.fail(path, "ClaimValueMismatch")
                return None
            if claim.property != operand.attr:
                self.fail(path, "ClaimBindingMismatch")
                return None
            subject = binding.get(operand.var, None)
            if subject is not None and claim.subject != subject:
                self.fail(path, "ClaimBindingMismatch")
                return None
            return ev.value
        if isinstance(ev, LiteralEv):
            # A literal operand's true value is known from the policy itself.
            if isinstance(operand, Literal) and ev.value != operand.value:
                self.fail(path, "LeafRecheckFailed")
                return None
            if isinstance(operand, Var):
                bound = binding.get(operand.name, None)
                if bound is not None and ev.value != bound_value(bound):
                    self.fail(path, "LeafRecheckFailed")
                    return None
            return ev.value
        self.fail(path, "ShapeMismatch")
        return None

    # -- proof shape + leaf rechecks

    def check_proof(self, prop: Proposition, proof, binding, path: str) -> None:
        if isinstance(prop, Cmp) and isinstance(proof, CmpProof):
            if proof.op is not prop.op:
                self.fail(path, "ShapeMismatch")
                return
            lhs = self.evidence_value(proof.lhs_ev, prop.lhs, binding, path + ".lhs")
            rhs = self.evidence_value(proof.rhs_ev, prop.rhs, binding, path + ".rhs")
            if lhs is None or rhs is None:
                return
            if _leaf_compare(proof.op, lhs, rhs) is not True:
                self.fail(path, "LeafRecheckFailed")
            return
        if isinstance(prop, Member) and isinstance(proof, MemberProof):
            elem = self.evidence_value(proof.elem_ev, prop.elem, binding, path + ".elem")
            coll = self.evidence_value(proof.set_ev, prop.set, binding, path + ".set")
            if elem is None or coll is None:
                return
            if coll.tag is not Tag.LIST or proof.index >= len(coll.payload):
                self.fail(path, "LeafRecheckFailed")
                return
            if coll.payload[proof.index] != elem:
                self.fail(path, "LeafRecheckFailed")
            return
        if isinstance(prop, EmptyIntersect) and isinstance(proof, EmptyIntersectProof):
            a = self.evidence_value(proof.a_ev, prop.a, binding, path + ".a")
            b = self.evidence_value(proof.b_ev, prop.b, binding, path + ".b")
            if a is None or b is None:
                return
            if a.tag is not Tag.LIST or b.tag is not Tag.LIST:
                self.fail(path, "LeafRecheckFailed")
                return
            if any(item in b.payload for item in a.payload):
                self.fail(path, "LeafRecheckFailed")
            return
        if isinstance(prop, And) and isinstance(proof, AndProof):
            self.check_proof(prop.p, proof.left, binding, path + ".left")
            self.check_proof(prop.q, proof.right, binding, path + ".right")
            return
        if isinstance(prop, Or) and isinstance(proof, OrProof):
            chosen = prop.p if proof.side == "inj1" else prop.q
            self.check_proof(chosen, proof.sub, binding, path + ".sub")
            return
        if isinstance(prop, Not) and isinstance(proof, NotProof):
            self.check_refutation(prop.p, proof.sub, binding, path + ".sub")
            return
        if isinstance(prop, Exists) and isinstance(proof, ExistsProof):
            sub_binding = self._bind_witness(prop, proof.witness, binding, path)
            if sub_binding is None:
                return
            self.check_proof(prop.body, proof.sub, sub_binding, path + ".sub")
            return
        if isinstance(prop, Forall) and isinstance(proof, ForallProof):
            decl = self.enums.get(prop.domain)
            if decl is not None:
                # Enum domains have a verifier-known size and order.
                if len(proof.subs) != len(decl.members):
                    self.fail(path, "ShapeMismatch")
                    return
                for i, sub in enumerate(proof.subs):
                    inner = {**binding, prop.var: _atom_marker(prop.domain, decl.members[i])}
                    self.check_proof(prop.body, sub, inner, f"{path}.subs[{i}]")
            else:
                # Entity domains: the verifier cannot know the domain size
                # without a store; each branch is still fully checked.
                for i, sub in enumerate(proof.subs):
                    inner = {**binding, prop.var: None}
                    self.check_proof(prop.body, sub, inner, f"{path}.subs[{i}]")
            return
        self.fail(path, "ShapeMismatch")

    def _bind_witness(self, prop, witness: str, binding, path: str):
        if prop.domain in self.enums:
            if witness not in self.enums[prop.domain].members:
                self.fail(path, "BadWitness")
                return None
            return {**binding, prop.var: _atom_marker(prop.domain, witness)}
        if prop.domain in self.kinds or not self.kinds:
            return {**binding, prop.var: witness}
        self.fail(path, "BadWitness")
        return None

    # -- refutation shape (reachable under Not)

    def check_refutation(self, prop: Proposition, refut, binding, path: str) -> None:
        if isinstance(prop, Cmp) and isinstance(refut, CmpRefut):
            if refut.op is not prop.op:
                self.fail(path, "ShapeMismatch")
                return
            lhs = self.evidence_value(refut.lhs_ev, prop.lhs, binding, path + ".lhs")
            rhs = self.evidence_value(refut.rhs_ev, prop.rhs, binding, path + ".rhs")
            if lhs is None or rhs is None:
                return
            if _leaf_compare(refut.op, lhs, rhs) is not False:
                self.fail(path, "LeafRecheckFailed")
            return
        if isinstance(prop, Member) and isinstance(refut, MemberRefut):
            elem = self.evidence_value(refut.elem_ev, prop.elem, binding, path + ".elem")
            coll = self.evidence_value(refut.set_ev, prop.set, binding, path + ".set")
            if elem is None or coll is None:
                return
            if coll.tag is not Tag.LIST or len(refut.mismatches) != len(coll.payload):
                self.fail(path, "LeafRecheckFailed")
                return
            for i, (index, value) in enumerate(refut.mismatches):
                if index != i or value != coll.payload[i] or value == elem:
                    self.fail(path, "LeafRecheckFailed")
                    return
            return
        if isinstance(prop, EmptyIntersect) and isinstance(refut, NonEmptyIntersectRefut):
            a = self.evidence_value(refut.a_ev, prop.a, binding, path + ".a")
            b = self.evidence_value(refut.b_ev, prop.b, binding, path + ".b")
            if a is None or b is None:
                return
            ok = (
                a.tag is Tag.LIST
                and b.tag is Tag.LIST
                and 0 <= refut.index_a < len(a.payload)
                and 0 <= refut.index_b < len(b.payload)
                and a.payload[refut.index_a] == refut.witness
                and b.payload[refut.index_b] == refut.witness
            )
            if not ok:
                self.fail(path, "LeafRecheckFailed")
            return
        if isinstance(prop, And) and isinstance(refut, AndRefut):
            chosen = prop.p if refut.side == "inj1" else prop.q
            self.check_refutation(chosen, refut.sub, binding, path + ".sub")
            return
        if isinstance(prop, Or) and isinstance(refut, OrRefut):
            self.check_refutation(prop.p, refut.left, binding, path + ".left")
            self.check_refutation(prop.q, refut.right, binding, path + ".right")
            return
        if isinstance(prop, Not) and isinstance(refut, NotRefut):
            self.check_proof(prop.p, refut.sub, binding, path + ".sub")
            return
        if isinstance(prop, Exists) and isinstance(refut, ExistsRefut):
            decl = self.enums.get(prop.domain)
            if decl is not None and len(refut.subs) != len(decl.members):
                self.fail(path, "ShapeMismatch")
                return
            for i, sub in enumerate(refut.subs):
                marker = (
                    _atom_marker(prop.domain, decl.members[i]) if decl is not None else None
                )
                self.check_refutation(prop.body, sub, {**binding, prop.var: marker},
                                      f"{path}.subs[{i}]")
            return
        if isinstance(prop, Forall) and isinstance(refut, ForallRefut):
            sub_binding = self._bind_witness(prop, refut.witness, binding, path)
            if sub_binding is None:
                return
            self.check_refutation(prop.body, refut.sub, sub_binding, path + ".sub")
            return
        self.fail(path, "ShapeMismatch")


def _atom_marker(enum_name: str, member: str):
    return ("atom", enum_name, member)


def bound_value(bound) -> Value:
    """What a Var operand's evidence must equal under a known binding."""
    if isinstance(bound, tuple) and bound and bound[0] == "atom":
        return atom(bound[1], bound[2])
    return ref(bound)


def verify(
    pol: TypedPolicy,
    envelope: ProofEnvelope,
    trust: TrustStore,
    clock: datetime,
    enums: Mapping[str, EnumDecl] | None = None,
    kinds: frozenset[str] | None = None,
) -> VerifyReport:
    """Check an envelope against the verifier's own copy of the policy.
    Never raises on malformed input; every problem becomes a failure entry.

    enums/kinds, when provided from the verifier's bundle, tighten witness
    checks (enum witnesses must be declared members, quantifier arities over
    enums must match)."""
    failures: list[tuple[str, str]] = []
    if envelope.policy_name != pol.name:
        failures.append(("envelope", "UnknownPolicy"))
        return VerifyReport("rejected", tuple(failures))
    rule = pol.rule(envelope.rule_name)
    if rule is None:
        failures.append(("envelope", "UnknownRule"))
        return VerifyReport("rejected", tuple(failures))
    if len(envelope.args) != len(pol.params):
        failures.append(("envelope", "ArityMismatch"))
        return VerifyReport("rejected", tuple(failures))

    binding = {param: arg for (param, _), arg in zip(pol.params, envelope.args)}
    verifier = _Verifier(
        policy=pol,
        envelope=envelope,
        trust=trust,
        clock=clock,
        enums=enums or {},
        kinds=kinds or frozenset(),
    )
    try:
        verifier.check_proof(rule.body, envelope.proof, binding, "proof")
    except Exception as exc:  # malformed input must reject, not raise
        verifier.fail("proof", f"MalformedProof: {exc}")
    if verifier.failures:
        return VerifyReport("rejected", tuple(verifier.failures))
    return VerifyReport("accepted", ())


def verify_bytes(
    raw: bytes,
    policies: Mapping[str, TypedPolicy],
    trust: TrustStore,
    clock: datetime,
    enums: Mapping[str, EnumDecl] | None = None,
    kinds: frozenset[str] | None = None,
) -> VerifyReport:
    """Total verification from wire bytes; malformed bytes reject."""
    try:
        envelope = deserialize(raw)
    except EnvelopeError as exc:
        return VerifyReport("rejected", (("envelope", f"MalformedEnvelope: {exc}"),))
    pol = policies.get(envelope.policy_name)
    if pol is None:
        return VerifyReport("rejected", (("envelope", "UnknownPolicy"),))
    return verify(pol, envelope, trust, clock, enums=enums, kinds=kinds)
