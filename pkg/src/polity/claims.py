"""Verifiable claims: signed subject-property-value triples with a validity
window, plus the trust machinery a verifier needs to accept them.

A claim is signed over the canonical bytes of everything except the
signature; its content hash (SHA-256 of those same bytes) is how proof
leaves reference it. Key distribution is a static issuer -> public key map;
trust is a list of (issuer, property pattern) entries, where the pattern is
an exact property name or "*". The validity window is half-open:
issuedAt <= clock < expiresAt.

Includes a minimal claim-server endpoint (query by subject and properties,
bearer-token guarded) and its client.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Callable, Iterable, Mapping

import base64
import json

import httpx
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import (
    canonical_json_bytes,
    format_timestamp,
    parse_timestamp,
    sha256_hex,
    utc_now,
)
from .errors import (
    ClaimUnauthorizedError,
    ClaimUnavailableError,
    PolityError,
    SchemaViolationError,
)
from .values import Value, value_from_wire, value_to_wire


@dataclass(frozen=True)
class Claim:
    issuer: str
    subject: str
    property: str
    value: Value
    issued_at: datetime
    expires_at: datetime
    signature: bytes

    def __post_init__(self) -> None:
        if self.issued_at >= self.expires_at:
            raise SchemaViolationError("claim validity window is empty or inverted")

    def signed_payload(self) -> bytes:
        """Canonical bytes of every field except the signature; this is what
        gets signed and what the content hash covers."""
        return canonical_json_bytes({
            "issuer": self.issuer,
            "subject": self.subject,
            "property": self.property,
            "value": value_to_wire(self.value),
            "issuedAt": format_timestamp(self.issued_at),
            "expiresAt": format_timestamp(self.expires_at),
        })

    def content_hash(self) -> str:
        return sha256_hex(self.signed_payload())

    def to_wire(self) -> dict:
        return {
            "issuer": self.issuer,
            "subject": self.subject,
            "property": self.property,
            "value": value_to_wire(self.value),
            "issuedAt": format_timestamp(self.issued_at),
            "expiresAt": format_timestamp(self.expires_at),
            "sig": base64.b64encode(self.signature).decode("ascii"),
        }

    @classmethod
    def from_wire(cls, obj) -> "Claim":
        if not isinstance(obj, dict):
            raise SchemaViolationError(f"malformed claim: {obj!r}")
        try:
            return cls(
                issuer=str(obj["issuer"]),
                subject=str(obj["subject"]),
                property=str(obj["property"]),
                value=value_from_wire(obj["value"]),
                issued_at=parse_timestamp(obj["issuedAt"]),
                expires_at=parse_timestamp(obj["expiresAt"]),
                signature=base64.b64decode(obj["sig"], validate=True),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolationError(f"malformed claim: {exc}") from exc


@dataclass(frozen=True)
class IssuerKeypair:
    """Ed25519 keypair for a claim issuer. Secret bytes live here for test
    and development use only; production issuers keep keys elsewhere."""

    issuer: str
    public_key: bytes
    secret_key: bytes

    @classmethod
    def generate(cls, issuer: str) -> "IssuerKeypair":
        key = Ed25519PrivateKey.generate()
        return cls(
            issuer=issuer,
            public_key=key.public_key().public_bytes_raw(),
            secret_key=key.private_bytes_raw(),
        )

    def to_json(self) -> dict:
        return {
            "issuer": self.issuer,
            "publicKey": base64.b64encode(self.public_key).decode("ascii"),
            "secretKey": base64.b64encode(self.secret_key).decode("ascii"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IssuerKeypair":
        return cls(
            issuer=obj["issuer"],
            public_key=base64.b64decode(obj["publicKey"]),
            secret_key=base64.b64decode(obj["secretKey"]),
        )

    @classmethod
    def load(cls, path: str) -> "IssuerKeypair":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def issue(
    kp: IssuerKeypair,
    subject: str,
    property: str,
    value: Value,
    validity: timedelta,
    clock: Callable[[], datetime] | None = None,
) -> Claim:
    """Sign a fresh claim; issuedAt is the issuer's clock now."""
    if validity <= timedelta(0):
        raise PolityError("claim validity must be positive")
    now = (clock or utc_now)()
    unsigned = Claim(
        issuer=kp.issuer,
        subject=subject,
        property=property,
        value=value,
        issued_at=now,
        expires_at=now + validity,
        signature=b"",
    )
    key = Ed25519PrivateKey.from_private_bytes(kp.secret_key)
    signature = key.sign(unsigned.signed_payload())
    return Claim(
        issuer=unsigned.issuer,
        subject=unsigned.subject,
        property=unsigned.property,
        value=unsigned.value,
        issued_at=unsigned.issued_at,
        expires_at=unsigned.expires_at,
        signature=signature,
    )


@dataclass(frozen=True)
class TrustList:
    """Which issuers this owner accepts, per property. An entry's pattern is
    an exact property name or '*' for any."""

    owner: str
    entries: frozenset[tuple[str, str]]

    def permits(self, issuer: str, property: str) -> bool:
        return (issuer, property) in self.entries or (issuer, "*") in self.entries


class ClaimStatus(Enum):
    TRUSTED = "trusted"
    UNTRUSTED_ISSUER = "untrusted-issuer"
    BAD_SIGNATURE = "bad-signature"
    EXPIRED = "expired"
    NOT_YET_VALID = "not-yet-valid"


@dataclass(frozen=True)
class ClaimVerdict:
    status: ClaimStatus
    detail: str = ""


def verify_claim(
    claim: Claim,
    trust: TrustList,
    pubkeys: Mapping[str, bytes],
    clock: datetime,
) -> ClaimVerdict:
    """Trusted iff the signature verifies under the issuer's published key,
    the issuer is trusted for the property, and the clock sits inside the
    half-open validity window. An unknown issuer key reports as untrusted."""
    key_bytes = pubkeys.get(claim.issuer)
    if key_bytes is None:
        return ClaimVerdict(ClaimStatus.UNTRUSTED_ISSUER,
                            f"no published key for issuer {claim.issuer}")
    try:
        Ed25519PublicKey.from_public_bytes(key_bytes).verify(
            claim.signature, claim.signed_payload()
        )
    except (InvalidSignature, ValueError):
        return ClaimVerdict(ClaimStatus.BAD_SIGNATURE, "signature does not verify")
    if not trust.permits(claim.issuer, claim.property):
        return ClaimVerdict(ClaimStatus.UNTRUSTED_ISSUER,
                            f"{claim.issuer} is not trusted for {claim.property!r}")
    if clock < claim.issued_at:
        return ClaimVerdict(ClaimStatus.NOT_YET_VALID,
                            f"claim becomes valid at {format_timestamp(claim.issued_at)}")
    if clock >= claim.expires_at:
        return ClaimVerdict(ClaimStatus.EXPIRED,
                            f"claim expired at {format_timestamp(claim.expires_at)}")
    return ClaimVerdict(ClaimStatus.TRUSTED)


@dataclass(frozen=True)
class TrustStore:
    """A verifier's trust configuration in one place: the trust list, the
    issuer key map, and the producedAt-to-clock skew tolerance."""

    trust: TrustList
    pubkeys: Mapping[str, bytes]
    max_skew_seconds: int = 300

    @classmethod
    def from_json(cls, obj: dict) -> "TrustStore":
        entries = frozenset((str(i), str(p)) for i, p in obj.get("entries", []))
        keys = {
            issuer: base64.b64decode(encoded)
            for issuer, encoded in obj.get("keys", {}).items()
        }
        return cls(
            trust=TrustList(owner=str(obj.get("owner", "")), entries=entries),
            pubkeys=keys,
            max_skew_seconds=int(obj.get("maxSkewSeconds", 300)),
        )

    def to_json(self) -> dict:
        return {
            "owner": self.trust.owner,
            "entries": sorted([i, p] for i, p in self.trust.entries),
            "keys": {
                issuer: base64.b64encode(key).decode("ascii")
                for issuer, key in sorted(self.pubkeys.items())
            },
            "maxSkewSeconds": self.max_skew_seconds,
        }

    @classmethod
    def load(cls, path: str) -> "TrustStore":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


class ClaimBag:
    """Claims indexed by (subject, property), each with a cached verification
    verdict computed once against a fixed trust store and clock. Evaluation
    asks the bag for trusted values; untrusted claims simply never answer."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[str, str], list[Claim]] = {}
        self._by_hash: dict[str, Claim] = {}
        self._verdicts: dict[str, ClaimVerdict] = {}

    @classmethod
    def build(
        cls,
        claims: Iterable[Claim],
        trust: TrustStore,
        clock: datetime,
    ) -> "ClaimBag":
        bag = cls()
        for claim in claims:
            bag.add(claim, verify_claim(claim, trust.trust, trust.pubkeys, clock))
        return bag

    def add(self, claim: Claim, verdict: ClaimVerdict) -> None:
        key = (claim.subject, claim.property)
        self._by_key.setdefault(key, []).append(claim)
        digest = claim.content_hash()
        self._by_hash[digest] = claim
        self._verdicts[digest] = verdict

    def claims_for(self, subject: str, property: str) -> list[Claim]:
        return list(self._by_key.get((subject, property), []))

    def by_hash(self, digest: str) -> Claim | None:
        return self._by_hash.get(digest)

    def verdict(self, claim: Claim) -> ClaimVerdict | None:
        return self._verdicts.get(claim.content_hash())

    def all_claims(self) -> list[Claim]:
        return list(self._by_hash.values())

    def trusted_value(self, subject: str, prop: str) -> tuple[Value, str] | None:
        """The evaluator's hook: the trusted claim's value for this subject
        and property, newest issuedAt first (hash breaks ties)."""
        candidates = [
            c
            for c in self._by_key.get((subject, prop), [])
            if self._verdicts[c.content_hash()].status is ClaimStatus.TRUSTED
        ]
        if not candidates:
            return None
        best = max(candidates, key=lambda c: (c.issued_at, c.content_hash()))
        return best.value, best.content_hash()


# --- claim server and client -------------------------------------------------------


def create_claim_app(claims: Iterable[Claim], bearer_token: str):
    """Minimal claim-server endpoint: POST /claims/query with a subject and a
    property list returns every matching claim. Requires the bearer token."""
    from fastapi import FastAPI, Header, HTTPException

    stock = list(claims)
    app = FastAPI(title="polity claim server")

    @app.post("/claims/query")
    def query(body: dict, authorization: str | None = Header(default=None)):
        if authorization != f"Bearer {bearer_token}":
            raise HTTPException(status_code=401, detail="invalid bearer token")
        subject = body.get("subject")
        properties = body.get("properties")
        if not isinstance(subject, str) or not isinstance(properties, list):
            raise HTTPException(status_code=400, detail="expected subject and properties[]")
        matches = [
            c.to_wire()
            for c in stock
            if c.subject == subject and c.property in properties
        ]
        return {"claims": matches}

    return app


class ClaimClient:
    """Client for the claim-server endpoint. Transport failures surface as
    ClaimUnavailableError, never as an empty success."""

    def __init__(self, base_url: str, token: str, client=None):
        self._base_url = base_url.rstrip("/")
        self._token = token
        self._client = client or httpx.Client(timeout=10.0)

    def fetch_claims(self, subject: str, properties: list[str]) -> list[Claim]:
        try:
            response = self._client.post(
                f"{self._base_url}/claims/query",
                json={"subject": subject, "properties": list(properties)},
                headers={"Authorization": f"Bearer {self._token}"},
            )
        except httpx.HTTPError as exc:
            raise ClaimUnavailableError(f"claim server unreachable: {exc}") from exc
        if response.status_code == 401:
            raise ClaimUnauthorizedError("claim server rejected the bearer token")
        if response.status_code >= 500:
            raise ClaimUnavailableError(f"claim server error {response.status_code}")
        if response.status_code != 200:
            raise ClaimUnavailableError(
                f"unexpected claim server response {response.status_code}"
            )
        body = response.json()
        return [Claim.from_wire(obj) for obj in body.get("claims", [])]
