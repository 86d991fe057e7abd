"""Exception types shared across the engine."""
from __future__ import annotations


class PolityError(Exception):
    """Base class for all engine errors."""


class DanglingEntityRefError(PolityError):
    """An entity reference does not resolve in the store."""

    def __init__(self, entity_id: str):
        super().__init__(f"entity reference does not resolve: {entity_id}")
        self.entity_id = entity_id


class MissingAttributeError(PolityError):
    """An attribute is absent from both the store and the claim bag."""

    def __init__(self, entity_id: str, attribute: str):
        super().__init__(f"attribute {attribute!r} missing on {entity_id}")
        self.entity_id = entity_id
        self.attribute = attribute


class SchemaViolationError(PolityError):
    """An entity or value breaks a declared schema or enum."""


class ArityMismatchError(PolityError):
    """Wrong number of arguments supplied to a policy."""


class KindMismatchError(PolityError):
    """An argument entity has the wrong kind for a policy parameter."""


class StepBudgetExceededError(PolityError):
    """Evaluation exceeded its declared step budget."""


class DomainTooLargeError(PolityError):
    """Exhaustive analysis refused: the argument tuple space is over budget."""


class EnvelopeError(PolityError):
    """A proof envelope violates its construction invariants."""


class ClaimUnavailableError(PolityError):
    """A claim server could not be reached; never reported as empty-success."""


class ClaimUnauthorizedError(PolityError):
    """The claim server rejected the client's bearer credential."""


class UpstreamUnavailableError(PolityError):
    """The guarded upstream call failed (network or 5xx)."""
