"""Error vocabulary shared by every provchain module.

Each error class doubles as a wire-level error code: gateways and the CLI
report ``type(exc).__name__`` verbatim, so class names are part of the
public contract and must stay stable.
"""

from __future__ import annotations


class ProvChainError(Exception):
    """Base class for every domain error raised by this package."""

    @property
    def error_code(self) -> str:
        return type(self).__name__


# --- ledger ---------------------------------------------------------------

class UnknownAccount(ProvChainError):
    """Payer account has never been created."""


class InsufficientBalance(ProvChainError):
    """Account balance does not cover the operation fee."""


class PayloadTooLarge(ProvChainError):
    """Payload exceeds the registry's block size limit."""


# --- identity -------------------------------------------------------------

class MalformedDid(ProvChainError):
    """String does not parse as did:<method>:<unique_id>."""


class BadSeedLength(ProvChainError):
    """Key seed must be exactly 32 bytes."""


class EmptyWallet(ProvChainError):
    """Wallet holds no key pairs."""


class Unauthorized(ProvChainError):
    """Signature missing or not valid for any controlling key."""


class Deactivated(ProvChainError):
    """Document has been deactivated; no further mutations allowed."""


class NotFound(ProvChainError):
    """No such DID, object, or resource."""


class UnknownVersion(ProvChainError):
    """version_id does not appear in the document's history."""


# --- store ----------------------------------------------------------------

class MalformedRecord(ProvChainError):
    """Event record violates its structural rules."""


class IntegrityViolation(ProvChainError):
    """Stored bytes, a version chain, or a Merkle commitment fail to verify."""


# --- events ---------------------------------------------------------------

class NotController(ProvChainError):
    """Acting party does not control the asset document."""


class WrongState(ProvChainError):
    """Event is not admissible from the asset's current state."""


class CompartmentLimitExceeded(ProvChainError):
    """Compartment count exceeds the configured per-transaction limit."""


class EmptyInput(ProvChainError):
    """An input collection that must be non-empty was empty."""


# --- costing / analysis ---------------------------------------------------

class UnknownRole(ProvChainError):
    """Stakeholder role is not one of the five supply chain roles."""


class DegenerateInput(ProvChainError):
    """Regression input has fewer than two distinct x values."""


# --- scenario / gateway / cli ----------------------------------------------

class MalformedScript(ProvChainError):
    """Scenario script fails schema or reference validation."""


class InvalidToken(ProvChainError):
    """Bearer token missing or not in the gateway's token table."""


class SigningRefused(ProvChainError):
    """Account keys are client-managed; the gateway will not sign for it."""


class ConfigInvalid(ProvChainError):
    """Service configuration failed validation."""


class BindFailure(ProvChainError):
    """Gateway could not bind its listen address."""
