"""DID documents, Ed25519 key custody, and the registrar/resolver.

A DID document is the digital twin of an asset or actor. Every mutation
is billed to the fixed-fee ledger, appends an immutable version whose
version_id hashes the canonical document bytes together with the previous
version_id, and must carry a signature that verifies against a key of the
immediately preceding version.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from random import Random
from typing import Callable, Iterable, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import (
    base58_decode,
    base58_encode,
    canonical_json_bytes,
    format_timestamp,
    parse_timestamp,
    sha256_hex,
    utc_now,
)
from .errors import (
    BadSeedLength,
    Deactivated,
    EmptyInput,
    EmptyWallet,
    MalformedDid,
    NotFound,
    Unauthorized,
    UnknownAccount,
    UnknownVersion,
)
from .ledger import Ledger, TxKind

# --- identifiers ------------------------------------------------------------

_DID_RE = re.compile(r"^did:([a-z0-9]+):([A-Za-z0-9._-]+)$")

DEFAULT_METHOD = "chain"
UNIQUE_ID_BYTES = 16


@dataclass(frozen=True)
class Did:
    method: str
    unique_id: str

    def text(self) -> str:
        return f"did:{self.method}:{self.unique_id}"

    def __str__(self) -> str:  # convenience for f-strings
        return self.text()

    @classmethod
    def parse(cls, text: str) -> "Did":
        m = _DID_RE.match(text)
        if not m:
            raise MalformedDid(text)
        return cls(method=m.group(1), unique_id=m.group(2))


def is_valid_did(text: str) -> bool:
    return bool(_DID_RE.match(text))


# --- keys and wallets ---------------------------------------------------------

SEED_BYTES = 32


@dataclass(frozen=True)
class KeyPair:
    """Deterministic Ed25519 key pair, reconstructible from its seed."""

    seed: bytes
    public_key: bytes  # 32 raw bytes

    def signer(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    def sign(self, payload: bytes) -> bytes:
        return self.signer().sign(payload)

    @property
    def public_base58(self) -> str:
        return base58_encode(self.public_key)


def generate_keypair(seed: bytes) -> KeyPair:
    """Derive an Ed25519 key pair from a 32-byte seed."""
    if len(seed) != SEED_BYTES:
        raise BadSeedLength(f"need {SEED_BYTES} bytes, got {len(seed)}")
    private = Ed25519PrivateKey.from_private_bytes(seed)
    public = private.public_key().public_bytes_raw()
    return KeyPair(seed=seed, public_key=public)


def random_keypair(rng: Random) -> KeyPair:
    return generate_keypair(rng.randbytes(SEED_BYTES))


def verify_signature(public_key: bytes, signature: bytes, payload: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
        return True
    except (InvalidSignature, ValueError):
        return False


class KeyCustody(str, Enum):
    """Where signing keys live relative to the service boundary."""

    INTERNAL_SECRET = "InternalSecret"        # service holds keys, signs on behalf
    CLIENT_MANAGED_SECRET = "ClientManagedSecret"  # only signatures cross the boundary


class Wallet:
    """Named Ed25519 key pairs owned by one account/actor."""

    def __init__(
        self,
        owner_account: str,
        *,
        mode: KeyCustody = KeyCustody.INTERNAL_SECRET,
        owner_did: Optional[Did] = None,
    ):
        self.owner_account = owner_account
        self.mode = mode
        self.owner_did = owner_did
        self._keys: dict[str, KeyPair] = {}

    def add_key(self, name: str, keypair: KeyPair) -> None:
        if name in self._keys:
            raise ValueError(f"key name already in use: {name}")
        self._keys[name] = keypair

    def key(self, name: Optional[str] = None) -> KeyPair:
        if not self._keys:
            raise EmptyWallet(self.owner_account)
        if name is None:
            return next(iter(self._keys.values()))
        if name not in self._keys:
            raise NotFound(f"no key named {name}")
        return self._keys[name]

    def key_names(self) -> list[str]:
        return list(self._keys)

    def sign(self, payload: bytes, key_name: Optional[str] = None) -> bytes:
        return self.key(key_name).sign(payload)

    def is_empty(self) -> bool:
        return not self._keys

    # --- persistence ---------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "owner_account": self.owner_account,
            "mode": self.mode.value,
            "owner_did": self.owner_did.text() if self.owner_did else None,
            "keys": {name: kp.seed.hex() for name, kp in self._keys.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "Wallet":
        wallet = cls(
            state["owner_account"],
            mode=KeyCustody(state["mode"]),
            owner_did=Did.parse(state["owner_did"]) if state["owner_did"] else None,
        )
        for name, seed_hex in state["keys"].items():
            wallet.add_key(name, generate_keypair(bytes.fromhex(seed_hex)))
        return wallet


# --- document model -----------------------------------------------------------

class ServiceType(str, Enum):
    EVENT_METADATA = "EventMetadata"
    COMPARTMENT = "Compartment"
    COMPARTMENT_MERKLE_ROOT = "CompartmentMerkleRoot"
    STATUS = "Status"


_STATUS_LITERALS = {"active", "withdrawn"}
_HEX_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class ServiceEntry:
    id: str                  # DID-URL fragment, unique within a document
    service_type: ServiceType
    endpoint: str            # Cid text, Did text, hex root, or status literal

    def __post_init__(self):
        if not self.id:
            raise ValueError("service entry id cannot be empty")
        if self.service_type is ServiceType.COMPARTMENT:
            if not is_valid_did(self.endpoint):
                raise MalformedDid(
                    f"Compartment endpoint is not a DID: {self.endpoint!r}"
                )
        elif self.service_type is ServiceType.STATUS:
            if self.endpoint not in _STATUS_LITERALS:
                raise ValueError(
                    f"Status endpoint must be one of {sorted(_STATUS_LITERALS)}"
                )
        elif self.service_type is ServiceType.COMPARTMENT_MERKLE_ROOT:
            if not _HEX_RE.match(self.endpoint):
                raise ValueError("CompartmentMerkleRoot endpoint must be a hex digest")
        elif self.service_type is ServiceType.EVENT_METADATA:
            if not _looks_like_cid(self.endpoint):
                raise ValueError(f"EventMetadata endpoint is not a CID: {self.endpoint!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "type": self.service_type.value,
            "serviceEndpoint": self.endpoint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceEntry":
        return cls(
            id=data["id"],
            service_type=ServiceType(data["type"]),
            endpoint=data["serviceEndpoint"],
        )


def _looks_like_cid(text: str) -> bool:
    """Cheap structural check: base58 multihash, sha2-256, 32-byte digest."""
    try:
        raw = base58_decode(text)
    except ValueError:
        return False
    return len(raw) == 34 and raw[0] == 0x12 and raw[1] == 0x20


@dataclass(frozen=True)
class VerificationMethod:
    id: str             # fragment, e.g. "key-1"
    controller: Did     # identity that owns this key
    public_key: bytes   # raw Ed25519 public bytes

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "controller": self.controller.text(),
            "publicKeyBase58": base58_encode(self.public_key),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationMethod":
        return cls(
            id=data["id"],
            controller=Did.parse(data["controller"]),
            public_key=base58_decode(data["publicKeyBase58"]),
        )


@dataclass(frozen=True)
class DidDocument:
    """Document body: the part that is hashed, signed, and billed."""

    id: Did
    controllers: tuple[Did, ...]
    verification_methods: tuple[VerificationMethod, ...]
    services: tuple[ServiceEntry, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id.text(),
            "controller": [c.text() for c in self.controllers],
            "verificationMethod": [m.to_dict() for m in self.verification_methods],
            "service": [s.to_dict() for s in self.services],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DidDocument":
        return cls(
            id=Did.parse(data["id"]),
            controllers=tuple(Did.parse(c) for c in data["controller"]),
            verification_methods=tuple(
                VerificationMethod.from_dict(m) for m in data["verificationMethod"]
            ),
            services=tuple(ServiceEntry.from_dict(s) for s in data["service"]),
        )

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    # --- derived views --------------------------------------------------------

    def services_of_type(self, service_type: ServiceType) -> list[ServiceEntry]:
        return [s for s in self.services if s.service_type is service_type]

    def service_by_id(self, entry_id: str) -> Optional[ServiceEntry]:
        for s in self.services:
            if s.id == entry_id:
                return s
        return None

    # --- mutation helpers (return new bodies; nothing commits here) -----------

    def with_services_added(self, entries: Iterable[ServiceEntry]) -> "DidDocument":
        new = self.services + tuple(entries)
        seen = set()
        for s in new:
            if s.id in seen:
                raise ValueError(f"duplicate service id: {s.id}")
            seen.add(s.id)
        return DidDocument(self.id, self.controllers, self.verification_methods, new)

    def with_controller_replaced(
        self,
        new_controller: Did,
        new_methods: Iterable[VerificationMethod],
    ) -> "DidDocument":
        methods = tuple(new_methods)
        return DidDocument(self.id, (new_controller,), methods, self.services)


@dataclass(frozen=True)
class DocumentMetadata:
    created: datetime
    updated: datetime
    version_id: str
    previous_version_id: Optional[str]
    deactivated: bool = False

    def to_dict(self) -> dict:
        data = {
            "created": format_timestamp(self.created),
            "updated": format_timestamp(self.updated),
            "versionId": self.version_id,
            "deactivated": self.deactivated,
        }
        if self.previous_version_id is not None:
            data["previousVersionId"] = self.previous_version_id
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DocumentMetadata":
        return cls(
            created=parse_timestamp(data["created"]),
            updated=parse_timestamp(data["updated"]),
            version_id=data["versionId"],
            previous_version_id=data.get("previousVersionId"),
            deactivated=data["deactivated"],
        )


def compute_version_id(body_bytes: bytes, previous_version_id: Optional[str]) -> str:
    """version_id = hex SHA-256(canonical body bytes || previous version_id)."""
    tail = previous_version_id.encode("utf-8") if previous_version_id else b""
    return sha256_hex(body_bytes + tail)


def signing_payload(body_bytes: bytes, previous_version_id: Optional[str]) -> bytes:
    """Bytes a controller signs to authorize committing ``body_bytes``.

    Binding the previous version_id prevents replaying an old signature
    against a different chain position.
    """
    tail = previous_version_id.encode("utf-8") if previous_version_id else b""
    return body_bytes + tail


# --- sizing ---------------------------------------------------------------
# The ledger bills a structured payload size rather than raw canonical bytes:
# a fixed document baseline plus a fixed increment per Compartment entry.
# Raw canonical bytes stay below the billed figure in practice.


@dataclass(frozen=True)
class SizingModel:
    baseline_bytes: int = 1075
    compartment_entry_bytes: int = 256

    def billable_size(self, document: DidDocument) -> int:
        compartments = len(document.services_of_type(ServiceType.COMPARTMENT))
        return self.baseline_bytes + self.compartment_entry_bytes * compartments


# --- registrar / resolver -----------------------------------------------------


@dataclass
class _VersionRecord:
    body_bytes: bytes        # exact canonical bytes committed
    metadata: DocumentMetadata


@dataclass
class _DocumentRecord:
    payer: str
    versions: list[_VersionRecord] = field(default_factory=list)


class Registrar:
    """Creates, mutates, and resolves DID documents against the fee ledger."""

    def __init__(
        self,
        ledger: Ledger,
        *,
        method: str = DEFAULT_METHOD,
        sizing: Optional[SizingModel] = None,
        clock: Callable[[], datetime] = utc_now,
        rng: Optional[Random] = None,
    ):
        self.ledger = ledger
        self.method = method
        self.sizing = sizing or SizingModel()
        self._clock = clock
        self._rng = rng or Random()
        self._documents: dict[str, _DocumentRecord] = {}
        self._creation_order: list[str] = []
        self._lock = threading.Lock()

    # --- minting -----------------------------------------------------------

    def mint_did(self) -> Did:
        """Generate a fresh DID; collision chance is negligible but checked."""
        while True:
            uid = base58_encode(self._rng.randbytes(UNIQUE_ID_BYTES))
            did = Did(self.method, uid)
            if did.text() not in self._documents:
                return did

    # --- writes ------------------------------------------------------------

    def create_did(
        self,
        wallet: Wallet,
        initial_services: Iterable[ServiceEntry] = (),
        payer: Optional[str] = None,
        *,
        did: Optional[Did] = None,
    ) -> tuple[Did, DidDocument]:
        """Create a new self-controlled document; bills one Create.

        The wallet's primary key becomes the document's verification method;
        its controller field names the wallet owner so linkage checks can
        attribute commits to an actor identity. Callers that must reference
        the DID before committing (event records do) premint via ``mint_did``
        and pass it in.
        """
        if wallet.is_empty():
            raise EmptyWallet(wallet.owner_account)
        payer = payer or wallet.owner_account
        with self._lock:
            if did is None:
                did = self.mint_did()
            elif did.text() in self._documents:
                raise ValueError(f"document already exists: {did.text()}")
            key_owner = wallet.owner_did or did
            body = DidDocument(
                id=did,
                controllers=(did,),
                verification_methods=(
                    VerificationMethod("key-1", key_owner, wallet.key().public_key),
                ),
                services=tuple(initial_services),
            )
            self._commit(did, body, kind=TxKind.CREATE, payer=payer, bill=True)
            return did, body

    def create_actor_did(self, wallet: Wallet, owner_account: str) -> Did:
        """Register an actor identity document. Fixture provisioning: no fee."""
        if wallet.is_empty():
            raise EmptyWallet(owner_account)
        with self._lock:
            did = self.mint_did()
            body = DidDocument(
                id=did,
                controllers=(did,),
                verification_methods=(
                    VerificationMethod("key-1", did, wallet.key().public_key),
                ),
            )
            self._commit(did, body, kind=TxKind.CREATE, payer=owner_account, bill=False)
            wallet.owner_did = did
            return did

    def update_did(
        self,
        did: Did,
        new_body: DidDocument,
        signature: bytes,
        payer: str,
    ) -> DocumentMetadata:
        """Commit a new document version authorized by the previous one."""
        with self._lock:
            return self._mutate(did, new_body, signature, payer, TxKind.UPDATE)

    def handover_controller(
        self,
        did: Did,
        new_controller: Did,
        new_methods: Iterable[VerificationMethod],
        signature: bytes,
        payer: str,
    ) -> DocumentMetadata:
        """Replace the controller set and verification methods in one update."""
        methods = tuple(new_methods)
        if not methods:
            raise EmptyInput("handover requires at least one verification method")
        with self._lock:
            record = self._require(did)
            current = DidDocument.from_dict(
                parse_json_bytes_cached(record.versions[-1].body_bytes)
            )
            new_body = current.with_controller_replaced(new_controller, methods)
            return self._mutate(did, new_body, signature, payer, TxKind.UPDATE)

    def deactivate_did(self, did: Did, signature: bytes, payer: str) -> DocumentMetadata:
        """Mark the document deactivated; bills one Deactivate."""
        with self._lock:
            record = self._require(did)
            latest = record.versions[-1]
            if latest.metadata.deactivated:
                raise Deactivated(did.text())
            body = DidDocument.from_dict(parse_json_bytes_cached(latest.body_bytes))
            self._check_signature(record, body.canonical_bytes(), signature)
            self.ledger.submit(
                TxKind.DEACTIVATE, payer, self.sizing.billable_size(body)
            )
            return self._append_version(record, body, deactivated=True)

    # --- shared commit path --------------------------------------------------

    def _mutate(
        self,
        did: Did,
        new_body: DidDocument,
        signature: bytes,
        payer: str,
        kind: TxKind,
    ) -> DocumentMetadata:
        record = self._require(did)
        if record.versions[-1].metadata.deactivated:
            raise Deactivated(did.text())
        if new_body.id != did:
            raise ValueError("proposed body carries a different DID")
        if not new_body.controllers:
            raise EmptyInput("document must keep at least one controller")
        if not new_body.verification_methods:
            raise EmptyInput("document must keep at least one verification method")
        self._check_signature(record, new_body.canonical_bytes(), signature)
        self.ledger.submit(kind, payer, self.sizing.billable_size(new_body))
        return self._append_version(record, new_body, deactivated=False)

    def _check_signature(
        self, record: _DocumentRecord, body_bytes: bytes, signature: bytes
    ) -> None:
        """A mutation must be signed by a key of the immediately preceding version."""
        previous = record.versions[-1]
        payload = signing_payload(body_bytes, previous.metadata.version_id)
        prev_body = DidDocument.from_dict(parse_json_bytes_cached(previous.body_bytes))
        for method in prev_body.verification_methods:
            if verify_signature(method.public_key, signature, payload):
                return
        raise Unauthorized("signature does not match any controlling key")

    def _commit(
        self, did: Did, body: DidDocument, *, kind: TxKind, payer: str, bill: bool
    ) -> DocumentMetadata:
        if bill:
            self.ledger.submit(kind, payer, self.sizing.billable_size(body))
        record = _DocumentRecord(payer=payer)
        self._documents[did.text()] = record
        self._creation_order.append(did.text())
        return self._append_version(record, body, deactivated=False)

    def _append_version(
        self, record: _DocumentRecord, body: DidDocument, *, deactivated: bool
    ) -> DocumentMetadata:
        body_bytes = body.canonical_bytes()
        previous = record.versions[-1].metadata if record.versions else None
        now = self._clock()
        metadata = DocumentMetadata(
            created=previous.created if previous else now,
            updated=now,
            version_id=compute_version_id(
                body_bytes, previous.version_id if previous else None
            ),
            previous_version_id=previous.version_id if previous else None,
            deactivated=deactivated,
        )
        record.versions.append(_VersionRecord(body_bytes, metadata))
        return metadata

    # --- reads ---------------------------------------------------------------

    def _require(self, did: Did) -> _DocumentRecord:
        record = self._documents.get(did.text())
        if record is None:
            raise NotFound(did.text())
        return record

    def resolve(self, did: Did) -> tuple[DidDocument, DocumentMetadata]:
        """Latest version of the document, deactivated or not."""
        record = self._require(did)
        latest = record.versions[-1]
        return (
            DidDocument.from_dict(parse_json_bytes_cached(latest.body_bytes)),
            latest.metadata,
        )

    def resolve_text(self, did_text: str) -> tuple[DidDocument, DocumentMetadata]:
        return self.resolve(Did.parse(did_text))

    def resolve_version(self, did: Did, version_id: str) -> DidDocument:
        record = self._require(did)
        for version in record.versions:
            if version.metadata.version_id == version_id:
                return DidDocument.from_dict(parse_json_bytes_cached(version.body_bytes))
        raise UnknownVersion(version_id)

    def list_versions(self, did: Did) -> list[DocumentMetadata]:
        record = self._require(did)
        return [v.metadata for v in record.versions]

    def list_dids(self, owner: str) -> list[Did]:
        """DIDs created on behalf of ``owner``, in creation order."""
        if not self.ledger.has_account(owner):
            raise UnknownAccount(owner)
        return [
            Did.parse(text)
            for text in self._creation_order
            if self._documents[text].payer == owner
        ]

    def all_dids(self) -> list[Did]:
        return [Did.parse(text) for text in self._creation_order]

    def exists(self, did: Did) -> bool:
        return did.text() in self._documents

    def version_records(self, did: Did) -> list[tuple[bytes, DocumentMetadata]]:
        """Raw committed bytes plus metadata, for chain verification."""
        record = self._require(did)
        return [(v.body_bytes, v.metadata) for v in record.versions]

    def tamper_version(self, did: Did, index: int, body_bytes: bytes) -> None:
        """Overwrite stored version bytes in place. Test hook for integrity checks."""
        record = self._require(did)
        record.versions[index].body_bytes = body_bytes

    # --- persistence -----------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "method": self.method,
            "sizing": {
                "baseline_bytes": self.sizing.baseline_bytes,
                "compartment_entry_bytes": self.sizing.compartment_entry_bytes,
            },
            "documents": {
                text: {
                    "payer": rec.payer,
                    "versions": [
                        {
                            "body": v.body_bytes.decode("utf-8"),
                            "metadata": v.metadata.to_dict(),
                        }
                        for v in rec.versions
                    ],
                }
                for text, rec in self._documents.items()
            },
            "creation_order": list(self._creation_order),
            "rng_state": _rng_state_to_json(self._rng),
        }

    @classmethod
    def from_state(
        cls,
        state: dict,
        ledger: Ledger,
        *,
        clock: Callable[[], datetime] = utc_now,
    ) -> "Registrar":
        registrar = cls(
            ledger,
            method=state["method"],
            sizing=SizingModel(**state["sizing"]),
            clock=clock,
        )
        for text, rec in state["documents"].items():
            record = _DocumentRecord(payer=rec["payer"])
            for v in rec["versions"]:
                record.versions.append(
                    _VersionRecord(
                        body_bytes=v["body"].encode("utf-8"),
                        metadata=DocumentMetadata.from_dict(v["metadata"]),
                    )
                )
            registrar._documents[text] = record
        registrar._creation_order = list(state["creation_order"])
        _rng_state_from_json(registrar._rng, state["rng_state"])
        return registrar


# --- helpers -------------------------------------------------------------------


def parse_json_bytes_cached(data: bytes) -> dict:
    # Parsing committed bytes is hot (every resolve); no cache yet, but the
    # hook point is centralized so one can be added without touching callers.
    return json.loads(data.decode("utf-8"))


def _rng_state_to_json(rng: Random) -> list:
    version, internal, gauss = rng.getstate()
    return [version, list(internal), gauss]


def _rng_state_from_json(rng: Random, data: list) -> None:
    version, internal, gauss = data
    rng.setstate((version, tuple(internal), gauss))
