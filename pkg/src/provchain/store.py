"""Content-addressed storage for supply chain event records.

Objects are addressed by a multihash-style CID: base58(0x12 0x20 || sha256).
Reads always re-hash the stored bytes, so any corruption surfaces as an
IntegrityViolation at the moment of access, never as silent bad data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

from .canonical import (
    base58_decode,
    base58_encode,
    canonical_json_bytes,
    format_timestamp,
    parse_json_bytes,
    parse_timestamp,
    sha256,
)
from .errors import IntegrityViolation, MalformedRecord, NotFound
from .identity import Did, Registrar, ServiceType, verify_signature

_MULTIHASH_SHA256 = 0x12
_DIGEST_LENGTH = 0x20


@dataclass(frozen=True)
class Cid:
    """Content identifier: sha2-256 multihash rendered in base58."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValueError("CID digest must be 32 bytes")

    def text(self) -> str:
        return base58_encode(bytes((_MULTIHASH_SHA256, _DIGEST_LENGTH)) + self.digest)

    def __str__(self) -> str:
        return self.text()

    @classmethod
    def parse(cls, text: str) -> "Cid":
        try:
            raw = base58_decode(text)
        except ValueError as exc:
            raise MalformedRecord(f"not a CID: {text!r}") from exc
        if len(raw) != 34 or raw[0] != _MULTIHASH_SHA256 or raw[1] != _DIGEST_LENGTH:
            raise MalformedRecord(f"not a sha2-256 multihash CID: {text!r}")
        return cls(digest=raw[2:])


def cid_of(data: bytes) -> Cid:
    return Cid(digest=sha256(data))


# --- event records -------------------------------------------------------------


class EventType(str, Enum):
    PRODUCE = "Produce"
    SHIP = "Ship"
    RECEIVE = "Receive"
    MANUFACTURE = "Manufacture"
    WITHDRAW = "Withdraw"


@dataclass(frozen=True)
class IssuerSignature:
    signer: Did
    signature: bytes

    def to_dict(self) -> dict:
        return {"signer": self.signer.text(), "signature": self.signature.hex()}

    @classmethod
    def from_dict(cls, data: dict) -> "IssuerSignature":
        return cls(Did.parse(data["signer"]), bytes.fromhex(data["signature"]))


@dataclass(frozen=True)
class EventRecord:
    """One supply chain event, serialized canonically for content addressing."""

    event_type: EventType
    asset_did: Did
    actor_did: Did
    timestamp: datetime
    attributes: dict = field(default_factory=dict)
    counterparty_did: Optional[Did] = None
    compartments: tuple[Did, ...] = ()
    issuer_signature: Optional[IssuerSignature] = None

    def __post_init__(self):
        if self.event_type is EventType.MANUFACTURE:
            if not self.compartments:
                raise MalformedRecord("Manufacture record requires compartments")
        elif self.compartments:
            raise MalformedRecord(
                f"{self.event_type.value} record must not list compartments"
            )
        if self.event_type in (EventType.SHIP, EventType.RECEIVE):
            if self.counterparty_did is None:
                raise MalformedRecord(
                    f"{self.event_type.value} record requires a counterparty"
                )
        for key, value in self.attributes.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise MalformedRecord("attributes must map strings to strings")

    def to_dict(self, *, include_signature: bool = True) -> dict:
        data: dict = {
            "eventType": self.event_type.value,
            "assetDid": self.asset_did.text(),
            "actorDid": self.actor_did.text(),
            "timestamp": format_timestamp(self.timestamp),
            "attributes": dict(self.attributes),
        }
        if self.counterparty_did is not None:
            data["counterpartyDid"] = self.counterparty_did.text()
        if self.compartments:
            data["compartments"] = [c.text() for c in self.compartments]
        if include_signature and self.issuer_signature is not None:
            data["issuerSignature"] = self.issuer_signature.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EventRecord":
        try:
            return cls(
                event_type=EventType(data["eventType"]),
                asset_did=Did.parse(data["assetDid"]),
                actor_did=Did.parse(data["actorDid"]),
                timestamp=parse_timestamp(data["timestamp"]),
                attributes=dict(data.get("attributes", {})),
                counterparty_did=(
                    Did.parse(data["counterpartyDid"])
                    if "counterpartyDid" in data
                    else None
                ),
                compartments=tuple(
                    Did.parse(c) for c in data.get("compartments", ())
                ),
                issuer_signature=(
                    IssuerSignature.from_dict(data["issuerSignature"])
                    if "issuerSignature" in data
                    else None
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(str(exc)) from exc

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    def signing_payload(self) -> bytes:
        """Bytes an external issuer signs: the record without its signature."""
        return canonical_json_bytes(self.to_dict(include_signature=False))

    def cid(self) -> Cid:
        return cid_of(self.canonical_bytes())


# --- object stores ---------------------------------------------------------------


class ObjectStore(Protocol):
    def put(self, record: EventRecord) -> Cid: ...
    def get(self, cid: Cid) -> EventRecord: ...
    def has(self, cid: Cid) -> bool: ...
    def cids(self) -> list[Cid]: ...
    def get_bytes(self, cid: Cid) -> bytes: ...


class _BaseStore:
    """Shared put/get semantics over a raw byte backend."""

    def put(self, record: EventRecord) -> Cid:
        data = record.canonical_bytes()
        cid = cid_of(data)
        if self._read(cid.text()) is None:
            self._write(cid.text(), data)
        return cid

    def get(self, cid: Cid) -> EventRecord:
        data = self.get_bytes(cid)
        return EventRecord.from_dict(parse_json_bytes(data))

    def get_bytes(self, cid: Cid) -> bytes:
        data = self._read(cid.text())
        if data is None:
            raise NotFound(cid.text())
        if sha256(data) != cid.digest:
            raise IntegrityViolation(f"stored bytes do not match {cid.text()}")
        return data

    def has(self, cid: Cid) -> bool:
        return self._read(cid.text()) is not None

    def verify_all(self) -> int:
        """Re-hash every object; returns the count. Raises on first mismatch."""
        count = 0
        for cid in self.cids():
            self.get_bytes(cid)
            count += 1
        return count

    # backend hooks -------------------------------------------------------

    def _read(self, key: str) -> Optional[bytes]:
        raise NotImplementedError

    def _write(self, key: str, data: bytes) -> None:
        raise NotImplementedError

    def cids(self) -> list[Cid]:
        raise NotImplementedError


class MemoryObjectStore(_BaseStore):
    def __init__(self):
        self._objects: dict[str, bytes] = {}

    def _read(self, key: str) -> Optional[bytes]:
        return self._objects.get(key)

    def _write(self, key: str, data: bytes) -> None:
        self._objects[key] = data

    def cids(self) -> list[Cid]:
        return [Cid.parse(text) for text in self._objects]

    def corrupt(self, cid: Cid, data: bytes) -> None:
        """Overwrite stored bytes in place. Test hook for integrity checks."""
        self._objects[cid.text()] = data

    def __len__(self) -> int:
        return len(self._objects)


class DirectoryObjectStore(_BaseStore):
    """One file per object, named by CID text."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key

    def _read(self, key: str) -> Optional[bytes]:
        path = self._path(key)
        if not path.is_file():
            return None
        return path.read_bytes()

    def _write(self, key: str, data: bytes) -> None:
        tmp = self._path(key + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, self._path(key))

    def cids(self) -> list[Cid]:
        return [
            Cid.parse(p.name)
            for p in sorted(self.root.iterdir())
            if p.is_file() and not p.name.endswith(".tmp")
        ]

    def __len__(self) -> int:
        return sum(1 for _ in self.root.iterdir())


# --- linkage verification ---------------------------------------------------------


class LinkageVerdict(str, Enum):
    TRUSTED_BY_LINKAGE = "trusted-by-linkage"  # linked by the then-current controller
    TRUSTED = "trusted"                        # third-party record, valid issuer signature
    UNTRUSTED = "untrusted"                    # third-party record, missing/bad signature


def verify_linkage(
    store: ObjectStore,
    registrar: Registrar,
    did: Did,
    record_cid: Cid,
) -> LinkageVerdict:
    """Classify how much trust a linked event record carries.

    The authority for a link is evaluated at link-commit time: the version
    that introduced the EventMetadata entry was authorized by the keys of
    its predecessor (or by itself, for version 1). If the record's actor is
    among those key controllers, the link itself vouches for the record.
    Otherwise the record must carry a valid signature from its issuer.
    """
    versions = registrar.version_records(did)
    cid_text = record_cid.text()
    link_index = None
    for index, (body_bytes, _meta) in enumerate(versions):
        body = _body_from_bytes(body_bytes)
        for entry in body.services_of_type(ServiceType.EVENT_METADATA):
            if entry.endpoint == cid_text:
                link_index = index
                break
        if link_index is not None:
            break
    if link_index is None:
        raise NotFound(f"{cid_text} is not linked from {did.text()}")

    authorizing_bytes = versions[link_index - 1][0] if link_index > 0 else versions[0][0]
    authorizing = _body_from_bytes(authorizing_bytes)
    authority = {m.controller for m in authorizing.verification_methods}

    record = store.get(record_cid)
    if record.actor_did in authority:
        return LinkageVerdict.TRUSTED_BY_LINKAGE

    if record.issuer_signature is None:
        return LinkageVerdict.UNTRUSTED
    if record.issuer_signature.signer != record.actor_did:
        return LinkageVerdict.UNTRUSTED
    try:
        issuer_doc, _ = registrar.resolve(record.actor_did)
    except NotFound:
        return LinkageVerdict.UNTRUSTED
    payload = record.signing_payload()
    for method in issuer_doc.verification_methods:
        if verify_signature(
            method.public_key, record.issuer_signature.signature, payload
        ):
            return LinkageVerdict.TRUSTED
    return LinkageVerdict.UNTRUSTED


def _body_from_bytes(body_bytes: bytes):
    from .identity import DidDocument

    return DidDocument.from_dict(parse_json_bytes(body_bytes))
