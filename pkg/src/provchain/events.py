"""Supply chain event engine over DID documents and the fee ledger.

Four event families mutate asset documents: produce, ship (which fuses the
controller handover), receive, and manufacture (which consumes compartments
into a new product). Withdraw retires an asset. Admissible per-asset
sequences follow ``Produce (Ship Receive)* [consume | Withdraw]?``; anything
else raises WrongState.

Ledger op accounting is exact and load-bearing for the costing layer:
every produce is one Create, every ship/receive/withdraw is one Update,
every manufacture is one Create plus one consume Update per unique
compartment (zero in lean receiving mode), and withdraw with deactivation
adds one Deactivate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from random import Random
from typing import Callable, Optional, Sequence

from .canonical import utc_now
from .errors import (
    CompartmentLimitExceeded,
    Deactivated,
    EmptyInput,
    InsufficientBalance,
    NotController,
    NotFound,
    WrongState,
)
from .identity import (
    DEFAULT_METHOD,
    Did,
    DidDocument,
    DocumentMetadata,
    KeyCustody,
    Registrar,
    ServiceEntry,
    ServiceType,
    SizingModel,
    VerificationMethod,
    Wallet,
    generate_keypair,
    parse_json_bytes_cached,
    random_keypair,
    signing_payload,
)
from .ledger import Ledger, LedgerConfig, TxKind
from .merkle import build_compartment_merkle
from .store import Cid, EventRecord, EventType, MemoryObjectStore, ObjectStore


class Role(str, Enum):
    PRODUCER = "Producer"
    SUPPLIER = "Supplier"
    MANUFACTURER = "Manufacturer"
    RETAILER = "Retailer"
    CUSTOMER = "Customer"


class CommitMode(str, Enum):
    """How a product commits its compartment list."""

    SERVICE_LIST = "ServiceList"   # one Compartment entry per input DID
    MERKLE_ROOT = "MerkleRoot"     # single root entry; list lives in the record


class AssetKind(str, Enum):
    RAW_MATERIAL = "RawMaterial"
    PRODUCT = "Product"


class AssetStatus(str, Enum):
    PRODUCED = "Produced"
    IN_TRANSIT = "InTransit"
    RECEIVED = "Received"
    CONSUMED = "Consumed"
    WITHDRAWN = "Withdrawn"


@dataclass
class Actor:
    alias: str
    role: Role
    did: Did
    wallet: Wallet
    account: str


@dataclass(frozen=True)
class AssetState:
    """Latest-state projection of one asset, derived from a single document."""

    did: Did
    kind: AssetKind
    current_controller: Did
    status: AssetStatus
    event_cids: tuple[Cid, ...]  # order matches the document's event entries

    def to_dict(self) -> dict:
        return {
            "did": self.did.text(),
            "kind": self.kind.value,
            "currentController": self.current_controller.text(),
            "status": self.status.value,
            "eventCids": [c.text() for c in self.event_cids],
        }


# --- service entry conventions -------------------------------------------------
# Event entries encode their ordinal and event type in the fragment id so the
# latest state is projectible from one resolve, without fetching any records.

_EVENT_PREFIX = "event-"
_COMPARTMENT_PREFIX = "compartment-"
CONSUMED_INTO_ID = "consumed-into"
ROOT_ENTRY_ID = "compartment-root"
STATUS_ENTRY_ID = "status"


def event_entry_id(index: int, event_type: EventType) -> str:
    return f"{_EVENT_PREFIX}{index}-{event_type.value.lower()}"


def parse_event_entry_id(entry_id: str) -> tuple[int, EventType]:
    body = entry_id[len(_EVENT_PREFIX):]
    index_text, _, tag = body.partition("-")
    return int(index_text), EventType(tag.capitalize())


def event_entries(document: DidDocument) -> list[ServiceEntry]:
    return [
        s
        for s in document.services
        if s.service_type is ServiceType.EVENT_METADATA
        and s.id.startswith(_EVENT_PREFIX)
    ]


def forward_compartment_entries(document: DidDocument) -> list[ServiceEntry]:
    """Compartment links pointing down the composition tree (not back-links)."""
    return [
        s
        for s in document.services
        if s.service_type is ServiceType.COMPARTMENT
        and s.id.startswith(_COMPARTMENT_PREFIX)
    ]


def project_asset_state(
    document: DidDocument, metadata: DocumentMetadata
) -> AssetState:
    """Derive kind, controller, status, and event CIDs from one document."""
    entries = event_entries(document)
    if not entries:
        raise NotFound(f"{document.id.text()} names no supply chain events")
    first_index, first_type = parse_event_entry_id(entries[0].id)
    kind = (
        AssetKind.PRODUCT
        if first_type is EventType.MANUFACTURE
        else AssetKind.RAW_MATERIAL
    )
    controller = document.verification_methods[0].controller

    status_entry = document.service_by_id(STATUS_ENTRY_ID)
    if metadata.deactivated or (
        status_entry is not None and status_entry.endpoint == "withdrawn"
    ):
        status = AssetStatus.WITHDRAWN
    elif document.service_by_id(CONSUMED_INTO_ID) is not None:
        status = AssetStatus.CONSUMED
    else:
        _, last_type = parse_event_entry_id(entries[-1].id)
        status = {
            EventType.PRODUCE: AssetStatus.PRODUCED,
            EventType.MANUFACTURE: AssetStatus.PRODUCED,
            EventType.SHIP: AssetStatus.IN_TRANSIT,
            EventType.RECEIVE: AssetStatus.RECEIVED,
            EventType.WITHDRAW: AssetStatus.WITHDRAWN,
        }[last_type]
    return AssetState(
        did=document.id,
        kind=kind,
        current_controller=controller,
        status=status,
        event_cids=tuple(Cid.parse(e.endpoint) for e in entries),
    )


# --- engine configuration --------------------------------------------------------


@dataclass(frozen=True)
class EngineConfig:
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    sizing: SizingModel = field(default_factory=SizingModel)
    method: str = DEFAULT_METHOD
    commit_mode_default: CommitMode = CommitMode.SERVICE_LIST
    # Lean receiving: consume compartments straight out of transit, skip all
    # per-compartment updates, log receivables only in the Manufacture record.
    lean_receiving: bool = False
    # Compatibility guard mirroring registries that reject very wide creates.
    max_compartments_per_tx: Optional[int] = None


DEFAULT_ACTOR_BALANCE = 100_000


class SupplyChainEngine:
    """Owns the ledger, registrar, and object store; executes supply chain events."""

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        *,
        seed: Optional[int] = None,
        clock: Callable[[], datetime] = utc_now,
        store: Optional[ObjectStore] = None,
    ):
        self.config = config or EngineConfig()
        self.clock = clock
        self.rng = Random(seed)
        self.ledger = Ledger(self.config.ledger, clock=clock)
        self.registrar = Registrar(
            self.ledger,
            method=self.config.method,
            sizing=self.config.sizing,
            clock=clock,
            rng=self.rng,
        )
        self.store: ObjectStore = store if store is not None else MemoryObjectStore()
        self.actors: dict[str, Actor] = {}

    # --- actors ---------------------------------------------------------------

    def register_actor(
        self,
        alias: str,
        role: Role,
        *,
        balance: int = DEFAULT_ACTOR_BALANCE,
        seed: Optional[bytes] = None,
        mode: KeyCustody = KeyCustody.INTERNAL_SECRET,
    ) -> Actor:
        """Provision an actor: funded account, wallet, fee-free identity document."""
        if alias in self.actors:
            raise ValueError(f"actor alias already registered: {alias}")
        self.ledger.create_account(alias, balance)
        wallet = Wallet(alias, mode=mode)
        keypair = generate_keypair(seed) if seed is not None else random_keypair(self.rng)
        wallet.add_key("key-1", keypair)
        did = self.registrar.create_actor_did(wallet, alias)
        actor = Actor(alias=alias, role=role, did=did, wallet=wallet, account=alias)
        self.actors[alias] = actor
        return actor

    def actor(self, alias: str) -> Actor:
        if alias not in self.actors:
            raise NotFound(f"no actor registered as {alias!r}")
        return self.actors[alias]

    def actor_by_account(self, account: str) -> Actor:
        for actor in self.actors.values():
            if actor.account == account:
                return actor
        raise NotFound(f"no actor bound to account {account!r}")

    # --- events ----------------------------------------------------------------

    def produce(self, actor: Actor, attributes: Optional[dict] = None) -> tuple[Did, Cid]:
        """Mint a raw material asset. One ledger Create."""
        asset_did = self.registrar.mint_did()
        record = EventRecord(
            event_type=EventType.PRODUCE,
            asset_did=asset_did,
            actor_did=actor.did,
            timestamp=self.clock(),
            attributes=dict(attributes or {}),
        )
        cid = record.cid()
        entry = ServiceEntry(
            event_entry_id(0, EventType.PRODUCE),
            ServiceType.EVENT_METADATA,
            cid.text(),
        )
        self.registrar.create_did(
            actor.wallet, (entry,), actor.account, did=asset_did
        )
        self.store.put(record)
        return asset_did, cid

    def ship(
        self,
        actor: Actor,
        asset: Did,
        recipient: Actor,
        attributes: Optional[dict] = None,
    ) -> Cid:
        """Hand an asset over to ``recipient``. One ledger Update.

        The handover is fused into the same document version as the event
        link: controllers and verification methods flip to the recipient.
        """
        document, metadata, state = self._resolve_asset(asset)
        self._require_controller(actor, state)
        self._require_status(state, (AssetStatus.PRODUCED, AssetStatus.RECEIVED))
        record = EventRecord(
            event_type=EventType.SHIP,
            asset_did=asset,
            actor_did=actor.did,
            timestamp=self.clock(),
            attributes=dict(attributes or {}),
            counterparty_did=recipient.did,
        )
        cid = record.cid()
        entry = ServiceEntry(
            event_entry_id(len(state.event_cids), EventType.SHIP),
            ServiceType.EVENT_METADATA,
            cid.text(),
        )
        new_body = document.with_services_added((entry,)).with_controller_replaced(
            recipient.did,
            (
                VerificationMethod(
                    "key-1", recipient.did, recipient.wallet.key().public_key
                ),
            ),
        )
        self._commit_update(actor, asset, new_body, metadata)
        self.store.put(record)
        return cid

    def receive(
        self, actor: Actor, asset: Did, attributes: Optional[dict] = None
    ) -> Cid:
        """Acknowledge receipt of an in-transit asset. One ledger Update."""
        document, metadata, state = self._resolve_asset(asset)
        self._require_controller(actor, state)
        self._require_status(state, (AssetStatus.IN_TRANSIT,))
        record = EventRecord(
            event_type=EventType.RECEIVE,
            asset_did=asset,
            actor_did=actor.did,
            timestamp=self.clock(),
            attributes=dict(attributes or {}),
            counterparty_did=self._previous_controller(asset),
        )
        cid = record.cid()
        entry = ServiceEntry(
            event_entry_id(len(state.event_cids), EventType.RECEIVE),
            ServiceType.EVENT_METADATA,
            cid.text(),
        )
        new_body = document.with_services_added((entry,))
        self._commit_update(actor, asset, new_body, metadata)
        self.store.put(record)
        return cid

    def manufacture(
        self,
        actor: Actor,
        compartments: Sequence[Did],
        attributes: Optional[dict] = None,
        commit_mode: Optional[CommitMode] = None,
    ) -> tuple[Did, Cid]:
        """Consume compartments into a new product.

        One ledger Create for the product (version 1 carries the event link
        and the compartment commitment) plus one consume Update per unique
        compartment; lean receiving mode skips the consume updates entirely.
        """
        compartment_list = list(compartments)
        if not compartment_list:
            raise EmptyInput("manufacture requires at least one compartment")
        limit = self.config.max_compartments_per_tx
        if limit is not None and len(compartment_list) > limit:
            raise CompartmentLimitExceeded(
                f"{len(compartment_list)} compartments exceeds limit {limit}"
            )
        mode = commit_mode or self.config.commit_mode_default
        lean = self.config.lean_receiving

        unique: list[Did] = []
        seen: set[str] = set()
        for did in compartment_list:
            if did.text() not in seen:
                seen.add(did.text())
                unique.append(did)

        allowed = (
            (AssetStatus.PRODUCED, AssetStatus.RECEIVED, AssetStatus.IN_TRANSIT)
            if lean
            else (AssetStatus.PRODUCED, AssetStatus.RECEIVED)
        )
        resolved: list[tuple[Did, DidDocument, DocumentMetadata]] = []
        for did in unique:
            document, metadata, state = self._resolve_asset(did)
            self._require_controller(actor, state)
            self._require_status(state, allowed)
            resolved.append((did, document, metadata))

        # Affordability precheck keeps the multi-write operation atomic.
        fees = self.config.ledger.fees
        total_fee = fees.create_fee + (0 if lean else len(unique) * fees.update_fee)
        if self.ledger.balance_of(actor.account) < total_fee:
            raise InsufficientBalance(
                f"{actor.account}: balance {self.ledger.balance_of(actor.account)} "
                f"< manufacture total {total_fee}"
            )

        product_did = self.registrar.mint_did()
        record = EventRecord(
            event_type=EventType.MANUFACTURE,
            asset_did=product_did,
            actor_did=actor.did,
            timestamp=self.clock(),
            attributes=dict(attributes or {}),
            compartments=tuple(compartment_list),
        )
        cid = record.cid()
        services: list[ServiceEntry] = [
            ServiceEntry(
                event_entry_id(0, EventType.MANUFACTURE),
                ServiceType.EVENT_METADATA,
                cid.text(),
            )
        ]
        if mode is CommitMode.SERVICE_LIST:
            services.extend(
                ServiceEntry(
                    f"{_COMPARTMENT_PREFIX}{i}",
                    ServiceType.COMPARTMENT,
                    did.text(),
                )
                for i, did in enumerate(compartment_list)
            )
        else:
            commitment = build_compartment_merkle(compartment_list)
            services.append(
                ServiceEntry(
                    ROOT_ENTRY_ID,
                    ServiceType.COMPARTMENT_MERKLE_ROOT,
                    commitment.root_hex,
                )
            )
        self.registrar.create_did(
            actor.wallet, services, actor.account, did=product_did
        )
        self.store.put(record)

        if not lean:
            for did, document, metadata in resolved:
                back_link = ServiceEntry(
                    CONSUMED_INTO_ID, ServiceType.COMPARTMENT, product_did.text()
                )
                new_body = document.with_services_added((back_link,))
                self._commit_update(actor, did, new_body, metadata)
        return product_did, cid

    def withdraw(
        self,
        actor: Actor,
        asset: Did,
        reason: str = "",
        deactivate: bool = False,
    ) -> Cid:
        """Retire an asset. One Update, plus one Deactivate when requested."""
        document, metadata, state = self._resolve_asset(asset)
        self._require_controller(actor, state)
        self._require_status(state, (AssetStatus.PRODUCED, AssetStatus.RECEIVED))
        if deactivate:
            fees = self.config.ledger.fees
            needed = fees.update_fee + fees.deactivate_fee
            if self.ledger.balance_of(actor.account) < needed:
                raise InsufficientBalance(
                    f"{actor.account}: balance below withdraw+deactivate total {needed}"
                )
        attributes = {"reason": reason} if reason else {}
        record = EventRecord(
            event_type=EventType.WITHDRAW,
            asset_did=asset,
            actor_did=actor.did,
            timestamp=self.clock(),
            attributes=attributes,
        )
        cid = record.cid()
        entries = [
            ServiceEntry(
                event_entry_id(len(state.event_cids), EventType.WITHDRAW),
                ServiceType.EVENT_METADATA,
                cid.text(),
            ),
            ServiceEntry(STATUS_ENTRY_ID, ServiceType.STATUS, "withdrawn"),
        ]
        new_body = document.with_services_added(entries)
        new_metadata = self._commit_update(actor, asset, new_body, metadata)
        self.store.put(record)
        if deactivate:
            signature = actor.wallet.sign(
                signing_payload(new_body.canonical_bytes(), new_metadata.version_id)
            )
            self.registrar.deactivate_did(asset, signature, actor.account)
        return cid

    # --- state reads --------------------------------------------------------------

    def asset_state(self, asset: Did) -> AssetState:
        document, metadata = self.registrar.resolve(asset)
        return project_asset_state(document, metadata)

    def op_counts(self) -> dict[str, int]:
        """Ledger write counts by kind, for accounting checks."""
        counts = {kind.value: 0 for kind in TxKind}
        for tx in self.ledger.tx_history():
            counts[tx.kind.value] += 1
        return counts

    # --- internals ------------------------------------------------------------------

    def _resolve_asset(
        self, asset: Did
    ) -> tuple[DidDocument, DocumentMetadata, AssetState]:
        document, metadata = self.registrar.resolve(asset)
        if metadata.deactivated:
            raise Deactivated(asset.text())
        return document, metadata, project_asset_state(document, metadata)

    def _require_controller(self, actor: Actor, state: AssetState) -> None:
        if state.current_controller != actor.did:
            raise NotController(
                f"{actor.alias} does not control {state.did.text()} "
                f"(controller: {state.current_controller.text()})"
            )

    def _require_status(
        self, state: AssetState, allowed: tuple[AssetStatus, ...]
    ) -> None:
        if state.status not in allowed:
            raise WrongState(
                f"{state.did.text()} is {state.status.value}; "
                f"needs {' or '.join(a.value for a in allowed)}"
            )

    def _commit_update(
        self,
        actor: Actor,
        asset: Did,
        new_body: DidDocument,
        previous_metadata: DocumentMetadata,
    ) -> DocumentMetadata:
        signature = actor.wallet.sign(
            signing_payload(new_body.canonical_bytes(), previous_metadata.version_id)
        )
        return self.registrar.update_did(asset, new_body, signature, actor.account)

    def _previous_controller(self, asset: Did) -> Did:
        """Key controller of the version before the latest (the shipper)."""
        versions = self.registrar.version_records(asset)
        body_bytes = versions[-2][0] if len(versions) > 1 else versions[-1][0]
        body = DidDocument.from_dict(parse_json_bytes_cached(body_bytes))
        return body.verification_methods[0].controller

    # --- persistence -------------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "config": {
                "method": self.config.method,
                "commit_mode_default": self.config.commit_mode_default.value,
                "lean_receiving": self.config.lean_receiving,
                "max_compartments_per_tx": self.config.max_compartments_per_tx,
            },
            "ledger": self.ledger.to_state(),
            "registrar": self.registrar.to_state(),
            "actors": {
                alias: {
                    "role": actor.role.value,
                    "did": actor.did.text(),
                    "account": actor.account,
                    "wallet": actor.wallet.to_state(),
                }
                for alias, actor in self.actors.items()
            },
        }

    @classmethod
    def from_state(
        cls,
        state: dict,
        *,
        clock: Callable[[], datetime] = utc_now,
        store: Optional[ObjectStore] = None,
    ) -> "SupplyChainEngine":
        ledger = Ledger.from_state(state["ledger"], clock=clock)
        cfg = state["config"]
        registrar = Registrar.from_state(state["registrar"], ledger, clock=clock)
        engine = cls.__new__(cls)
        engine.config = EngineConfig(
            ledger=ledger.config,
            sizing=registrar.sizing,
            method=cfg["method"],
            commit_mode_default=CommitMode(cfg["commit_mode_default"]),
            lean_receiving=cfg["lean_receiving"],
            max_compartments_per_tx=cfg["max_compartments_per_tx"],
        )
        engine.clock = clock
        engine.rng = registrar._rng
        engine.ledger = ledger
        engine.registrar = registrar
        engine.store = store if store is not None else MemoryObjectStore()
        engine.actors = {}
        for alias, data in state["actors"].items():
            engine.actors[alias] = Actor(
                alias=alias,
                role=Role(data["role"]),
                did=Did.parse(data["did"]),
                wallet=Wallet.from_state(data["wallet"]),
                account=data["account"],
            )
        return engine
