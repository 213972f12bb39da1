"""Asset tracing and tracking over the registrar and object store.

``trace`` walks an asset's full history depth-first, recursing through
compartments, verifying content hashes, Merkle commitments, and version
chains along the way. ``track`` is the cheap projection: latest state from
exactly one resolution, no recursion.

Work is measured in resolution_count: one per registrar resolve plus one
per store get. Version-chain verification reads registry storage directly
and is not counted, so for a single-asset history of x events the count is
exactly x + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .canonical import parse_json_bytes
from .errors import DegenerateInput, IntegrityViolation
from .events import (
    AssetState,
    event_entries,
    forward_compartment_entries,
    project_asset_state,
    ROOT_ENTRY_ID,
)
from .identity import Did, DidDocument, DocumentMetadata, Registrar, compute_version_id
from .merkle import build_compartment_merkle, leaf_hash, verify_proof
from .store import Cid, EventRecord, EventType, ObjectStore


@dataclass(frozen=True)
class TracedEvent:
    asset: Did
    record: EventRecord
    cid: Cid
    version_id: str  # document version that committed the event link

    def to_dict(self) -> dict:
        return {
            "asset": self.asset.text(),
            "cid": self.cid.text(),
            "versionId": self.version_id,
            "record": self.record.to_dict(),
        }


@dataclass
class TraceReport:
    root: Did
    events: list[TracedEvent]              # depth-first: asset first, then compartments
    compartment_tree: dict                 # nested {"did", "compartments", ...}
    resolution_count: int
    verified: bool
    occurrences: dict[str, int] = field(default_factory=dict)  # did -> multiplicity

    def to_dict(self) -> dict:
        return {
            "root": self.root.text(),
            "events": [e.to_dict() for e in self.events],
            "compartmentTree": self.compartment_tree,
            "resolutionCount": self.resolution_count,
            "verified": self.verified,
            "occurrences": dict(self.occurrences),
        }


@dataclass(frozen=True)
class TrackResult:
    state: AssetState
    resolution_count: int


class _CountingAccess:
    """Counts the externally visible resolution work of a walk."""

    def __init__(self, registrar: Registrar, store: ObjectStore):
        self.registrar = registrar
        self.store = store
        self.count = 0

    def resolve(self, did: Did):
        self.count += 1
        return self.registrar.resolve(did)

    def get(self, cid: Cid) -> EventRecord:
        self.count += 1
        return self.store.get(cid)


def trace(registrar: Registrar, store: ObjectStore, root: Did) -> TraceReport:
    """Full recursive history of ``root`` and every compartment beneath it."""
    access = _CountingAccess(registrar, store)
    events: list[TracedEvent] = []
    occurrences: dict[str, int] = {}
    chain_ok = True

    def walk(did: Did, path: tuple[str, ...]) -> dict:
        nonlocal chain_ok
        text = did.text()
        if text in path:
            raise IntegrityViolation(f"compartment cycle through {text}")
        if text in occurrences:
            occurrences[text] += 1
            return {"did": text, "duplicate": True}
        occurrences[text] = 1

        document, _metadata = access.resolve(did)
        version_ids = _event_version_ids(registrar, did)
        manufacture_record: Optional[EventRecord] = None
        for index, entry in enumerate(event_entries(document)):
            cid = Cid.parse(entry.endpoint)
            record = access.get(cid)  # raises IntegrityViolation on tampering
            events.append(
                TracedEvent(
                    asset=did, record=record, cid=cid, version_id=version_ids[index]
                )
            )
            if record.event_type is EventType.MANUFACTURE:
                manufacture_record = record

        if not _chain_is_sound(registrar, did):
            chain_ok = False

        children = _compartments_of(document, manufacture_record)
        node: dict = {"did": text}
        if children:
            node["compartments"] = [
                walk(child, path + (text,)) for child in children
            ]
        return node

    tree = walk(root, ())
    return TraceReport(
        root=root,
        events=events,
        compartment_tree=tree,
        resolution_count=access.count,
        verified=chain_ok,
        occurrences=occurrences,
    )


def track(registrar: Registrar, root: Did) -> TrackResult:
    """Latest state only: exactly one resolution, never recursive."""
    access = _CountingAccess(registrar, store=None)  # type: ignore[arg-type]
    document, metadata = access.resolve(root)
    state = project_asset_state(document, metadata)
    assert access.count == 1, "track must not recurse"
    return TrackResult(state=state, resolution_count=access.count)


def _compartments_of(
    document: DidDocument, manufacture_record: Optional[EventRecord]
) -> list[Did]:
    """Compartment DIDs to recurse into, with the commitment verified."""
    root_entry = document.service_by_id(ROOT_ENTRY_ID)
    if root_entry is not None:
        if manufacture_record is None:
            raise IntegrityViolation(
                f"{document.id.text()} commits a compartment root but links "
                "no manufacture record"
            )
        committed_root = bytes.fromhex(root_entry.endpoint)
        stored = list(manufacture_record.compartments)
        commitment = build_compartment_merkle(stored)
        for did, proof in zip(stored, commitment.proofs):
            if not verify_proof(leaf_hash(did), list(proof), committed_root):
                raise IntegrityViolation(
                    f"compartment list of {manufacture_record.cid().text()} "
                    f"does not match the committed root"
                )
        return stored
    return [Did.parse(e.endpoint) for e in forward_compartment_entries(document)]


def _event_version_ids(registrar: Registrar, did: Did) -> list[str]:
    """version_id that committed each event link, in event order."""
    version_ids: list[str] = []
    seen = 0
    for body_bytes, metadata in registrar.version_records(did):
        body = DidDocument.from_dict(parse_json_bytes(body_bytes))
        count = len(event_entries(body))
        while seen < count:
            version_ids.append(metadata.version_id)
            seen += 1
    return version_ids


# --- version chain verification ---------------------------------------------------


@dataclass(frozen=True)
class ChainReport:
    did: Did
    ok: bool
    issues: tuple[str, ...] = ()


def verify_history_chain(registrar: Registrar, did: Did) -> ChainReport:
    """Recompute every version_id from stored bytes and predecessor tokens."""
    issues: list[str] = []
    versions = registrar.version_records(did)
    if not versions:
        issues.append("no versions")
        return ChainReport(did=did, ok=False, issues=tuple(issues))

    previous: Optional[DocumentMetadata] = None
    for index, (body_bytes, metadata) in enumerate(versions):
        expected_prev = previous.version_id if previous else None
        if metadata.previous_version_id != expected_prev:
            issues.append(
                f"version {index + 1}: previous_version_id mismatch"
            )
        recomputed = compute_version_id(body_bytes, metadata.previous_version_id)
        if recomputed != metadata.version_id:
            issues.append(
                f"version {index + 1}: version_id does not hash to {metadata.version_id}"
            )
        if previous is not None:
            if metadata.created != previous.created:
                issues.append(f"version {index + 1}: created timestamp changed")
            if metadata.updated < previous.updated:
                issues.append(f"version {index + 1}: updated went backwards")
        previous = metadata
    return ChainReport(did=did, ok=not issues, issues=tuple(issues))


def _chain_is_sound(registrar: Registrar, did: Did) -> bool:
    return verify_history_chain(registrar, did).ok


# --- trace time model ----------------------------------------------------------------


@dataclass(frozen=True)
class TraceTimeModel:
    """Affine wall-clock model: seconds = seconds_per_event * x + base_seconds."""

    seconds_per_event: float
    base_seconds: float

    def predict(self, x: float) -> float:
        if x < 0:
            raise ValueError("event count cannot be negative")
        return self.seconds_per_event * x + self.base_seconds


# Coefficients measured against a public-testnet deployment of this design.
REFERENCE_TRACE_MODEL = TraceTimeModel(seconds_per_event=0.44, base_seconds=0.32)


def predict_trace_time(x: float, model: TraceTimeModel = REFERENCE_TRACE_MODEL) -> float:
    return model.predict(x)


@dataclass(frozen=True)
class TraceFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    samples: int

    def as_model(self) -> TraceTimeModel:
        return TraceTimeModel(seconds_per_event=self.slope, base_seconds=self.intercept)


def fit_trace_model(samples: Sequence[tuple[float, float]]) -> TraceFit:
    """Ordinary least squares over (x, seconds) pairs."""
    n = len(samples)
    xs = [float(x) for x, _ in samples]
    ys = [float(y) for _, y in samples]
    if n < 2 or len(set(xs)) < 2:
        raise DegenerateInput("need at least two samples with two distinct x values")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    sse = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    sst = sum((y - mean_y) ** 2 for y in ys)
    if sst == 0.0:
        r_squared = 1.0 if sse == 0.0 else 0.0
    else:
        r_squared = 1.0 - sse / sst
    if n > 2:
        slope_stderr = math.sqrt((sse / (n - 2)) / sxx)
    else:
        slope_stderr = 0.0
    return TraceFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        slope_stderr=slope_stderr,
        samples=n,
    )
