"""DID-backed supply chain provenance toolkit.

Layers, bottom up: a fixed-fee registry ledger simulation, DID documents
with signed version chains, a content-addressed event store, the supply
chain event engine, recursive tracing, cost accounting, and an HTTP-style
gateway plus CLI and benchmark harness on top.
"""

from .canonical import TickingClock, base58_decode, base58_encode, canonical_json_bytes
from .costing import (
    CostReport,
    ledger_cost_report,
    manufacture_total_cost,
    scenario_cost,
    stakeholder_cost,
    usd_value,
)
from .errors import ProvChainError
from .events import (
    Actor,
    AssetKind,
    AssetState,
    AssetStatus,
    CommitMode,
    EngineConfig,
    Role,
    SupplyChainEngine,
)
from .identity import (
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
)
from .ledger import FeeSchedule, Ledger, LedgerConfig, TxKind
from .merkle import build_compartment_merkle, verify_proof
from .scenario import (
    ScenarioScript,
    execute_scenario,
    generate_scenario,
    parse_scenario,
)
from .store import (
    Cid,
    DirectoryObjectStore,
    EventRecord,
    EventType,
    LinkageVerdict,
    MemoryObjectStore,
    cid_of,
    verify_linkage,
)
from .trace import (
    REFERENCE_TRACE_MODEL,
    TraceReport,
    TraceTimeModel,
    fit_trace_model,
    predict_trace_time,
    trace,
    track,
    verify_history_chain,
)

__version__ = "0.1.0"

__all__ = [
    "Actor",
    "AssetKind",
    "AssetState",
    "AssetStatus",
    "Cid",
    "CommitMode",
    "CostReport",
    "Did",
    "DidDocument",
    "DirectoryObjectStore",
    "DocumentMetadata",
    "EngineConfig",
    "EventRecord",
    "EventType",
    "FeeSchedule",
    "KeyCustody",
    "Ledger",
    "LedgerConfig",
    "LinkageVerdict",
    "MemoryObjectStore",
    "ProvChainError",
    "REFERENCE_TRACE_MODEL",
    "Registrar",
    "Role",
    "ScenarioScript",
    "ServiceEntry",
    "ServiceType",
    "SizingModel",
    "SupplyChainEngine",
    "TickingClock",
    "TraceReport",
    "TraceTimeModel",
    "TxKind",
    "VerificationMethod",
    "Wallet",
    "base58_decode",
    "base58_encode",
    "build_compartment_merkle",
    "canonical_json_bytes",
    "cid_of",
    "execute_scenario",
    "fit_trace_model",
    "generate_keypair",
    "generate_scenario",
    "ledger_cost_report",
    "manufacture_total_cost",
    "parse_scenario",
    "predict_trace_time",
    "scenario_cost",
    "stakeholder_cost",
    "trace",
    "track",
    "usd_value",
    "verify_history_chain",
    "verify_linkage",
    "verify_proof",
]
