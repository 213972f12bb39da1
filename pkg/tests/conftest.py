"""Shared fixtures and independently written reference routines.

The reference functions here deliberately re-derive hashes and trees with
their own formulations (recursion, different padding logic) so tests check
the package against a second route rather than against itself.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from provchain import (
    AssetStatus,
    EngineConfig,
    Role,
    SupplyChainEngine,
    TickingClock,
)

SCENARIOS_DIR = Path(__file__).resolve().parents[1] / "scenarios"

CLOCK_START = datetime(2026, 3, 2, 9, 0, 0, tzinfo=timezone.utc)


def make_clock(step_seconds: float = 1.0) -> TickingClock:
    return TickingClock(CLOCK_START, timedelta(seconds=step_seconds))


def make_engine(seed: int = 0, config: EngineConfig | None = None) -> SupplyChainEngine:
    return SupplyChainEngine(config, seed=seed, clock=make_clock())


@pytest.fixture
def engine() -> SupplyChainEngine:
    return make_engine()


@pytest.fixture
def five_actors(engine):
    """One funded actor per role, keyed by role name."""
    actors = {}
    for number, role in enumerate(Role, start=1):
        actors[role] = engine.register_actor(
            f"{role.value.lower()}-{number}", role, balance=1_000_000
        )
    return actors


@pytest.fixture
def dairy_script_data() -> dict:
    return json.loads((SCENARIOS_DIR / "dairy.json").read_text(encoding="utf-8"))


# --- reference implementations ------------------------------------------------------


def ref_version_id(body_bytes: bytes, previous_version_id: str | None) -> str:
    tail = previous_version_id.encode("utf-8") if previous_version_id else b""
    return hashlib.sha256(body_bytes + tail).hexdigest()


def ref_merkle_root(leaves: list[bytes]) -> bytes:
    """Recursive formulation: odd node carries up unchanged."""
    if len(leaves) == 1:
        return leaves[0]
    next_level = []
    for i in range(0, len(leaves) - 1, 2):
        next_level.append(hashlib.sha256(leaves[i] + leaves[i + 1]).digest())
    if len(leaves) % 2 == 1:
        next_level.append(leaves[-1])
    return ref_merkle_root(next_level)


# --- state machine probes ------------------------------------------------------------
# Legality table written from the admissible-history pattern
# Produce (Ship Receive)* [consume | Withdraw]?, not read off the engine.

TRANSITION_LEGAL = {
    AssetStatus.PRODUCED: {"ship", "consume", "withdraw"},
    AssetStatus.IN_TRANSIT: {"receive"},
    AssetStatus.RECEIVED: {"ship", "consume", "withdraw"},
    AssetStatus.CONSUMED: set(),
    AssetStatus.WITHDRAWN: set(),
}
PROBE_OPS = ("ship", "receive", "consume", "withdraw")


def make_probe_world(seed: int = 0):
    """Engine plus two manufacturers and a supplier for matrix probes.

    Both movers are manufacturers so a consume probe can run from any
    holding position without extra hops mutating the probed status.
    """
    engine = make_engine(seed=seed)
    m1 = engine.register_actor("m1", Role.MANUFACTURER, balance=1_000_000)
    m2 = engine.register_actor("m2", Role.MANUFACTURER, balance=1_000_000)
    supplier = engine.register_actor("s", Role.SUPPLIER, balance=1_000_000)
    return engine, m1, m2, supplier


def drive_probe(engine, m1, m2, status: AssetStatus):
    """Fresh asset in exactly ``status``; returns (did, holder)."""
    did, _ = engine.produce(m1, {})
    if status is AssetStatus.PRODUCED:
        return did, m1
    engine.ship(m1, did, m2)
    if status is AssetStatus.IN_TRANSIT:
        return did, m2
    engine.receive(m2, did)
    if status is AssetStatus.RECEIVED:
        return did, m2
    if status is AssetStatus.CONSUMED:
        engine.manufacture(m2, [did], {})
        return did, m2
    engine.withdraw(m2, did, "probe setup")
    return did, m2


def apply_probe_op(engine, op: str, holder, did, recipient):
    if op == "ship":
        engine.ship(holder, did, recipient)
    elif op == "receive":
        engine.receive(holder, did)
    elif op == "consume":
        engine.manufacture(holder, [did], {})
    elif op == "withdraw":
        engine.withdraw(holder, did, "probe")
    else:
        raise AssertionError(f"unknown probe op {op}")


def ref_ols(samples: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Slope, intercept, r_squared via the textbook moment formulas."""
    n = len(samples)
    mean_x = sum(x for x, _ in samples) / n
    mean_y = sum(y for _, y in samples) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in samples)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in samples)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    sse = sum((y - (slope * x + intercept)) ** 2 for x, y in samples)
    sst = sum((y - mean_y) ** 2 for _, y in samples)
    r2 = 1.0 if sst == 0 and sse == 0 else (0.0 if sst == 0 else 1.0 - sse / sst)
    return slope, intercept, r2
