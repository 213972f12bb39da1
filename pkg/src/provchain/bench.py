"""Benchmark harness: event batches, manufacture sweeps, trace sweeps.

Every bench emits rows with one fixed CSV schema so downstream tooling
never branches on bench kind:

    scenario_id, event_type, x, doc_ops_create, doc_ops_update,
    trace_resolutions, elapsed_ms

Op counts are deterministic under a fixed seed; elapsed_ms is local wall
clock and is the only column allowed to vary between runs.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Optional, Sequence

from .errors import CompartmentLimitExceeded, PayloadTooLarge
from .events import Actor, EngineConfig, Role, SupplyChainEngine
from .identity import Did
from .trace import TraceFit, TraceTimeModel, fit_trace_model, trace

CSV_COLUMNS = (
    "scenario_id",
    "event_type",
    "x",
    "doc_ops_create",
    "doc_ops_update",
    "trace_resolutions",
    "elapsed_ms",
)


@dataclass(frozen=True)
class BenchRow:
    scenario_id: str
    event_type: str
    x: int
    doc_ops_create: int
    doc_ops_update: int
    trace_resolutions: int
    elapsed_ms: float

    def as_csv(self) -> list:
        return [
            self.scenario_id,
            self.event_type,
            self.x,
            self.doc_ops_create,
            self.doc_ops_update,
            self.trace_resolutions,
            f"{self.elapsed_ms:.3f}",
        ]


def write_csv(rows: Sequence[BenchRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())
    return path


def _timed(fn):
    start = time.perf_counter()
    result = fn()
    return result, (time.perf_counter() - start) * 1000.0


# --- event batches ----------------------------------------------------------------


def bench_events(
    *,
    seed: int = 0,
    assets_per_batch: int = 30,
    compartments_per_product: int = 2,
    config: Optional[EngineConfig] = None,
) -> list[BenchRow]:
    """Time each event type over a batch of assets.

    Batches run in lifecycle order: produce N assets, ship them, receive
    them, then manufacture N products of ``compartments_per_product`` inputs
    each (inputs are prepared outside the timed rows).
    """
    engine = SupplyChainEngine(config, seed=seed)
    producer = engine.register_actor("producer-1", Role.PRODUCER, balance=10_000_000)
    supplier = engine.register_actor("supplier-1", Role.SUPPLIER, balance=10_000_000)
    maker = engine.register_actor("manufacturer-1", Role.MANUFACTURER, balance=10_000_000)

    rows: list[BenchRow] = []
    assets: list[Did] = []
    for _ in range(assets_per_batch):
        (did, _cid), ms = _timed(lambda: engine.produce(producer, {"bench": "events"}))
        assets.append(did)
        rows.append(BenchRow("events", "produce", 0, 1, 0, 0, ms))
    for did in assets:
        _, ms = _timed(lambda d=did: engine.ship(producer, d, supplier))
        rows.append(BenchRow("events", "ship", 0, 0, 1, 0, ms))
    for did in assets:
        _, ms = _timed(lambda d=did: engine.receive(supplier, d))
        rows.append(BenchRow("events", "receive", 0, 0, 1, 0, ms))

    for _ in range(assets_per_batch):
        inputs = _prepare_received(
            engine, producer, maker, compartments_per_product
        )
        _, ms = _timed(lambda i=inputs: engine.manufacture(maker, i, {"bench": "events"}))
        rows.append(
            BenchRow(
                "events",
                "manufacture",
                compartments_per_product,
                1,
                compartments_per_product,
                0,
                ms,
            )
        )
    return rows


def _prepare_received(
    engine: SupplyChainEngine, producer: Actor, recipient: Actor, count: int
) -> list[Did]:
    """Produce ``count`` assets and move them into the recipient's hands."""
    inputs = []
    for _ in range(count):
        did, _ = engine.produce(producer, {"bench": "setup"})
        engine.ship(producer, did, recipient)
        engine.receive(recipient, did)
        inputs.append(did)
    return inputs


# --- manufacture sweep -------------------------------------------------------------


@dataclass
class ManufactureSweepResult:
    rows: list[BenchRow]
    failed_at: Optional[int] = None   # first compartment count that was rejected
    failure: Optional[str] = None     # error code of the rejection


def bench_manufacture_sweep(
    *,
    seed: int = 0,
    max_compartments: int = 12,
    step: int = 1,
    config: Optional[EngineConfig] = None,
) -> ManufactureSweepResult:
    """Manufacture with n = 1, 1+step, ... compartments; stop at the first rejection.

    With a compatibility limit configured the sweep reproduces the wide-create
    failure mode; with the default config it runs to ``max_compartments``.
    """
    engine = SupplyChainEngine(config, seed=seed)
    producer = engine.register_actor("producer-1", Role.PRODUCER, balance=1_000_000_000)
    maker = engine.register_actor(
        "manufacturer-1", Role.MANUFACTURER, balance=1_000_000_000
    )
    rows: list[BenchRow] = []
    for n in range(1, max_compartments + 1, step):
        inputs = _prepare_received(engine, producer, maker, n)
        try:
            _, ms = _timed(lambda: engine.manufacture(maker, inputs, {"sweep": str(n)}))
        except (CompartmentLimitExceeded, PayloadTooLarge) as exc:
            return ManufactureSweepResult(
                rows=rows, failed_at=n, failure=exc.error_code
            )
        rows.append(BenchRow("manufacture-sweep", "manufacture", n, 1, n, 0, ms))
    return ManufactureSweepResult(rows=rows)


# --- trace sweep ----------------------------------------------------------------------


@dataclass
class TraceSweepResult:
    rows: list[BenchRow]
    resolution_fit: TraceFit
    time_fit: TraceFit


def bench_trace_sweep(
    *,
    seed: int = 0,
    num_assets: int = 20,
    min_events: int = 1,
    max_events: int = 41,
    branching: float = 0.0,
    config: Optional[EngineConfig] = None,
) -> TraceSweepResult:
    """Trace assets with varying history lengths and fit both affine models.

    Default shape: chain assets (produce plus ship/receive rounds, odd
    lengths padded with a withdraw), so resolution counts are exactly
    affine in the event count. ``branching`` > 0 mixes in products whose
    compartments are independent chains; op counts stay deterministic but
    the resolutions fit is no longer exact.
    """
    if num_assets < 2:
        raise ValueError("need at least two assets for a fit")
    rng = Random(seed)
    engine = SupplyChainEngine(config, seed=seed)
    producer = engine.register_actor("producer-1", Role.PRODUCER, balance=10_000_000)
    supplier = engine.register_actor("supplier-1", Role.SUPPLIER, balance=10_000_000)
    maker = engine.register_actor("manufacturer-1", Role.MANUFACTURER, balance=10_000_000)

    roots: list[Did] = []
    for index in range(num_assets):
        target = min_events + round(
            (max_events - min_events) * index / max(1, num_assets - 1)
        )
        if branching > 0 and rng.random() < branching and target >= 4:
            roots.append(_build_product(engine, producer, maker, rng, target))
        else:
            roots.append(_build_chain(engine, producer, supplier, target))

    rows: list[BenchRow] = []
    samples_res: list[tuple[float, float]] = []
    samples_time: list[tuple[float, float]] = []
    for root in roots:
        report, ms = _timed(lambda r=root: trace(engine.registrar, engine.store, r))
        x = len(report.events)
        creates = len(report.occurrences)
        rows.append(
            BenchRow(
                "trace-sweep",
                "trace",
                x,
                creates,
                x - creates,
                report.resolution_count,
                ms,
            )
        )
        samples_res.append((x, report.resolution_count))
        samples_time.append((x, ms / 1000.0))
    return TraceSweepResult(
        rows=rows,
        resolution_fit=fit_trace_model(samples_res),
        time_fit=fit_trace_model(samples_time),
    )


def _build_chain(
    engine: SupplyChainEngine, producer: Actor, supplier: Actor, events: int
) -> Did:
    """Asset whose history has exactly ``events`` events (1 produce + rounds)."""
    did, _ = engine.produce(producer, {"bench": "trace"})
    remaining = events - 1
    holder, other = producer, supplier
    while remaining >= 2:
        engine.ship(holder, did, other)
        engine.receive(other, did)
        holder, other = other, holder
        remaining -= 2
    if remaining == 1:
        engine.withdraw(holder, did, "sweep terminator")
    return did


def _build_product(
    engine: SupplyChainEngine,
    producer: Actor,
    maker: Actor,
    rng: Random,
    target_events: int,
) -> Did:
    """Product over 2-3 chain compartments totalling roughly ``target_events``."""
    width = rng.randint(2, 3)
    per_child = max(3, (target_events - 1) // width)
    # each child needs an odd number of ship/receive rounds to end at the maker
    rounds = max(1, (per_child - 1) // 2)
    if rounds % 2 == 0:
        rounds -= 1
    inputs: list[Did] = []
    for _ in range(width):
        did, _ = engine.produce(producer, {"bench": "trace"})
        holder, other = producer, maker
        for _ in range(rounds):
            engine.ship(holder, did, other)
            engine.receive(other, did)
            holder, other = other, holder
        inputs.append(did)
    product, _ = engine.manufacture(maker, inputs, {"bench": "trace"})
    return product


# --- synthetic timing data -----------------------------------------------------------


def synthetic_times(
    model: TraceTimeModel,
    xs: Sequence[float],
    *,
    sigma: float = 0.0,
    rng: Optional[Random] = None,
) -> list[tuple[float, float]]:
    """(x, seconds) samples from an affine model plus Gaussian noise."""
    rng = rng or Random(0)
    return [
        (x, model.predict(x) + (rng.gauss(0.0, sigma) if sigma > 0 else 0.0))
        for x in xs
    ]
