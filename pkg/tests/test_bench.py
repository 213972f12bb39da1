"""Benchmark harness tests: schema, determinism, sweeps, and fit recovery."""

from random import Random

import pytest

from provchain.bench import (
    BenchRow,
    CSV_COLUMNS,
    bench_events,
    bench_manufacture_sweep,
    bench_trace_sweep,
    synthetic_times,
    write_csv,
)
from provchain.events import EngineConfig
from provchain.ledger import LedgerConfig
from provchain.trace import REFERENCE_TRACE_MODEL, fit_trace_model


def op_columns(rows):
    """Everything except the wall-clock column."""
    return [
        (r.scenario_id, r.event_type, r.x, r.doc_ops_create, r.doc_ops_update, r.trace_resolutions)
        for r in rows
    ]


def test_csv_schema_is_fixed(tmp_path):
    assert CSV_COLUMNS == (
        "scenario_id",
        "event_type",
        "x",
        "doc_ops_create",
        "doc_ops_update",
        "trace_resolutions",
        "elapsed_ms",
    )
    row = BenchRow("s", "produce", 0, 1, 0, 0, 1.23456)
    out = tmp_path / "nested" / "rows.csv"
    write_csv([row], out)
    assert out.read_text(encoding="utf-8") == (
        "scenario_id,event_type,x,doc_ops_create,doc_ops_update,trace_resolutions,elapsed_ms\n"
        "s,produce,0,1,0,0,1.235\n"
    )


def test_bench_events_row_shape():
    rows = bench_events(seed=0, assets_per_batch=3, compartments_per_product=2)
    assert len(rows) == 12
    assert [r.event_type for r in rows] == (
        ["produce"] * 3 + ["ship"] * 3 + ["receive"] * 3 + ["manufacture"] * 3
    )
    for row in rows[:3]:
        assert (row.doc_ops_create, row.doc_ops_update) == (1, 0)
    for row in rows[3:9]:
        assert (row.doc_ops_create, row.doc_ops_update) == (0, 1)
    for row in rows[9:]:
        assert (row.doc_ops_create, row.doc_ops_update, row.x) == (1, 2, 2)
    assert all(row.elapsed_ms >= 0 for row in rows)


def test_bench_events_op_columns_deterministic():
    a = bench_events(seed=7, assets_per_batch=2, compartments_per_product=3)
    b = bench_events(seed=7, assets_per_batch=2, compartments_per_product=3)
    assert op_columns(a) == op_columns(b)


def test_manufacture_sweep_completes_without_limits():
    result = bench_manufacture_sweep(seed=0, max_compartments=5)
    assert result.failed_at is None and result.failure is None
    assert [r.x for r in result.rows] == [1, 2, 3, 4, 5]
    assert all(r.doc_ops_update == r.x and r.doc_ops_create == 1 for r in result.rows)


def test_manufacture_sweep_hits_compat_limit():
    result = bench_manufacture_sweep(
        seed=0,
        max_compartments=8,
        config=EngineConfig(max_compartments_per_tx=3),
    )
    assert result.failed_at == 4
    assert result.failure == "CompartmentLimitExceeded"
    assert [r.x for r in result.rows] == [1, 2, 3]


def test_manufacture_sweep_hits_size_limit():
    # billed payload 1075 + 256n crosses a 2000-byte block limit at n = 4
    result = bench_manufacture_sweep(
        seed=0,
        max_compartments=8,
        config=EngineConfig(ledger=LedgerConfig(block_size_limit=2_000)),
    )
    assert result.failed_at == 4
    assert result.failure == "PayloadTooLarge"


def test_trace_sweep_resolutions_fit_exactly():
    result = bench_trace_sweep(seed=0, num_assets=6, min_events=1, max_events=11)
    fit = result.resolution_fit
    assert fit.slope == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.r_squared == pytest.approx(1.0)
    for row in result.rows:
        assert row.trace_resolutions == row.x + 1
        assert row.doc_ops_create == 1  # chains touch exactly one asset


def test_trace_sweep_branching_keeps_resolution_identity():
    result = bench_trace_sweep(
        seed=3, num_assets=8, min_events=4, max_events=24, branching=1.0
    )
    assert any(row.doc_ops_create > 1 for row in result.rows)
    for row in result.rows:
        # resolutions = one per distinct asset + one per event, whatever the shape
        assert row.trace_resolutions == row.x + row.doc_ops_create


def test_trace_sweep_needs_two_assets():
    with pytest.raises(ValueError):
        bench_trace_sweep(num_assets=1)


def test_synthetic_times_exact_when_noiseless():
    samples = synthetic_times(REFERENCE_TRACE_MODEL, range(0, 30, 3))
    assert samples[0] == (0, pytest.approx(0.32))
    fit = fit_trace_model(samples)
    assert fit.slope == pytest.approx(0.44)
    assert fit.intercept == pytest.approx(0.32)
    assert fit.r_squared == pytest.approx(1.0)


def test_synthetic_times_fit_recovery_under_noise():
    samples = synthetic_times(
        REFERENCE_TRACE_MODEL, range(1, 51), sigma=0.05, rng=Random(12)
    )
    fit = fit_trace_model(samples)
    assert fit.slope == pytest.approx(0.44, abs=0.02)
    assert fit.intercept == pytest.approx(0.32, abs=0.05)
    assert fit.r_squared > 0.97
