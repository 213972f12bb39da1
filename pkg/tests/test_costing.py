"""Cost model tests: closed-form role costs, script costing, ledger agreement."""

from decimal import Decimal

import pytest

from conftest import make_engine
from provchain import EngineConfig, Role
from provchain.costing import (
    DEFAULT_TOKEN_PRICE,
    engine_cost_report,
    ledger_cost_report,
    manufacture_total_cost,
    scenario_cost,
    stakeholder_cost,
    to_price,
    usd_value,
)
from provchain.errors import UnknownRole
from provchain.ledger import FeeSchedule
from provchain.scenario import execute_scenario, parse_scenario

# One pass of the canonical chain, worked out by hand from the fee table:
# create 50 CT, update 25 CT, token at $0.117.
ROLE_TABLE = {
    Role.PRODUCER: (75, Decimal("8.78")),       # 1 create + 1 ship
    Role.SUPPLIER: (50, Decimal("5.85")),       # receive + ship
    Role.RETAILER: (50, Decimal("5.85")),       # receive + ship
    Role.CUSTOMER: (25, Decimal("2.93")),       # receive
}


@pytest.mark.parametrize("role", list(ROLE_TABLE))
def test_stakeholder_cost_table(role):
    expected_ct, expected_usd = ROLE_TABLE[role]
    report = stakeholder_cost(role)
    assert report.total_ct == expected_ct
    assert report.total_usd == expected_usd
    assert report.stakeholder == role.value


@pytest.mark.parametrize(
    "n,expected_ct",
    [(0, 75), (1, 100), (2, 125), (3, 150), (10, 325)],
)
def test_manufacturer_cost_grows_with_compartments(n, expected_ct):
    report = stakeholder_cost(Role.MANUFACTURER, n)
    assert report.total_ct == 50 + (1 + n) * 25
    assert report.total_ct == expected_ct
    assert report.creates == 1
    assert report.updates == 1 + n


def test_stakeholder_cost_accepts_role_names():
    assert stakeholder_cost("Producer").total_ct == 75
    with pytest.raises(UnknownRole):
        stakeholder_cost("Wizard")
    with pytest.raises(ValueError):
        stakeholder_cost(Role.MANUFACTURER, -1)


def test_stakeholder_cost_custom_fees_and_price():
    fees = FeeSchedule(create_fee=100, update_fee=10, deactivate_fee=5)
    report = stakeholder_cost(Role.PRODUCER, fees=fees, price="1.00")
    assert report.total_ct == 110
    assert report.total_usd == Decimal("110.00")


def test_manufacture_total_cost_large_batch():
    total_ct, total_usd = manufacture_total_cost(30_000)
    assert total_ct == 750_075
    assert total_usd == Decimal("87758.78")


def test_manufacture_total_cost_small_values():
    assert manufacture_total_cost(0) == (75, Decimal("8.78"))
    assert manufacture_total_cost(1)[0] == 100
    with pytest.raises(ValueError):
        manufacture_total_cost(-1)


def test_usd_value_rounds_half_up():
    # 75 * 0.117 = 8.775 exactly; half-up gives 8.78
    assert usd_value(75) == Decimal("8.78")
    assert usd_value(25) == Decimal("2.93")
    # a tie that banker's rounding would send the other way
    assert usd_value(2, "0.1225") == Decimal("0.25")
    assert usd_value(0) == Decimal("0.00")


def test_to_price_conversions():
    assert to_price(None) == DEFAULT_TOKEN_PRICE
    assert to_price("0.2") == Decimal("0.2")
    assert to_price(0.117) == Decimal("0.117")
    assert to_price(Decimal("1")) == Decimal("1")


def test_cost_report_to_dict():
    report = stakeholder_cost(Role.CUSTOMER)
    data = report.to_dict()
    assert data == {
        "stakeholder": "Customer",
        "creates": 0,
        "updates": 1,
        "deactivates": 0,
        "totalCt": 25,
        "totalUsd": "2.93",
    }


# --- script costing against the ledger -------------------------------------------------


def test_dairy_scenario_cost_matches_hand_totals(dairy_script_data):
    script = parse_scenario(dairy_script_data)
    reports = {r.stakeholder: r for r in scenario_cost(script)}
    expected = {
        "alpine-farm": (75, Decimal("8.78")),
        "yeast-works": (75, Decimal("8.78")),
        "cold-chain": (50, Decimal("5.85")),
        "cheese-maker": (175, Decimal("20.48")),
        "corner-shop": (50, Decimal("5.85")),
        "customer-9": (25, Decimal("2.93")),
    }
    assert set(reports) == set(expected)
    for alias, (ct, usd) in expected.items():
        assert reports[alias].total_ct == ct, alias
        assert reports[alias].total_usd == usd, alias


def test_scenario_cost_agrees_with_ledger(dairy_script_data):
    """Dual route: the static cost model vs what the ledger actually charged."""
    script = parse_scenario(dairy_script_data)
    engine = make_engine(seed=3)
    execute_scenario(engine, script)
    modeled = {r.stakeholder: r for r in scenario_cost(script)}
    charged = {r.stakeholder: r for r in ledger_cost_report(engine.ledger)}
    assert set(modeled) == set(charged)
    for alias in modeled:
        assert modeled[alias].creates == charged[alias].creates, alias
        assert modeled[alias].updates == charged[alias].updates, alias
        assert modeled[alias].deactivates == charged[alias].deactivates, alias
        assert modeled[alias].total_ct == charged[alias].total_ct, alias
        assert modeled[alias].total_usd == charged[alias].total_usd, alias


WITHDRAW_SCRIPT = {
    "actors": [
        {"alias": "p", "role": "Producer", "balance": 1000},
        {"alias": "m", "role": "Manufacturer", "balance": 1000},
    ],
    "events": [
        {"op": "produce", "actor": "p", "asset": "a"},
        {"op": "produce", "actor": "p", "asset": "b"},
        {"op": "ship", "actor": "p", "asset": "a", "to": "m"},
        {"op": "receive", "actor": "m", "asset": "a"},
        {"op": "manufacture", "actor": "m", "asset": "x", "compartments": ["a", "a"]},
        {"op": "withdraw", "actor": "p", "asset": "b", "deactivate": True},
        {"op": "withdraw", "actor": "m", "asset": "x"},
    ],
}


def test_scenario_cost_counts_deactivates_and_unique_compartments():
    script = parse_scenario(WITHDRAW_SCRIPT)
    reports = {r.stakeholder: r for r in scenario_cost(script)}
    # p: 2 creates, 1 ship, 1 withdraw update, 1 deactivate
    assert reports["p"].creates == 2
    assert reports["p"].updates == 2
    assert reports["p"].deactivates == 1
    assert reports["p"].total_ct == 2 * 50 + 2 * 25 + 25
    # m: receive + manufacture (1 create + 1 unique consume) + withdraw
    assert reports["m"].creates == 1
    assert reports["m"].updates == 3
    assert reports["m"].deactivates == 0

    engine = make_engine(seed=4)
    execute_scenario(engine, parse_scenario(WITHDRAW_SCRIPT))
    charged = {r.stakeholder: r for r in ledger_cost_report(engine.ledger)}
    for alias in reports:
        assert reports[alias].total_ct == charged[alias].total_ct, alias


def test_scenario_cost_lean_receiving_skips_consume_updates(dairy_script_data):
    script = parse_scenario(dairy_script_data)
    lean = {r.stakeholder: r for r in scenario_cost(script, lean_receiving=True)}
    # the manufacturer saves exactly the two consume updates
    assert lean["cheese-maker"].total_ct == 175 - 2 * 25
    engine = make_engine(seed=5, config=EngineConfig(lean_receiving=True))
    execute_scenario(engine, script)
    charged = {r.stakeholder: r for r in ledger_cost_report(engine.ledger)}
    for alias in lean:
        assert lean[alias].total_ct == charged[alias].total_ct, alias


def test_ledger_report_orders_payers_by_first_charge(dairy_script_data):
    script = parse_scenario(dairy_script_data)
    engine = make_engine(seed=6)
    execute_scenario(engine, script)
    order = [r.stakeholder for r in engine_cost_report(engine)]
    assert order[0] == "alpine-farm"          # first to write
    assert order == sorted(order, key=order.index)  # stable, no duplicates
    assert len(order) == len(set(order))


def test_ledger_report_uses_ledger_token_price(dairy_script_data):
    script = parse_scenario(dairy_script_data)
    engine = make_engine(seed=7)
    execute_scenario(engine, script)
    default_price = {r.stakeholder: r.total_usd for r in ledger_cost_report(engine.ledger)}
    for report in ledger_cost_report(engine.ledger, price="1"):
        assert report.total_usd == Decimal(report.total_ct).quantize(Decimal("0.01"))
        # the no-argument report used the ledger's configured token price
        assert default_price[report.stakeholder] == usd_value(report.total_ct, "0.117")
