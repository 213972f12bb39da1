"""Documentation cost accounting in currency tokens and USD.

Three layers, kept deliberately separate:

- ``stakeholder_cost``: closed-form per-role op counts (the canonical
  supply chain: each stakeholder documents their own actions once).
- ``scenario_cost``: exact op model of a scenario script, command by
  command; matches the ledger's actual debits when the script runs.
- ``ledger_cost_report``: what the ledger really charged, grouped by payer.

USD conversion rounds half-up to cents exactly once, at report level.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Union

from .errors import UnknownRole
from .events import Role, SupplyChainEngine
from .ledger import FeeSchedule, Ledger, TxKind
from .scenario import ScenarioScript

PriceLike = Union[Decimal, str, float, int]

DEFAULT_TOKEN_PRICE = Decimal("0.117")  # USD per currency token

_CENTS = Decimal("0.01")


def to_price(price: Optional[PriceLike]) -> Decimal:
    if price is None:
        return DEFAULT_TOKEN_PRICE
    if isinstance(price, Decimal):
        return price
    return Decimal(str(price))


def usd_value(tokens: int, price: Optional[PriceLike] = None) -> Decimal:
    """Convert a token amount to USD, rounded half-up to cents."""
    return (Decimal(tokens) * to_price(price)).quantize(_CENTS, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CostReport:
    stakeholder: str        # role name or actor alias
    creates: int
    updates: int
    total_ct: int
    total_usd: Decimal
    deactivates: int = 0

    def to_dict(self) -> dict:
        return {
            "stakeholder": self.stakeholder,
            "creates": self.creates,
            "updates": self.updates,
            "deactivates": self.deactivates,
            "totalCt": self.total_ct,
            "totalUsd": str(self.total_usd),
        }


def _report(
    stakeholder: str,
    creates: int,
    updates: int,
    deactivates: int,
    fees: FeeSchedule,
    price: Optional[PriceLike],
) -> CostReport:
    total_ct = (
        creates * fees.create_fee
        + updates * fees.update_fee
        + deactivates * fees.deactivate_fee
    )
    return CostReport(
        stakeholder=stakeholder,
        creates=creates,
        updates=updates,
        deactivates=deactivates,
        total_ct=total_ct,
        total_usd=usd_value(total_ct, price),
    )


# Per-role (creates, updates) for one pass of the canonical chain; the
# manufacturer's update count additionally grows with the compartment count.
_ROLE_OPS = {
    Role.PRODUCER: (1, 1),       # creates the asset, ships it
    Role.SUPPLIER: (0, 2),       # receives, ships
    Role.MANUFACTURER: (1, 1),   # creates the product; +1 ship +n compartments
    Role.RETAILER: (0, 2),       # receives, ships
    Role.CUSTOMER: (0, 1),       # receives
}


def stakeholder_cost(
    role: Role | str,
    n: int = 0,
    fees: Optional[FeeSchedule] = None,
    price: Optional[PriceLike] = None,
) -> CostReport:
    """Per-role documentation cost; ``n`` is the manufacturer's compartment count."""
    try:
        role = Role(role)
    except ValueError as exc:
        raise UnknownRole(str(role)) from exc
    if n < 0:
        raise ValueError("compartment count cannot be negative")
    fees = fees or FeeSchedule()
    creates, updates = _ROLE_OPS[role]
    if role is Role.MANUFACTURER:
        updates += n
    return _report(role.value, creates, updates, 0, fees, price)


def manufacture_total_cost(
    n: int,
    fees: Optional[FeeSchedule] = None,
    price: Optional[PriceLike] = None,
) -> tuple[int, Decimal]:
    """Manufacturer's total for an n-compartment product: 1 create + (1+n) updates."""
    if n < 0:
        raise ValueError("compartment count cannot be negative")
    fees = fees or FeeSchedule()
    total_ct = fees.create_fee + (1 + n) * fees.update_fee
    return total_ct, usd_value(total_ct, price)


def scenario_cost(
    script: ScenarioScript,
    fees: Optional[FeeSchedule] = None,
    price: Optional[PriceLike] = None,
    *,
    lean_receiving: bool = False,
) -> list[CostReport]:
    """Model the exact ledger debits of a script, per actor, without executing.

    Mirrors the engine's op accounting: produce = 1 create; ship, receive,
    and withdraw = 1 update each; manufacture = 1 create plus one update per
    unique compartment (none in lean receiving mode); withdraw with
    deactivation adds one deactivate.
    """
    fees = fees or FeeSchedule()
    creates: dict[str, int] = {a.alias: 0 for a in script.actors}
    updates: dict[str, int] = {a.alias: 0 for a in script.actors}
    deactivates: dict[str, int] = {a.alias: 0 for a in script.actors}
    for command in script.events:
        who = command.actor
        if command.op == "produce":
            creates[who] += 1
        elif command.op in ("ship", "receive"):
            updates[who] += 1
        elif command.op == "manufacture":
            creates[who] += 1
            if not lean_receiving:
                updates[who] += len(dict.fromkeys(command.compartments))
        elif command.op == "withdraw":
            updates[who] += 1
            if command.deactivate:
                deactivates[who] += 1
    return [
        _report(a.alias, creates[a.alias], updates[a.alias], deactivates[a.alias], fees, price)
        for a in script.actors
    ]


def ledger_cost_report(
    ledger: Ledger,
    price: Optional[PriceLike] = None,
) -> list[CostReport]:
    """Actual charged fees grouped by payer, in first-seen order."""
    fees = ledger.config.fees
    if price is None:
        price = ledger.config.token_price
    order: list[str] = []
    counts: dict[str, dict[TxKind, int]] = {}
    for tx in ledger.tx_history():
        if tx.payer not in counts:
            counts[tx.payer] = {kind: 0 for kind in TxKind}
            order.append(tx.payer)
        counts[tx.payer][tx.kind] += 1
    return [
        _report(
            payer,
            counts[payer][TxKind.CREATE],
            counts[payer][TxKind.UPDATE],
            counts[payer][TxKind.DEACTIVATE],
            fees,
            price,
        )
        for payer in order
    ]


def engine_cost_report(
    engine: SupplyChainEngine, price: Optional[PriceLike] = None
) -> list[CostReport]:
    return ledger_cost_report(engine.ledger, price)
