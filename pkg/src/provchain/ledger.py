"""Simulated verifiable data registry with fixed per-operation fees.

The registry charges a flat fee per write (create / update / deactivate),
denominated in integer currency tokens (CT), and enforces a block size
limit on the payload of any single write. There is no consensus layer:
commits are serialized through a single lock, which is exactly the
guarantee the rest of the package needs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from typing import Callable, Optional

from .canonical import format_timestamp, parse_timestamp, utc_now
from .errors import InsufficientBalance, PayloadTooLarge, UnknownAccount


class TxKind(str, Enum):
    CREATE = "Create"
    UPDATE = "Update"
    DEACTIVATE = "Deactivate"


@dataclass(frozen=True)
class FeeSchedule:
    """Flat fees per write kind, in whole currency tokens."""

    create_fee: int = 50
    update_fee: int = 25
    deactivate_fee: int = 25

    def fee_for(self, kind: TxKind) -> int:
        if kind is TxKind.CREATE:
            return self.create_fee
        if kind is TxKind.UPDATE:
            return self.update_fee
        return self.deactivate_fee


@dataclass(frozen=True)
class LedgerConfig:
    fees: FeeSchedule = field(default_factory=FeeSchedule)
    block_size_limit: int = 204_800          # bytes per write payload
    token_price_usd: str = "0.117"           # USD per CT, kept as str for Decimal

    @property
    def token_price(self) -> Decimal:
        return Decimal(self.token_price_usd)


@dataclass
class Account:
    account_id: str
    balance: int  # CT; never negative


@dataclass(frozen=True)
class LedgerTransaction:
    sequence: int           # strictly increasing, starts at 1
    kind: TxKind
    payer: str
    fee: int                # CT actually charged
    payload_size: int       # bytes accounted against the block limit
    timestamp: datetime


class Ledger:
    """Append-only transaction log plus account balances."""

    def __init__(
        self,
        config: Optional[LedgerConfig] = None,
        *,
        clock: Callable[[], datetime] = utc_now,
    ):
        self.config = config or LedgerConfig()
        self._clock = clock
        self._accounts: dict[str, Account] = {}
        self._funded: dict[str, int] = {}    # account_id -> total ever funded
        self._transactions: list[LedgerTransaction] = []
        self._lock = threading.Lock()

    # --- accounts -----------------------------------------------------------

    def create_account(self, account_id: str, balance: int) -> Account:
        if balance < 0:
            raise ValueError("initial balance cannot be negative")
        with self._lock:
            if account_id in self._accounts:
                raise ValueError(f"account already exists: {account_id}")
            account = Account(account_id, balance)
            self._accounts[account_id] = account
            self._funded[account_id] = balance
            return account

    def fund(self, account_id: str, amount: int) -> None:
        """Top up an existing account (fixture provisioning, not a ledger write)."""
        if amount < 0:
            raise ValueError("amount cannot be negative")
        with self._lock:
            account = self._accounts.get(account_id)
            if account is None:
                raise UnknownAccount(account_id)
            account.balance += amount
            self._funded[account_id] += amount

    def balance_of(self, account_id: str) -> int:
        account = self._accounts.get(account_id)
        if account is None:
            raise UnknownAccount(account_id)
        return account.balance

    def has_account(self, account_id: str) -> bool:
        return account_id in self._accounts

    # --- writes -------------------------------------------------------------

    def submit(self, kind: TxKind, payer: str, payload_size: int) -> LedgerTransaction:
        """Charge the flat fee for ``kind`` and append a transaction.

        Raises UnknownAccount, PayloadTooLarge, or InsufficientBalance; on
        any failure no state changes and no fee is charged.
        """
        if payload_size < 0:
            raise ValueError("payload_size cannot be negative")
        with self._lock:
            account = self._accounts.get(payer)
            if account is None:
                raise UnknownAccount(payer)
            if payload_size > self.config.block_size_limit:
                raise PayloadTooLarge(
                    f"payload {payload_size} exceeds block size limit "
                    f"{self.config.block_size_limit}"
                )
            fee = self.config.fees.fee_for(kind)
            if account.balance < fee:
                raise InsufficientBalance(
                    f"{payer}: balance {account.balance} < fee {fee}"
                )
            account.balance -= fee
            tx = LedgerTransaction(
                sequence=len(self._transactions) + 1,
                kind=kind,
                payer=payer,
                fee=fee,
                payload_size=payload_size,
                timestamp=self._clock(),
            )
            self._transactions.append(tx)
            return tx

    # --- queries ------------------------------------------------------------

    def tx_history(self, payer: Optional[str] = None) -> list[LedgerTransaction]:
        """All transactions in commit order, optionally filtered by payer."""
        if payer is None:
            return list(self._transactions)
        return [tx for tx in self._transactions if tx.payer == payer]

    def total_fees_collected(self) -> int:
        return sum(tx.fee for tx in self._transactions)

    def fees_conserve(self) -> bool:
        """Total funded minus current balances equals total fees collected."""
        funded = sum(self._funded.values())
        held = sum(a.balance for a in self._accounts.values())
        return funded - held == self.total_fees_collected()

    def accounts(self) -> list[Account]:
        return [Account(a.account_id, a.balance) for a in self._accounts.values()]

    # --- persistence ----------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "config": {
                "fees": {
                    "create_fee": self.config.fees.create_fee,
                    "update_fee": self.config.fees.update_fee,
                    "deactivate_fee": self.config.fees.deactivate_fee,
                },
                "block_size_limit": self.config.block_size_limit,
                "token_price_usd": self.config.token_price_usd,
            },
            "accounts": [
                {"account_id": a.account_id, "balance": a.balance}
                for a in self._accounts.values()
            ],
            "funded": dict(self._funded),
            "transactions": [
                {
                    "sequence": tx.sequence,
                    "kind": tx.kind.value,
                    "payer": tx.payer,
                    "fee": tx.fee,
                    "payload_size": tx.payload_size,
                    "timestamp": format_timestamp(tx.timestamp),
                }
                for tx in self._transactions
            ],
        }

    @classmethod
    def from_state(
        cls, state: dict, *, clock: Callable[[], datetime] = utc_now
    ) -> "Ledger":
        cfg = state["config"]
        ledger = cls(
            LedgerConfig(
                fees=FeeSchedule(**cfg["fees"]),
                block_size_limit=cfg["block_size_limit"],
                token_price_usd=cfg["token_price_usd"],
            ),
            clock=clock,
        )
        for acc in state["accounts"]:
            ledger._accounts[acc["account_id"]] = Account(
                acc["account_id"], acc["balance"]
            )
        ledger._funded = dict(state["funded"])
        for row in state["transactions"]:
            ledger._transactions.append(
                LedgerTransaction(
                    sequence=row["sequence"],
                    kind=TxKind(row["kind"]),
                    payer=row["payer"],
                    fee=row["fee"],
                    payload_size=row["payload_size"],
                    timestamp=parse_timestamp(row["timestamp"]),
                )
            )
        return ledger
