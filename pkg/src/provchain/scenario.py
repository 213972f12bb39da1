"""Scenario scripts: declarative actor tables plus ordered event commands.

A script is plain JSON so it can be shipped as a fixture, replayed through
the CLI or gateway, and costed without execution. ``generate_scenario``
produces random-but-legal scripts from a seeded RNG: every command respects
the asset state machine and actor roles, so generated scripts always execute
cleanly on a sufficiently funded engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Optional

from .errors import MalformedScript
from .events import (
    CommitMode,
    Role,
    SupplyChainEngine,
)
from .identity import Did, KeyCustody
from .store import Cid

_OPS = {"produce", "ship", "receive", "manufacture", "withdraw"}


@dataclass(frozen=True)
class ActorSpec:
    alias: str
    role: Role
    balance: int = 100_000
    seed: Optional[str] = None  # hex-encoded 32 bytes, optional
    mode: KeyCustody = KeyCustody.INTERNAL_SECRET

    def to_dict(self) -> dict:
        data: dict = {
            "alias": self.alias,
            "role": self.role.value,
            "balance": self.balance,
        }
        if self.seed is not None:
            data["seed"] = self.seed
        if self.mode is not KeyCustody.INTERNAL_SECRET:
            data["mode"] = self.mode.value
        return data


@dataclass(frozen=True)
class EventCommand:
    op: str
    actor: str
    asset: str                          # alias being acted on (or defined)
    to: Optional[str] = None            # ship target actor alias
    compartments: tuple[str, ...] = ()  # manufacture inputs, by alias
    attributes: dict = field(default_factory=dict)
    reason: str = ""
    deactivate: bool = False
    commit_mode: Optional[CommitMode] = None

    def to_dict(self) -> dict:
        data: dict = {"op": self.op, "actor": self.actor, "asset": self.asset}
        if self.to is not None:
            data["to"] = self.to
        if self.compartments:
            data["compartments"] = list(self.compartments)
        if self.attributes:
            data["attributes"] = dict(self.attributes)
        if self.reason:
            data["reason"] = self.reason
        if self.deactivate:
            data["deactivate"] = True
        if self.commit_mode is not None:
            data["commit_mode"] = self.commit_mode.value
        return data


@dataclass(frozen=True)
class ScenarioScript:
    actors: tuple[ActorSpec, ...]
    events: tuple[EventCommand, ...]
    name: str = ""

    def to_dict(self) -> dict:
        data: dict = {
            "actors": [a.to_dict() for a in self.actors],
            "events": [e.to_dict() for e in self.events],
        }
        if self.name:
            data["name"] = self.name
        return data


def parse_scenario(data: dict) -> ScenarioScript:
    """Validate raw JSON into a script; raises MalformedScript with a reason."""
    if not isinstance(data, dict):
        raise MalformedScript("script must be a JSON object")
    try:
        actor_rows = data["actors"]
        event_rows = data["events"]
    except KeyError as exc:
        raise MalformedScript(f"missing top-level key: {exc}") from exc
    if not isinstance(actor_rows, list) or not isinstance(event_rows, list):
        raise MalformedScript("'actors' and 'events' must be lists")

    actors: list[ActorSpec] = []
    seen_aliases: set[str] = set()
    for row in actor_rows:
        try:
            alias = row["alias"]
            role = Role(row["role"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedScript(f"bad actor row {row!r}: {exc}") from exc
        if alias in seen_aliases:
            raise MalformedScript(f"duplicate actor alias: {alias}")
        seen_aliases.add(alias)
        actors.append(
            ActorSpec(
                alias=alias,
                role=role,
                balance=int(row.get("balance", 100_000)),
                seed=row.get("seed"),
                mode=KeyCustody(row.get("mode", KeyCustody.INTERNAL_SECRET.value)),
            )
        )

    events: list[EventCommand] = []
    live_assets: set[str] = set()
    for position, row in enumerate(event_rows):
        try:
            op = row["op"]
            actor = row["actor"]
            asset = row["asset"]
        except (KeyError, TypeError) as exc:
            raise MalformedScript(f"event {position}: missing field {exc}") from exc
        if op not in _OPS:
            raise MalformedScript(f"event {position}: unknown op {op!r}")
        if actor not in seen_aliases:
            raise MalformedScript(f"event {position}: undeclared actor {actor!r}")
        compartments = tuple(row.get("compartments", ()))
        to = row.get("to")
        if op == "produce" or op == "manufacture":
            if asset in live_assets:
                raise MalformedScript(
                    f"event {position}: asset alias {asset!r} already defined"
                )
            live_assets.add(asset)
        elif asset not in live_assets:
            raise MalformedScript(
                f"event {position}: unknown asset alias {asset!r}"
            )
        if op == "ship":
            if to is None or to not in seen_aliases:
                raise MalformedScript(
                    f"event {position}: ship needs a declared 'to' actor"
                )
        if op == "manufacture":
            if not compartments:
                raise MalformedScript(
                    f"event {position}: manufacture needs compartments"
                )
            for alias in compartments:
                if alias not in live_assets or alias == asset:
                    raise MalformedScript(
                        f"event {position}: unknown compartment alias {alias!r}"
                    )
        mode_text = row.get("commit_mode")
        try:
            commit_mode = CommitMode(mode_text) if mode_text is not None else None
        except ValueError as exc:
            raise MalformedScript(f"event {position}: {exc}") from exc
        events.append(
            EventCommand(
                op=op,
                actor=actor,
                asset=asset,
                to=to,
                compartments=compartments,
                attributes=dict(row.get("attributes", {})),
                reason=row.get("reason", ""),
                deactivate=bool(row.get("deactivate", False)),
                commit_mode=commit_mode,
            )
        )
    return ScenarioScript(
        actors=tuple(actors), events=tuple(events), name=data.get("name", "")
    )


# --- execution ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExecutedEvent:
    op: str
    actor: str
    asset_alias: str
    asset_did: Did
    cid: Cid
    compartment_aliases: tuple[str, ...] = ()
    compartment_dids: tuple[Did, ...] = ()


@dataclass
class ScenarioRun:
    script: ScenarioScript
    asset_dids: dict[str, Did]          # alias -> DID, in definition order
    log: list[ExecutedEvent]

    def did_of(self, alias: str) -> Did:
        return self.asset_dids[alias]


def execute_scenario(engine: SupplyChainEngine, script: ScenarioScript) -> ScenarioRun:
    """Register the script's actors and replay its events on ``engine``."""
    for spec in script.actors:
        engine.register_actor(
            spec.alias,
            spec.role,
            balance=spec.balance,
            seed=bytes.fromhex(spec.seed) if spec.seed else None,
            mode=spec.mode,
        )
    asset_dids: dict[str, Did] = {}
    log: list[ExecutedEvent] = []
    for command in script.events:
        actor = engine.actor(command.actor)
        if command.op == "produce":
            did, cid = engine.produce(actor, command.attributes)
            asset_dids[command.asset] = did
        elif command.op == "ship":
            did = asset_dids[command.asset]
            cid = engine.ship(
                actor, did, engine.actor(command.to), command.attributes
            )
        elif command.op == "receive":
            did = asset_dids[command.asset]
            cid = engine.receive(actor, did, command.attributes)
        elif command.op == "manufacture":
            inputs = [asset_dids[alias] for alias in command.compartments]
            did, cid = engine.manufacture(
                actor, inputs, command.attributes, command.commit_mode
            )
            asset_dids[command.asset] = did
        elif command.op == "withdraw":
            did = asset_dids[command.asset]
            cid = engine.withdraw(actor, did, command.reason, command.deactivate)
        else:  # pragma: no cover - parse_scenario forbids this
            raise MalformedScript(f"unknown op {command.op!r}")
        log.append(
            ExecutedEvent(
                op=command.op,
                actor=command.actor,
                asset_alias=command.asset,
                asset_did=asset_dids[command.asset],
                cid=cid,
                compartment_aliases=command.compartments,
                compartment_dids=tuple(
                    asset_dids[a] for a in command.compartments
                ),
            )
        )
    return ScenarioRun(script=script, asset_dids=asset_dids, log=log)


# --- random generation -----------------------------------------------------------------


@dataclass
class _AssetSim:
    alias: str
    status: str        # mirrors AssetStatus values
    controller: str    # actor alias


def generate_scenario(
    rng: Random,
    *,
    num_events: int,
    name: str = "",
    allow_withdraw: bool = True,
    merkle_share: float = 0.3,
    balance: int = 5_000_000,
) -> dict:
    """Seeded random script with exactly ``num_events`` legal commands.

    Shape of the distribution: a handful of actors covering all five roles;
    each step picks uniformly among the currently legal command kinds, with
    produce always available as a fallback. Manufacture consumes one to four
    of the acting manufacturer's consumable assets and flips to a Merkle
    commitment with probability ``merkle_share``.
    """
    producers = [f"producer-{i}" for i in range(1, rng.randint(1, 3) + 1)]
    manufacturers = [f"manufacturer-{i}" for i in range(1, rng.randint(1, 2) + 1)]
    others = ["supplier-1", "retailer-1", "customer-1"]
    actors = (
        [{"alias": a, "role": Role.PRODUCER.value, "balance": balance} for a in producers]
        + [
            {"alias": a, "role": Role.MANUFACTURER.value, "balance": balance}
            for a in manufacturers
        ]
        + [
            {"alias": "supplier-1", "role": Role.SUPPLIER.value, "balance": balance},
            {"alias": "retailer-1", "role": Role.RETAILER.value, "balance": balance},
            {"alias": "customer-1", "role": Role.CUSTOMER.value, "balance": balance},
        ]
    )
    all_aliases = producers + manufacturers + others

    assets: dict[str, _AssetSim] = {}
    events: list[dict] = []
    produced_count = 0
    product_count = 0

    def consumables_of(actor_alias: str) -> list[_AssetSim]:
        return [
            a
            for a in assets.values()
            if a.controller == actor_alias and a.status in ("Produced", "Received")
        ]

    while len(events) < num_events:
        moves = ["produce"]
        shippable = [
            a for a in assets.values() if a.status in ("Produced", "Received")
        ]
        in_transit = [a for a in assets.values() if a.status == "InTransit"]
        manufacturable = [
            m for m in manufacturers if consumables_of(m)
        ]
        if shippable:
            moves.append("ship")
            if allow_withdraw:
                moves.append("withdraw")
        if in_transit:
            moves.append("receive")
        if manufacturable:
            moves.append("manufacture")
        move = rng.choice(moves)

        if move == "produce":
            produced_count += 1
            alias = f"asset-{produced_count}"
            producer = rng.choice(producers)
            events.append(
                {
                    "op": "produce",
                    "actor": producer,
                    "asset": alias,
                    "attributes": {"lot": str(produced_count)},
                }
            )
            assets[alias] = _AssetSim(alias, "Produced", producer)
        elif move == "ship":
            asset = rng.choice(shippable)
            recipient = rng.choice([a for a in all_aliases if a != asset.controller])
            events.append(
                {
                    "op": "ship",
                    "actor": asset.controller,
                    "asset": asset.alias,
                    "to": recipient,
                }
            )
            asset.status = "InTransit"
            asset.controller = recipient
        elif move == "receive":
            asset = rng.choice(in_transit)
            events.append(
                {"op": "receive", "actor": asset.controller, "asset": asset.alias}
            )
            asset.status = "Received"
        elif move == "manufacture":
            maker = rng.choice(manufacturable)
            pool = consumables_of(maker)
            count = rng.randint(1, min(4, len(pool)))
            inputs = rng.sample(pool, count)
            product_count += 1
            alias = f"product-{product_count}"
            command: dict = {
                "op": "manufacture",
                "actor": maker,
                "asset": alias,
                "compartments": [a.alias for a in inputs],
            }
            if rng.random() < merkle_share:
                command["commit_mode"] = CommitMode.MERKLE_ROOT.value
            events.append(command)
            for a in inputs:
                a.status = "Consumed"
            assets[alias] = _AssetSim(alias, "Produced", maker)
        else:  # withdraw
            asset = rng.choice(shippable)
            events.append(
                {
                    "op": "withdraw",
                    "actor": asset.controller,
                    "asset": asset.alias,
                    "reason": "randomized retirement",
                    "deactivate": rng.random() < 0.5,
                }
            )
            asset.status = "Withdrawn"

    script: dict = {"actors": actors, "events": events}
    if name:
        script["name"] = name
    return script
