"""Command line front end over a directory workspace.

A workspace is a directory holding ``state.json`` (ledger, registry,
actors, clock) and ``store/`` (one file per content-addressed event
record). Every mutating verb loads the workspace, applies one operation,
and writes the state back, so a sequence of invocations behaves like one
long-lived engine process.

Exit codes: 0 on success, 1 on a domain error (printed to stderr as
``ErrorName: message``), 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import timedelta
from pathlib import Path
from random import Random
from typing import Callable, Optional

from . import bench
from .canonical import TickingClock, parse_timestamp, utc_now
from .costing import engine_cost_report
from .errors import ConfigInvalid, NotFound, ProvChainError
from .events import CommitMode, EngineConfig, Role, SupplyChainEngine
from .gateway import GatewayConfig, serve
from .identity import Did, KeyCustody
from .scenario import execute_scenario, generate_scenario, parse_scenario
from .store import DirectoryObjectStore
from .trace import trace, track, verify_history_chain

STATE_FILE = "state.json"
STORE_DIR = "store"


# --- workspace ---------------------------------------------------------------------


class Workspace:
    """Load/save boundary between the CLI and a persistent engine."""

    def __init__(self, root: Path):
        self.root = Path(root)

    @property
    def state_path(self) -> Path:
        return self.root / STATE_FILE

    @property
    def store_path(self) -> Path:
        return self.root / STORE_DIR

    def exists(self) -> bool:
        return self.state_path.exists()

    def load(self) -> SupplyChainEngine:
        if not self.exists():
            raise NotFound(
                f"no workspace at {self.root} (run 'provchain init --data {self.root}')"
            )
        state = json.loads(self.state_path.read_text(encoding="utf-8"))
        clock = _clock_from_state(state["clock"])
        return SupplyChainEngine.from_state(
            state["engine"], clock=clock, store=DirectoryObjectStore(self.store_path)
        )

    def save(self, engine: SupplyChainEngine) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        state = {
            "clock": _clock_to_state(engine.clock),
            "engine": engine.to_state(),
        }
        text = json.dumps(state, indent=2, sort_keys=True) + "\n"
        tmp = self.state_path.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, self.state_path)


def _clock_to_state(clock: Callable) -> dict:
    if isinstance(clock, TickingClock):
        return {"type": "ticking", **clock.to_state()}
    return {"type": "utc"}


def _clock_from_state(state: dict) -> Callable:
    if state["type"] == "ticking":
        return TickingClock.from_state(state)
    return utc_now


def _make_clock(start: Optional[str], step: float) -> Callable:
    if start is None:
        return utc_now
    return TickingClock(_parse_clock_start(start), timedelta(seconds=step))


def _parse_clock_start(text: str):
    for candidate in (text, text.replace("Z", ".000000Z")):
        try:
            return parse_timestamp(candidate)
        except ValueError:
            continue
    raise ConfigInvalid(
        f"clock start {text!r} is not of the form 2026-01-01T00:00:00[.000000]Z"
    )


# --- argument helpers --------------------------------------------------------------


def _attr_pair(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key, value


def _did_arg(text: str) -> Did:
    try:
        return Did.parse(text)
    except ProvChainError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# --- verbs -------------------------------------------------------------------------


def cmd_init(args) -> int:
    ws = Workspace(args.data)
    if ws.exists():
        raise ConfigInvalid(f"workspace already initialized at {ws.root}")
    clock = _make_clock(args.clock_start, args.clock_step)
    config = EngineConfig(
        commit_mode_default=CommitMode(args.commit_mode),
        lean_receiving=args.lean_receiving,
        max_compartments_per_tx=args.max_compartments,
    )
    engine = SupplyChainEngine(
        config,
        seed=args.seed,
        clock=clock,
        store=DirectoryObjectStore(ws.store_path),
    )
    ws.save(engine)
    _emit({"workspace": str(ws.root), "seed": args.seed})
    return 0


def cmd_actor_create(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    actor = engine.register_actor(
        args.alias,
        Role(args.role),
        balance=args.balance,
        seed=bytes.fromhex(args.seed_hex) if args.seed_hex else None,
        mode=KeyCustody(args.mode),
    )
    ws.save(engine)
    _emit(
        {
            "alias": actor.alias,
            "role": actor.role.value,
            "did": actor.did.text(),
            "balance": engine.ledger.balance_of(actor.account),
        }
    )
    return 0


def cmd_produce(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    actor = engine.actor(args.actor)
    did, cid = engine.produce(actor, dict(args.attr or []))
    ws.save(engine)
    _emit({"did": did.text(), "cid": cid.text()})
    return 0


def cmd_ship(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    cid = engine.ship(
        engine.actor(args.actor), args.asset, engine.actor(args.to), dict(args.attr or [])
    )
    ws.save(engine)
    _emit({"did": args.asset.text(), "cid": cid.text()})
    return 0


def cmd_receive(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    cid = engine.receive(engine.actor(args.actor), args.asset, dict(args.attr or []))
    ws.save(engine)
    _emit({"did": args.asset.text(), "cid": cid.text()})
    return 0


def cmd_manufacture(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    mode = CommitMode(args.commit_mode) if args.commit_mode else None
    did, cid = engine.manufacture(
        engine.actor(args.actor), args.compartment, dict(args.attr or []), mode
    )
    ws.save(engine)
    _emit({"did": did.text(), "cid": cid.text()})
    return 0


def cmd_withdraw(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    cid = engine.withdraw(
        engine.actor(args.actor), args.asset, args.reason, args.deactivate
    )
    ws.save(engine)
    _emit({"did": args.asset.text(), "cid": cid.text()})
    return 0


def cmd_resolve(args) -> int:
    engine = Workspace(args.data).load()
    document, metadata = engine.registrar.resolve(args.did)
    if args.version:
        document = engine.registrar.resolve_version(args.did, args.version)
    _emit({"document": document.to_dict(), "metadata": metadata.to_dict()})
    return 0


def cmd_versions(args) -> int:
    engine = Workspace(args.data).load()
    metas = engine.registrar.list_versions(args.did)
    _emit({"did": args.did.text(), "versions": [m.to_dict() for m in metas]})
    return 0


def cmd_state(args) -> int:
    engine = Workspace(args.data).load()
    _emit(engine.asset_state(args.did).to_dict())
    return 0


def cmd_trace(args) -> int:
    engine = Workspace(args.data).load()
    report = trace(engine.registrar, engine.store, args.did)
    _emit(report.to_dict())
    return 0


def cmd_track(args) -> int:
    engine = Workspace(args.data).load()
    result = track(engine.registrar, args.did)
    _emit(
        {
            "state": result.state.to_dict(),
            "resolutionCount": result.resolution_count,
        }
    )
    return 0


def cmd_cost_report(args) -> int:
    engine = Workspace(args.data).load()
    reports = engine_cost_report(engine)
    if args.json:
        _emit({"reports": [r.to_dict() for r in reports]})
        return 0
    header = f"{'stakeholder':<20} {'creates':>7} {'updates':>7} {'deact':>5} {'CT':>10} {'USD':>12}"
    print(header)
    print("-" * len(header))
    for r in reports:
        print(
            f"{r.stakeholder:<20} {r.creates:>7} {r.updates:>7} {r.deactivates:>5} "
            f"{r.total_ct:>10} {str(r.total_usd):>12}"
        )
    total_ct = sum(r.total_ct for r in reports)
    total_usd = sum(r.total_usd for r in reports)
    print("-" * len(header))
    print(f"{'total':<20} {'':>7} {'':>7} {'':>5} {total_ct:>10} {str(total_usd):>12}")
    return 0


def cmd_verify_store(args) -> int:
    engine = Workspace(args.data).load()
    objects = engine.store.verify_all()
    bad: list[str] = []
    for did in engine.registrar.all_dids():
        report = verify_history_chain(engine.registrar, did)
        if not report.ok:
            bad.append(f"{did.text()}: {'; '.join(report.issues)}")
    _emit(
        {
            "objectsVerified": objects,
            "documentsVerified": len(engine.registrar.all_dids()) - len(bad),
            "documentsFailed": bad,
            "ok": not bad,
        }
    )
    return 0 if not bad else 1


def cmd_run_scenario(args) -> int:
    ws = Workspace(args.data)
    if ws.exists():
        raise ConfigInvalid(
            f"workspace at {ws.root} already exists; scenarios need a fresh one"
        )
    script = parse_scenario(json.loads(Path(args.script).read_text(encoding="utf-8")))
    clock = _make_clock(args.clock_start, args.clock_step)
    config = EngineConfig(lean_receiving=args.lean_receiving)
    engine = SupplyChainEngine(
        config,
        seed=args.seed,
        clock=clock,
        store=DirectoryObjectStore(ws.store_path),
    )
    run = execute_scenario(engine, script)
    ws.save(engine)
    _emit(
        {
            "scenario": script.name,
            "events": len(run.log),
            "assets": {alias: did.text() for alias, did in run.asset_dids.items()},
            "opCounts": engine.op_counts(),
            "feesCollected": engine.ledger.total_fees_collected(),
        }
    )
    return 0


def cmd_gen_scenario(args) -> int:
    data = generate_scenario(
        Random(args.seed),
        num_events=args.events,
        name=args.name or f"generated-{args.seed}",
        allow_withdraw=not args.no_withdraw,
    )
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _emit({"written": args.out, "events": args.events})
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    if args.kind == "events":
        rows = bench.bench_events(
            seed=args.seed,
            assets_per_batch=args.batch,
            compartments_per_product=args.compartments,
        )
        summary: dict = {"rows": len(rows)}
    elif args.kind == "manufacture":
        config = None
        if args.max_compartments is not None:
            config = EngineConfig(max_compartments_per_tx=args.max_compartments)
        sweep = bench.bench_manufacture_sweep(
            seed=args.seed, max_compartments=args.sweep_max, config=config
        )
        rows = sweep.rows
        summary = {"rows": len(rows), "failedAt": sweep.failed_at, "failure": sweep.failure}
    else:
        result = bench.bench_trace_sweep(
            seed=args.seed,
            num_assets=args.assets,
            max_events=args.sweep_max,
        )
        rows = result.rows
        summary = {
            "rows": len(rows),
            "resolutionFit": {
                "slope": result.resolution_fit.slope,
                "intercept": result.resolution_fit.intercept,
                "rSquared": result.resolution_fit.r_squared,
            },
            "timeFit": {
                "slope": result.time_fit.slope,
                "intercept": result.time_fit.intercept,
                "rSquared": result.time_fit.r_squared,
            },
        }
    bench.write_csv(rows, args.out)
    summary["csv"] = args.out
    _emit(summary)
    return 0


def cmd_serve(args) -> int:
    ws = Workspace(args.data)
    engine = ws.load()
    tokens = dict(args.token or [])
    server = serve(engine, GatewayConfig(tokens=tokens, host=args.host, port=args.port))
    print(f"serving on {server.base_url} (Ctrl-C to stop)", file=sys.stderr)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
        ws.save(engine)
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provchain",
        description="Supply chain provenance over a simulated DID registry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, data: bool = True):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        if data:
            p.add_argument("--data", required=True, help="workspace directory")
        return p

    p = add("init", cmd_init, "create an empty workspace")
    p.add_argument("--seed", type=int, default=None, help="engine RNG seed")
    p.add_argument(
        "--clock-start",
        default=None,
        help="fixed start timestamp; enables the deterministic ticking clock",
    )
    p.add_argument("--clock-step", type=float, default=1.0, help="tick size in seconds")
    p.add_argument(
        "--commit-mode",
        choices=[m.value for m in CommitMode],
        default=CommitMode.SERVICE_LIST.value,
        help="default compartment commitment for manufacture",
    )
    p.add_argument("--lean-receiving", action="store_true")
    p.add_argument("--max-compartments", type=int, default=None)

    actor = sub.add_parser("actor", help="actor management")
    actor_sub = actor.add_subparsers(dest="actor_command", required=True)
    p = actor_sub.add_parser(
        "create", help="register an actor (account, wallet, identity)"
    )
    p.set_defaults(func=cmd_actor_create)
    p.add_argument("--data", required=True, help="workspace directory")
    p.add_argument("--alias", required=True)
    p.add_argument("--role", required=True, choices=[r.value for r in Role])
    p.add_argument("--balance", type=int, default=100_000)
    p.add_argument("--seed-hex", default=None, help="32-byte Ed25519 seed, hex")
    p.add_argument(
        "--mode",
        choices=[m.value for m in KeyCustody],
        default=KeyCustody.INTERNAL_SECRET.value,
    )

    p = add("produce", cmd_produce, "mint a raw material asset")
    p.add_argument("--actor", required=True)
    p.add_argument("--attr", action="append", type=_attr_pair, metavar="KEY=VALUE")

    p = add("ship", cmd_ship, "hand an asset over to a recipient")
    p.add_argument("--actor", required=True)
    p.add_argument("--asset", required=True, type=_did_arg)
    p.add_argument("--to", required=True, help="recipient actor alias")
    p.add_argument("--attr", action="append", type=_attr_pair, metavar="KEY=VALUE")

    p = add("receive", cmd_receive, "confirm receipt of an in-transit asset")
    p.add_argument("--actor", required=True)
    p.add_argument("--asset", required=True, type=_did_arg)
    p.add_argument("--attr", action="append", type=_attr_pair, metavar="KEY=VALUE")

    p = add("manufacture", cmd_manufacture, "consume compartments into a product")
    p.add_argument("--actor", required=True)
    p.add_argument(
        "--compartment",
        action="append",
        required=True,
        type=_did_arg,
        help="input asset DID (repeatable)",
    )
    p.add_argument("--attr", action="append", type=_attr_pair, metavar="KEY=VALUE")
    p.add_argument("--commit-mode", choices=[m.value for m in CommitMode], default=None)

    p = add("withdraw", cmd_withdraw, "retire an asset")
    p.add_argument("--actor", required=True)
    p.add_argument("--asset", required=True, type=_did_arg)
    p.add_argument("--reason", default="")
    p.add_argument("--deactivate", action="store_true")

    p = add("resolve", cmd_resolve, "resolve a DID document")
    p.add_argument("did", type=_did_arg)
    p.add_argument("--version", default=None, help="specific version id")

    p = add("versions", cmd_versions, "list a document's version metadata")
    p.add_argument("did", type=_did_arg)

    p = add("state", cmd_state, "project an asset's current state")
    p.add_argument("did", type=_did_arg)

    p = add("trace", cmd_trace, "full recursive provenance of an asset")
    p.add_argument("did", type=_did_arg)

    p = add("track", cmd_track, "current status/controller from one resolution")
    p.add_argument("did", type=_did_arg)

    p = add("cost-report", cmd_cost_report, "fees charged so far, by payer")
    p.add_argument("--json", action="store_true")

    add("verify-store", cmd_verify_store, "re-hash stored records and version chains")

    p = add("run-scenario", cmd_run_scenario, "execute a scenario script in a fresh workspace")
    p.add_argument("script", help="scenario JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock-start", default="2026-01-01T00:00:00Z")
    p.add_argument("--clock-step", type=float, default=1.0)
    p.add_argument("--lean-receiving", action="store_true")

    p = add("gen-scenario", cmd_gen_scenario, "emit a seeded random scenario", data=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--events", type=int, required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-withdraw", action="store_true")

    p = add("bench", cmd_bench, "run a benchmark and write its CSV", data=False)
    p.add_argument("kind", choices=["events", "manufacture", "trace"])
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=30, help="assets per event batch")
    p.add_argument("--compartments", type=int, default=2)
    p.add_argument("--sweep-max", type=int, default=12)
    p.add_argument("--max-compartments", type=int, default=None)
    p.add_argument("--assets", type=int, default=20, help="trace sweep sample count")

    p = add("serve", cmd_serve, "expose the workspace over HTTP")
    p.add_argument(
        "--token",
        action="append",
        type=_attr_pair,
        metavar="TOKEN=ACCOUNT",
        required=True,
    )
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8430)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProvChainError as exc:
        print(f"{exc.error_code}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"ValueError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
