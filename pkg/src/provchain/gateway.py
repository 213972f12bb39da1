"""JSON-over-HTTP gateway in front of one supply chain engine.

The dispatch core is ``Gateway.handle``: a pure request-to-response
function, so tests and embedders can drive it in-process with the exact
semantics of the socket server. ``serve`` wraps the same object in a
threading HTTP server.

Key custody rule: accounts whose wallet mode is ClientManagedSecret never
get server-side signatures. Their document mutations must carry an
externally produced signature, or the gateway answers 400 SigningRefused.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional

from .costing import engine_cost_report
from .errors import (
    BindFailure,
    ConfigInvalid,
    InvalidToken,
    NotFound,
    ProvChainError,
    SigningRefused,
)
from .events import CommitMode, SupplyChainEngine
from .identity import Did, DidDocument, KeyCustody, ServiceEntry, signing_payload
from .trace import trace, track

# error class name -> HTTP status
_STATUS_BY_ERROR = {
    "InvalidToken": 401,
    "Unauthorized": 403,
    "NotController": 403,
    "NotFound": 404,
    "UnknownVersion": 404,
    "UnknownAccount": 404,
    "WrongState": 409,
    "Deactivated": 409,
    "PayloadTooLarge": 413,
    "CompartmentLimitExceeded": 422,
    "InsufficientBalance": 422,
    "IntegrityViolation": 500,
}
_DEFAULT_ERROR_STATUS = 400  # malformed input, mode violations, etc.


@dataclass(frozen=True)
class ApiRequest:
    method: str                   # "GET" or "POST"
    path: str                     # e.g. "/event/produce"
    body: Optional[dict] = None
    token: Optional[str] = None


@dataclass(frozen=True)
class ApiResponse:
    status: int
    body: dict

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


@dataclass(frozen=True)
class GatewayConfig:
    tokens: dict[str, str] = field(default_factory=dict)  # bearer token -> account
    host: str = "127.0.0.1"
    port: int = 0  # 0 = ephemeral

    def validate(self) -> None:
        if not self.tokens:
            raise ConfigInvalid("gateway needs at least one bearer token")
        for token, account in self.tokens.items():
            if not token or not account:
                raise ConfigInvalid("empty token or account in token table")


class Gateway:
    def __init__(self, engine: SupplyChainEngine, config: GatewayConfig):
        config.validate()
        self.engine = engine
        self.config = config

    # --- dispatch ------------------------------------------------------------

    def handle(self, request: ApiRequest) -> ApiResponse:
        try:
            account = self._authenticate(request.token)
            return self._route(request, account)
        except ProvChainError as exc:
            status = _STATUS_BY_ERROR.get(exc.error_code, _DEFAULT_ERROR_STATUS)
            return ApiResponse(
                status=status, body={"error": exc.error_code, "message": str(exc)}
            )
        except (KeyError, TypeError, ValueError) as exc:
            return ApiResponse(
                status=400, body={"error": "BadRequest", "message": str(exc)}
            )

    def _authenticate(self, token: Optional[str]) -> str:
        if token is None or token not in self.config.tokens:
            raise InvalidToken("missing or unknown bearer token")
        return self.config.tokens[token]

    def _route(self, request: ApiRequest, account: str) -> ApiResponse:
        method, path = request.method.upper(), request.path.rstrip("/")
        body = request.body or {}
        if method == "POST":
            handler = {
                "/did/create": self._did_create,
                "/did/update": self._did_update,
                "/did/deactivate": self._did_deactivate,
                "/event/produce": self._event_produce,
                "/event/ship": self._event_ship,
                "/event/receive": self._event_receive,
                "/event/manufacture": self._event_manufacture,
                "/event/withdraw": self._event_withdraw,
            }.get(path)
            if handler is not None:
                return handler(account, body)
        elif method == "GET":
            if path == "/did/list":
                return self._did_list(account)
            if path == "/cost/report":
                return self._cost_report()
            for prefix, handler in (
                ("/did/search/", self._did_search),
                ("/did/versions/", self._did_versions),
                ("/trace/", self._trace),
                ("/track/", self._track),
            ):
                if path.startswith(prefix):
                    return handler(path[len(prefix):])
        raise NotFound(f"{method} {path}")

    # --- identity endpoints ------------------------------------------------------

    def _actor(self, account: str):
        return self.engine.actor_by_account(account)

    def _signing_actor(self, account: str):
        """Actor whose wallet the engine may sign with for this request."""
        actor = self._actor(account)
        if actor.wallet.mode is KeyCustody.CLIENT_MANAGED_SECRET:
            raise SigningRefused(
                f"{account} keys are client-managed; event endpoints sign server-side"
            )
        return actor

    def _did_create(self, account: str, body: dict) -> ApiResponse:
        actor = self._actor(account)
        services = tuple(
            ServiceEntry.from_dict(s) for s in body.get("services", ())
        )
        did, document = self.engine.registrar.create_did(
            actor.wallet, services, account
        )
        _, metadata = self.engine.registrar.resolve(did)
        return ApiResponse(
            200,
            {
                "did": did.text(),
                "document": document.to_dict(),
                "metadata": metadata.to_dict(),
            },
        )

    def _signature_for(
        self, account: str, body: dict, new_body_bytes: bytes, previous_version: str
    ) -> bytes:
        """Client-supplied signature, or a server-side one when custody allows."""
        supplied = body.get("signature")
        if supplied is not None:
            return bytes.fromhex(supplied)
        actor = self._actor(account)
        if actor.wallet.mode is KeyCustody.CLIENT_MANAGED_SECRET:
            raise SigningRefused(
                f"{account} keys are client-managed; supply a signature"
            )
        return actor.wallet.sign(signing_payload(new_body_bytes, previous_version))

    def _did_update(self, account: str, body: dict) -> ApiResponse:
        did = Did.parse(body["did"])
        new_body = DidDocument.from_dict(body["document"])
        _, metadata = self.engine.registrar.resolve(did)
        signature = self._signature_for(
            account, body, new_body.canonical_bytes(), metadata.version_id
        )
        new_metadata = self.engine.registrar.update_did(
            did, new_body, signature, account
        )
        return ApiResponse(200, {"metadata": new_metadata.to_dict()})

    def _did_deactivate(self, account: str, body: dict) -> ApiResponse:
        did = Did.parse(body["did"])
        current, metadata = self.engine.registrar.resolve(did)
        signature = self._signature_for(
            account, body, current.canonical_bytes(), metadata.version_id
        )
        new_metadata = self.engine.registrar.deactivate_did(did, signature, account)
        return ApiResponse(200, {"metadata": new_metadata.to_dict()})

    def _did_list(self, account: str) -> ApiResponse:
        dids = self.engine.registrar.list_dids(account)
        return ApiResponse(200, {"dids": [d.text() for d in dids]})

    def _did_search(self, did_text: str) -> ApiResponse:
        document, metadata = self.engine.registrar.resolve(Did.parse(did_text))
        return ApiResponse(
            200, {"document": document.to_dict(), "metadata": metadata.to_dict()}
        )

    def _did_versions(self, did_text: str) -> ApiResponse:
        versions = self.engine.registrar.list_versions(Did.parse(did_text))
        return ApiResponse(200, {"versions": [m.to_dict() for m in versions]})

    # --- event endpoints ------------------------------------------------------------

    def _event_produce(self, account: str, body: dict) -> ApiResponse:
        actor = self._signing_actor(account)
        did, cid = self.engine.produce(actor, body.get("attributes"))
        return ApiResponse(200, {"did": did.text(), "cid": cid.text()})

    def _event_ship(self, account: str, body: dict) -> ApiResponse:
        actor = self._signing_actor(account)
        recipient = self.engine.actor_by_account(body["recipient"])
        cid = self.engine.ship(
            actor, Did.parse(body["asset"]), recipient, body.get("attributes")
        )
        return ApiResponse(200, {"cid": cid.text()})

    def _event_receive(self, account: str, body: dict) -> ApiResponse:
        actor = self._signing_actor(account)
        cid = self.engine.receive(
            actor, Did.parse(body["asset"]), body.get("attributes")
        )
        return ApiResponse(200, {"cid": cid.text()})

    def _event_manufacture(self, account: str, body: dict) -> ApiResponse:
        actor = self._signing_actor(account)
        compartments = [Did.parse(c) for c in body["compartments"]]
        mode = CommitMode(body["commit_mode"]) if "commit_mode" in body else None
        did, cid = self.engine.manufacture(
            actor, compartments, body.get("attributes"), mode
        )
        return ApiResponse(200, {"did": did.text(), "cid": cid.text()})

    def _event_withdraw(self, account: str, body: dict) -> ApiResponse:
        actor = self._signing_actor(account)
        cid = self.engine.withdraw(
            actor,
            Did.parse(body["asset"]),
            body.get("reason", ""),
            bool(body.get("deactivate", False)),
        )
        return ApiResponse(200, {"cid": cid.text()})

    # --- read endpoints ----------------------------------------------------------------

    def _trace(self, did_text: str) -> ApiResponse:
        report = trace(self.engine.registrar, self.engine.store, Did.parse(did_text))
        return ApiResponse(200, report.to_dict())

    def _track(self, did_text: str) -> ApiResponse:
        result = track(self.engine.registrar, Did.parse(did_text))
        return ApiResponse(
            200,
            {
                "state": result.state.to_dict(),
                "resolutionCount": result.resolution_count,
            },
        )

    def _cost_report(self) -> ApiResponse:
        reports = engine_cost_report(self.engine)
        return ApiResponse(200, {"reports": [r.to_dict() for r in reports]})


# --- socket server -------------------------------------------------------------------

_BEARER_RE = re.compile(r"^Bearer\s+(.+)$")


class _Handler(BaseHTTPRequestHandler):
    gateway: Gateway  # set by _make_handler

    def do_GET(self):  # noqa: N802 (http.server API)
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        body: Optional[dict] = None
        length = int(self.headers.get("Content-Length", 0))
        if length:
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._reply(400, {"error": "BadRequest", "message": "invalid JSON body"})
                return
        token = None
        auth = self.headers.get("Authorization", "")
        match = _BEARER_RE.match(auth)
        if match:
            token = match.group(1)
        response = self.gateway.handle(
            ApiRequest(method=method, path=self.path, body=body, token=token)
        )
        self._reply(response.status, response.body)

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, format: str, *args: Any) -> None:
        pass  # keep the server quiet; callers own their logging


def _make_handler(gateway: Gateway) -> type:
    return type("GatewayHandler", (_Handler,), {"gateway": gateway})


class GatewayServer:
    """Running socket server; shut down with ``close``."""

    def __init__(self, gateway: Gateway):
        config = gateway.config
        try:
            self._httpd = ThreadingHTTPServer(
                (config.host, config.port), _make_handler(gateway)
            )
        except OSError as exc:
            raise BindFailure(f"{config.host}:{config.port}: {exc}") from exc
        self.gateway = gateway
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="gateway", daemon=True
        )
        self._thread.start()

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)


def serve(engine: SupplyChainEngine, config: GatewayConfig) -> GatewayServer:
    """Start serving; returns a handle whose ``close`` stops the server."""
    return GatewayServer(Gateway(engine, config))
