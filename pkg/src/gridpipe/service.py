"""The embedded service container: named service instances over HTTP/1.1.

Each exposed deployment lives under the fixed URL scheme

    http://{host}:{port}/ogsa/services/proteusgrid/ProteusGridService/{name}

GET on the service URL returns its JSON descriptor; subscribe/push/pull/
unsubscribe/status move framed data between remote clients and the deployed
chain. Frames carry contiguous sequence numbers per subscription; a frame
with eos=true closes the stream. Pull is a long poll.
"""

from __future__ import annotations

import errno
import json
import re
import secrets
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit, parse_qs

from . import wire
from .errors import (
    BindFailure,
    GridPipeError,
    InputClosed,
    InvalidName,
    MalformedUrl,
    NameCollision,
    NotFound,
    NotRunning,
    PortInUse,
    SequenceGap,
    UnknownSubscription,
)
from .model import ElementType

BASE_PATH = "/ogsa/services/proteusgrid/ProteusGridService"
SERVICE_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
PROTOCOL_VERSION = 1

# How GridPipeError classes map onto HTTP statuses when they cross the wire.
ERROR_STATUS = {
    "NotFound": 404,
    "UnknownSubscription": 404,
    "SequenceGap": 400,
    "InvalidName": 400,
    "WrongElementType": 400,
    "NameCollision": 409,
    "InputClosed": 409,
    "NotRunning": 409,
}

MAX_PULL_WAIT_MILLIS = 60_000


@dataclass(frozen=True)
class ServiceUrl:
    host: str
    port: int
    service_name: str

    def render(self) -> str:
        return f"http://{self.host}:{self.port}{BASE_PATH}/{self.service_name}"

    @classmethod
    def parse(cls, text: str) -> "ServiceUrl":
        m = re.match(
            r"^http://(?P<host>[A-Za-z0-9_.-]+):(?P<port>\d{1,5})"
            + re.escape(BASE_PATH)
            + r"/(?P<name>[A-Za-z0-9_-]{1,64})$",
            text,
        )
        if not m:
            raise MalformedUrl(f"not a service URL: {text!r}")
        port = int(m.group("port"))
        if not 1 <= port <= 65535:
            raise MalformedUrl(f"port out of range in {text!r}")
        return cls(m.group("host"), port, m.group("name"))


@dataclass(frozen=True)
class ServiceDescriptor:
    """The machine-readable declaration of one service instance."""

    service_name: str
    input_element: ElementType
    output_element: ElementType
    params_echo: tuple  # ({"shell","kind","params"}, ...) for the processing shells
    protocol_version: int = PROTOCOL_VERSION

    def to_wire(self) -> dict:
        return {
            "serviceName": self.service_name,
            "inputElement": self.input_element.tag,
            "outputElement": self.output_element.tag,
            "params": [dict(e) for e in self.params_echo],
            "protocolVersion": self.protocol_version,
        }

    @classmethod
    def from_wire(cls, doc) -> "ServiceDescriptor":
        try:
            echo = []
            for entry in doc["params"]:
                echo.append(
                    {
                        "shell": str(entry["shell"]),
                        "kind": str(entry["kind"]),
                        "params": dict(entry["params"]),
                    }
                )
            return cls(
                service_name=str(doc["serviceName"]),
                input_element=ElementType.from_tag(doc["inputElement"]),
                output_element=ElementType.from_tag(doc["outputElement"]),
                params_echo=tuple(echo),
                protocol_version=int(doc["protocolVersion"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GridPipeError(f"malformed service descriptor: {exc}") from None


def descriptor_for(deployment, service_name: str) -> ServiceDescriptor:
    module = deployment.module
    echo = []
    for shell in module.processing_shells:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in shell.params.items()}
        echo.append({"shell": shell.id, "kind": shell.kind, "params": params})
    return ServiceDescriptor(
        service_name=service_name,
        input_element=module.input_element,
        output_element=module.output_element,
        params_echo=tuple(echo),
    )


OPEN = "open"
CLOSED = "closed"


class _Subscription:
    """One client stream through a deployment; a strict FIFO channel."""

    def __init__(self, sub_id: str, service: "_ExposedService"):
        self.sub_id = sub_id
        self.service = service
        self.cond = threading.Condition()
        self.next_input_seq = 0
        self.input_closed = False
        self.next_output_seq = 0
        self.pending = []  # undelivered wire frames, in seq order
        self.state = OPEN

    def push(self, seq: int, payload_b64: str, eos: bool) -> None:
        with self.cond:
            if self.state != OPEN or self.input_closed:
                raise InputClosed("input side of this subscription is closed")
            if seq != self.next_input_seq:
                raise SequenceGap(self.next_input_seq, seq)
            if eos:
                if payload_b64:
                    raise GridPipeError("eos frames carry an empty payload")
                self.input_closed = True
                self.next_input_seq = seq + 1
                self.pending.append(self._frame(seq, "", True))
                self.cond.notify_all()
                return
            descriptor = self.service.descriptor
            elements = wire.decode_payload(descriptor.input_element, payload_b64)
            out, _report = self.service.deployment.process_frame(elements)
            out_b64 = wire.encode_payload(descriptor.output_element, out)
            self.next_input_seq = seq + 1
            self.pending.append(self._frame(seq, out_b64, False))
            self.cond.notify_all()

    def _frame(self, seq: int, payload_b64: str, eos: bool) -> dict:
        return {"subId": self.sub_id, "seq": seq, "payload": payload_b64, "eos": eos}

    def pull(self, max_wait_millis: int) -> list:
        deadline = time.monotonic() + min(max_wait_millis, MAX_PULL_WAIT_MILLIS) / 1000.0
        with self.cond:
            while True:
                if self.pending:
                    frames = self.pending
                    self.pending = []
                    self.next_output_seq = frames[-1]["seq"] + (0 if frames[-1]["eos"] else 1)
                    if frames[-1]["eos"]:
                        self.state = CLOSED
                    return frames
                if self.state == CLOSED:
                    return []
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self.cond.wait(remaining)

    def close(self) -> None:
        with self.cond:
            self.state = CLOSED
            self.input_closed = True
            self.pending = []
            self.cond.notify_all()

    def status(self) -> dict:
        with self.cond:
            return {
                "state": self.state,
                "nextInputSeq": self.next_input_seq,
                "nextOutputSeq": self.next_output_seq,
            }


class _ExposedService:
    def __init__(self, name: str, deployment, descriptor: ServiceDescriptor):
        self.name = name
        self.deployment = deployment
        self.descriptor = descriptor
        self.lock = threading.Lock()
        self.subscriptions: dict = {}

    def subscribe(self) -> _Subscription:
        sub = _Subscription(secrets.token_hex(16), self)
        with self.lock:
            self.subscriptions[sub.sub_id] = sub
        return sub

    def subscription(self, sub_id: str) -> _Subscription:
        with self.lock:
            sub = self.subscriptions.get(sub_id)
        if sub is None:
            raise UnknownSubscription(f"no subscription {sub_id!r}")
        return sub

    def close_all(self) -> None:
        with self.lock:
            subs = list(self.subscriptions.values())
        for sub in subs:
            sub.close()


class ServiceContainer:
    """HTTP container hosting any number of named service instances."""

    def __init__(self, bind_host: str, port: int):
        container = self

        class Handler(_ContainerHandler):
            pass

        Handler.container = container
        try:
            self._httpd = ThreadingHTTPServer((bind_host, port), Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {port} on {bind_host} is already in use") from None
            raise BindFailure(f"cannot bind {bind_host}:{port}: {exc}") from None
        self._httpd.daemon_threads = True
        self.host = bind_host
        self.port = self._httpd.server_address[1]
        self._lock = threading.Lock()
        self._services: dict = {}
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05),
            name="gridpipe-container",
            daemon=True,
        )
        self._thread.start()

    # -- service management (in-process surface) -------------------------------

    def expose(self, deployment, service_name: str) -> ServiceUrl:
        if not SERVICE_NAME_RE.match(service_name or ""):
            raise InvalidName(service_name)
        if deployment.state != "running":
            raise NotRunning("deployment must be running to expose a service")
        with self._lock:
            if service_name in self._services:
                raise NameCollision(service_name)
            descriptor = descriptor_for(deployment, service_name)
            self._services[service_name] = _ExposedService(service_name, deployment, descriptor)
        return ServiceUrl(self.host, self.port, service_name)

    def unexpose(self, service_name: str) -> None:
        with self._lock:
            service = self._services.pop(service_name, None)
        if service is not None:
            service.close_all()

    def service_names(self) -> list:
        with self._lock:
            return list(self._services)

    def service(self, name: str) -> _ExposedService:
        with self._lock:
            service = self._services.get(name)
        if service is None:
            raise NotFound(f"no service {name!r}")
        return service

    def url_for(self, service_name: str) -> ServiceUrl:
        return ServiceUrl(self.host, self.port, service_name)

    def close(self) -> None:
        with self._lock:
            services = list(self._services.values())
            self._services.clear()
        for service in services:
            service.close_all()
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def start_container(bind_host: str, port: int) -> ServiceContainer:
    """Start the container; raises PortInUse/BindFailure when it cannot listen."""
    return ServiceContainer(bind_host, port)


class _ContainerHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    container: ServiceContainer = None

    # Silence the default stderr access log.
    def log_message(self, fmt, *args):
        pass

    def _send_json(self, status: int, doc) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_obj(self, exc: GridPipeError) -> None:
        code = type(exc).__name__
        status = ERROR_STATUS.get(code, 400)
        doc = {"error": code, "detail": str(exc)}
        if isinstance(exc, SequenceGap):
            doc["expected"] = exc.expected
            doc["got"] = exc.got
        self._send_json(status, doc)

    def _read_body_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            doc = json.loads(raw.decode("utf-8")) if raw else {}
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise GridPipeError("request body is not valid JSON") from None
        if not isinstance(doc, dict):
            raise GridPipeError("request body must be a JSON object")
        return doc

    def _route(self):
        split = urlsplit(self.path)
        path = split.path
        if path != BASE_PATH and not path.startswith(BASE_PATH + "/"):
            raise NotFound(f"no resource at {path}")
        rest = path[len(BASE_PATH):].strip("/")
        query = {k: v[-1] for k, v in parse_qs(split.query).items()}
        if not rest:
            return None, None, query  # service index
        parts = rest.split("/")
        if len(parts) == 1:
            return parts[0], None, query
        if len(parts) == 2:
            return parts[0], parts[1], query
        raise NotFound(f"no resource at {path}")

    def do_GET(self):
        try:
            name, verb, query = self._route()
            if name is None:
                self._send_json(200, self.container.service_names())
                return
            service = self.container.service(name)
            if verb is None:
                self._send_json(200, service.descriptor.to_wire())
            elif verb == "pull":
                sub = service.subscription(self._require(query, "subId"))
                max_wait = self._int_param(query.get("maxWaitMillis", "0"))
                self._send_json(200, {"frames": sub.pull(max_wait)})
            elif verb == "status":
                sub = service.subscription(self._require(query, "subId"))
                self._send_json(200, sub.status())
            else:
                raise NotFound(f"no such call {verb!r}")
        except GridPipeError as exc:
            self._send_error_obj(exc)

    def do_POST(self):
        try:
            name, verb, _query = self._route()
            if name is None or verb is None:
                raise NotFound("POST needs a service call path")
            service = self.container.service(name)
            body = self._read_body_json()
            if verb == "subscribe":
                sub = service.subscribe()
                self._send_json(200, {"subId": sub.sub_id})
            elif verb == "push":
                sub = service.subscription(self._require(body, "subId"))
                seq = body.get("seq")
                if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
                    raise GridPipeError("push needs a non-negative integer seq")
                payload = body.get("payload", "")
                eos = body.get("eos", False)
                if not isinstance(payload, str) or not isinstance(eos, bool):
                    raise GridPipeError("push needs a base64 payload and a boolean eos")
                sub.push(seq, payload, eos)
                self._send_json(200, {"accepted": True})
            elif verb == "unsubscribe":
                sub = service.subscription(self._require(body, "subId"))
                sub.close()
                self._send_json(200, {"closed": True})
            else:
                raise NotFound(f"no such call {verb!r}")
        except GridPipeError as exc:
            self._send_error_obj(exc)

    @staticmethod
    def _require(mapping, key: str) -> str:
        value = mapping.get(key)
        if not isinstance(value, str) or not value:
            raise GridPipeError(f"missing {key!r}")
        return value

    @staticmethod
    def _int_param(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise GridPipeError("maxWaitMillis must be an integer") from None
        if value < 0:
            raise GridPipeError("maxWaitMillis must be non-negative")
        return value
