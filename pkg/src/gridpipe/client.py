"""Client SDK: connect to a service URL, stream frames, collect results.

The client adds no transformation of its own; outputs observed here equal
what the deployed chain produces locally for the same inputs. There are no
automatic retries: a retried push would break sequence contiguity, so server
errors surface to the caller instead.
"""

from __future__ import annotations

import time
from typing import Optional

import httpx

from . import errors, wire
from .errors import (
    GridPipeError,
    NotFound,
    ProtocolError,
    Timeout,
    Unreachable,
)
from .model import check_elements
from .service import ServiceDescriptor, ServiceUrl

_PULL_CHUNK_MILLIS = 1000

# Server error codes rebuilt as typed exceptions client-side.
_WIRE_ERRORS = {
    name: getattr(errors, name)
    for name in (
        "NotFound",
        "UnknownSubscription",
        "InputClosed",
        "WrongElementType",
        "NotRunning",
        "InvalidName",
        "NameCollision",
    )
}


def _raise_server_error(doc: dict, status: int):
    code = doc.get("error")
    detail = doc.get("detail", "")
    if code == "SequenceGap":
        raise errors.SequenceGap(doc.get("expected", -1), doc.get("got", -1))
    cls = _WIRE_ERRORS.get(code)
    if cls is not None:
        raise cls(detail)
    raise ProtocolError(f"server error {status}: {code}: {detail}")


class ClientSession:
    """One subscription to one service; use from a single task at a time."""

    def __init__(self, url: ServiceUrl, descriptor: ServiceDescriptor, http: httpx.Client, sub_id: str):
        self.url = url
        self.descriptor = descriptor
        self._http = http
        self.sub_id = sub_id
        self.next_seq = 0
        self.next_out_seq = 0
        self.finished = False

    # -- low-level wire calls ---------------------------------------------------

    def _post(self, verb: str, body: dict) -> dict:
        try:
            resp = self._http.post(f"{self.url.render()}/{verb}", json=body)
        except httpx.TransportError as exc:
            raise Unreachable(str(exc)) from None
        return _expect_json(resp)

    def _get(self, verb: str, params: dict, read_timeout_s: Optional[float] = None) -> dict:
        kwargs = {"params": params}
        if read_timeout_s is not None:
            kwargs["timeout"] = httpx.Timeout(5.0, read=read_timeout_s)
        try:
            resp = self._http.get(f"{self.url.render()}/{verb}", **kwargs)
        except httpx.TransportError as exc:
            raise Unreachable(str(exc)) from None
        return _expect_json(resp)

    # -- streaming --------------------------------------------------------------

    def send(self, elements) -> None:
        """Push one data frame with the next sequence number."""
        checked = check_elements(self.descriptor.input_element, elements)
        payload = wire.encode_payload(self.descriptor.input_element, checked)
        self._post("push", {"subId": self.sub_id, "seq": self.next_seq, "payload": payload, "eos": False})
        self.next_seq += 1

    def finish(self) -> None:
        """Push the end-of-stream frame; no further sends are accepted."""
        self._post("push", {"subId": self.sub_id, "seq": self.next_seq, "payload": "", "eos": True})
        self.next_seq += 1
        self.finished = True

    def pull_once(self, max_wait_millis: int = 0) -> list:
        """One pull call; returns decoded (payload, eos) frames in seq order."""
        doc = self._get(
            "pull",
            {"subId": self.sub_id, "maxWaitMillis": max_wait_millis},
            read_timeout_s=max_wait_millis / 1000.0 + 10.0,
        )
        frames = doc.get("frames")
        if not isinstance(frames, list):
            raise ProtocolError("pull response lacks a frames array")
        out = []
        for frame in frames:
            seq, eos, payload = frame.get("seq"), frame.get("eos"), frame.get("payload", "")
            if seq != self.next_out_seq:
                raise ProtocolError(f"non-contiguous result seq {seq}, expected {self.next_out_seq}")
            if eos:
                if payload:
                    raise ProtocolError("eos frame carried a payload")
                out.append((None, True))
            else:
                out.append((wire.decode_payload(self.descriptor.output_element, payload), False))
                self.next_out_seq += 1
        return out

    def receive_all(self, overall_timeout_millis: int = 30_000) -> list:
        """Pull until end of stream; returns the result payloads in order."""
        deadline = time.monotonic() + overall_timeout_millis / 1000.0
        results = []
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise Timeout("end of stream did not arrive before the deadline")
            wait = int(min(remaining * 1000, _PULL_CHUNK_MILLIS))
            for payload, eos in self.pull_once(wait):
                if eos:
                    return results
                results.append(payload)

    def status(self) -> dict:
        return self._get("status", {"subId": self.sub_id})

    def unsubscribe(self) -> None:
        self._post("unsubscribe", {"subId": self.sub_id})

    def close(self) -> None:
        try:
            self.unsubscribe()
        except GridPipeError:
            pass
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _expect_json(resp: httpx.Response) -> dict:
    try:
        doc = resp.json()
    except ValueError:
        raise ProtocolError(f"non-JSON response (HTTP {resp.status_code})") from None
    if resp.status_code != 200:
        if isinstance(doc, dict) and "error" in doc:
            _raise_server_error(doc, resp.status_code)
        raise ProtocolError(f"unexpected HTTP {resp.status_code}")
    return doc


def connect(url_text: str, connect_timeout_millis: int = 5000, read_timeout_millis: int = 30_000) -> ClientSession:
    """Fetch the service descriptor, open a subscription, return the session."""
    url = ServiceUrl.parse(url_text)
    http = httpx.Client(
        timeout=httpx.Timeout(
            connect=connect_timeout_millis / 1000.0,
            read=read_timeout_millis / 1000.0,
            write=read_timeout_millis / 1000.0,
            pool=connect_timeout_millis / 1000.0,
        )
    )
    try:
        try:
            resp = http.get(url.render())
        except httpx.TransportError as exc:
            raise Unreachable(str(exc)) from None
        if resp.status_code == 404:
            raise NotFound(f"no service at {url_text}")
        if resp.status_code != 200:
            raise ProtocolError(f"descriptor fetch returned HTTP {resp.status_code}")
        try:
            descriptor = ServiceDescriptor.from_wire(resp.json())
        except GridPipeError as exc:
            raise ProtocolError(str(exc)) from None
        except ValueError:
            raise ProtocolError("descriptor is not JSON") from None

        try:
            sub_resp = http.post(f"{url.render()}/subscribe", json={})
        except httpx.TransportError as exc:
            raise Unreachable(str(exc)) from None
        sub_doc = _expect_json(sub_resp)
        sub_id = sub_doc.get("subId")
        if not isinstance(sub_id, str) or not sub_id:
            raise ProtocolError("subscribe response lacks a subId")
    except BaseException:
        http.close()
        raise
    return ClientSession(url, descriptor, http, sub_id)


def process(url_text: str, elements, overall_timeout_millis: int = 30_000):
    """Connect, send one frame, finish, and return the single result frame."""
    with connect(url_text) as session:
        session.send(elements)
        session.finish()
        results = session.receive_all(overall_timeout_millis)
        if len(results) != 1:
            raise ProtocolError(f"expected one result frame, got {len(results)}")
        return results[0]
