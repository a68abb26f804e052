"""Payload codecs for the wire protocol.

Sequences of signed-int-32 and float-64 elements travel as little-endian
packed bytes, base64-encoded inside JSON frames; opaque-bytes payloads are
base64 of the raw bytes. Packing goes through struct, so float bit patterns
(NaN payloads, signed zeros, subnormals) survive a round trip unchanged.
"""

from __future__ import annotations

import base64
import struct

from .errors import WrongElementType
from .model import ElementType

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


def pack_elements(element: ElementType, seq) -> bytes:
    """Pack an element sequence into little-endian bytes."""
    if element is ElementType.OPAQUE_BYTES:
        if not isinstance(seq, (bytes, bytearray)):
            raise WrongElementType("opaque-bytes payload must be bytes")
        return bytes(seq)
    if element is ElementType.FLOAT_64:
        return struct.pack(f"<{len(seq)}d", *seq)
    if element is ElementType.SIGNED_INT_32:
        try:
            return struct.pack(f"<{len(seq)}i", *seq)
        except struct.error as exc:
            raise WrongElementType(f"value outside int32 range: {exc}") from None
    raise WrongElementType(f"unsupported element type {element}")


def unpack_elements(element: ElementType, data: bytes):
    """Inverse of pack_elements. Raises on size not a multiple of the element width."""
    if element is ElementType.OPAQUE_BYTES:
        return bytes(data)
    width = 8 if element is ElementType.FLOAT_64 else 4
    if len(data) % width:
        raise WrongElementType(
            f"payload size {len(data)} is not a multiple of {width} ({element.tag})"
        )
    n = len(data) // width
    fmt = f"<{n}d" if element is ElementType.FLOAT_64 else f"<{n}i"
    values = struct.unpack(fmt, data)
    return tuple(values)


def encode_payload(element: ElementType, seq) -> str:
    """Element sequence -> base64 text for the JSON "payload" field."""
    return base64.b64encode(pack_elements(element, seq)).decode("ascii")


def decode_payload(element: ElementType, text: str):
    """base64 text -> element sequence."""
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise WrongElementType(f"payload is not valid base64: {exc}") from None
    return unpack_elements(element, raw)


def float_bits(x: float) -> bytes:
    """The 8 raw bytes of a float, for bit-pattern comparisons."""
    return struct.pack("<d", x)
