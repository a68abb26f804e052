"""Pipeline data model: element types, shells, module specs, manifests.

A software module is a named linear chain of algorithm shells. Manifests are
JSON documents (see parse_module_spec for the schema); validation resolves
each shell's kind against an algorithm library, attaches concrete ports, and
orders the chain head to tail. All values here are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

from .errors import (
    BrokenChain,
    InvalidParam,
    ManifestSyntaxError,
    MissingParam,
    PortTypeMismatch,
    SchemaError,
    UnknownKind,
    WrongElementType,
)

GRID_ENDPOINT_KIND = "grid-endpoint"
SERVICE_NAME_PARAM = "serviceInstanceName"

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


class ElementType(enum.Enum):
    """The closed set of port element types."""

    SIGNED_INT_32 = "signed-int-32"
    FLOAT_64 = "float-64"
    OPAQUE_BYTES = "opaque-bytes"

    @property
    def tag(self) -> str:
        return self.value

    @classmethod
    def from_tag(cls, tag: str) -> "ElementType":
        for member in cls:
            if member.value == tag:
                return member
        raise WrongElementType(f"unknown element type tag {tag!r}")


def check_elements(element: ElementType, seq):
    """Canonicalize a frame for the given element type.

    float-64 frames become tuples of floats (ints are widened), signed-int-32
    frames tuples of in-range ints, opaque-bytes frames bytes. Anything else
    raises WrongElementType.
    """
    if element is ElementType.OPAQUE_BYTES:
        if isinstance(seq, (bytes, bytearray)):
            return bytes(seq)
        raise WrongElementType("opaque-bytes frame must be a bytes value")
    if isinstance(seq, (bytes, bytearray, str)):
        raise WrongElementType(f"{element.tag} frame must be a sequence of numbers")
    if element is ElementType.FLOAT_64:
        out = []
        for x in seq:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise WrongElementType(f"float-64 frame holds non-number {x!r}")
            out.append(float(x))
        return tuple(out)
    out = []
    for x in seq:
        if isinstance(x, bool) or not isinstance(x, int):
            raise WrongElementType(f"signed-int-32 frame holds non-integer {x!r}")
        if not INT32_MIN <= x <= INT32_MAX:
            raise WrongElementType(f"value {x} outside int32 range")
        out.append(x)
    return tuple(out)


# -- parameters ---------------------------------------------------------------

# Scalar parameter values mirror the manifest JSON: int, float, str, or a
# tuple of floats (coefficient lists).
ParamValue = Union[int, float, str, tuple]
Params = Mapping[str, ParamValue]


class ValueKind(enum.Enum):
    INTEGER = "integer"
    REAL = "real"
    TEXT = "text"
    REAL_LIST = "realList"


def param_as_real(params: Params, name: str) -> float:
    if name not in params:
        raise MissingParam(name)
    v = params[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidParam(name, f"expected a real number, got {v!r}")
    return float(v)


def param_as_int(params: Params, name: str) -> int:
    if name not in params:
        raise MissingParam(name)
    v = params[name]
    if isinstance(v, bool) or not isinstance(v, int):
        raise InvalidParam(name, f"expected an integer, got {v!r}")
    return v


def param_as_text(params: Params, name: str) -> str:
    if name not in params:
        raise MissingParam(name)
    v = params[name]
    if not isinstance(v, str):
        raise InvalidParam(name, f"expected text, got {v!r}")
    return v


def param_as_real_list(params: Params, name: str) -> tuple:
    if name not in params:
        raise MissingParam(name)
    v = params[name]
    if not isinstance(v, tuple):
        raise InvalidParam(name, f"expected a list of reals, got {v!r}")
    if not v:
        raise InvalidParam(name, "coefficient list must be non-empty")
    return v


# -- structural types ---------------------------------------------------------

INPUT_PORT = "in"
OUTPUT_PORT = "out"


@dataclass(frozen=True)
class PortSpec:
    name: str
    element: ElementType
    direction: str  # "input" | "output"


@dataclass(frozen=True)
class Connection:
    from_shell: str
    from_port: str
    to_shell: str
    to_port: str

    @property
    def from_ref(self) -> str:
        return f"{self.from_shell}.{self.from_port}"

    @property
    def to_ref(self) -> str:
        return f"{self.to_shell}.{self.to_port}"

    @property
    def label(self) -> str:
        return f"{self.from_ref}->{self.to_ref}"


@dataclass(frozen=True)
class AlgorithmShell:
    """One processing block: a kind plus parameters and implementation refs.

    implementations maps processor type -> artifact id. Ports are attached at
    validation time from the kind's signature (the manifest never lists them).
    """

    id: str
    kind: str
    params: Mapping[str, ParamValue] = field(default_factory=dict)
    implementations: Mapping[str, str] = field(default_factory=dict)
    inputs: tuple = ()
    outputs: tuple = ()

    @property
    def is_grid_endpoint(self) -> bool:
        return self.kind == GRID_ENDPOINT_KIND

    @property
    def service_name(self) -> Optional[str]:
        v = self.params.get(SERVICE_NAME_PARAM)
        return v if isinstance(v, str) else None


@dataclass(frozen=True)
class SoftwareModuleSpec:
    """A named linear chain of shells; the unit of deployment."""

    name: str
    shells: tuple
    connections: tuple

    def shell(self, shell_id: str) -> AlgorithmShell:
        for s in self.shells:
            if s.id == shell_id:
                return s
        raise KeyError(shell_id)


@dataclass(frozen=True)
class ValidatedModule:
    """A module whose chain has been ordered, typed, and resolved.

    shells are in head-to-tail order with concrete ports; kinds maps shell id
    to the resolved AlgorithmKind.
    """

    spec: SoftwareModuleSpec
    shells: tuple
    kinds: Mapping[str, object]

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def processing_shells(self) -> tuple:
        return tuple(s for s in self.shells if not s.is_grid_endpoint)

    @property
    def input_element(self) -> ElementType:
        head = self.shells[0]
        port = head.inputs[0] if head.inputs else head.outputs[0]
        return port.element

    @property
    def output_element(self) -> ElementType:
        tail = self.shells[-1]
        port = tail.outputs[0] if tail.outputs else tail.inputs[0]
        return port.element

    def service_names(self) -> tuple:
        """serviceInstanceName values of grid endpoints, chain order, deduplicated."""
        names = []
        for s in self.shells:
            if s.is_grid_endpoint and s.service_name and s.service_name not in names:
                names.append(s.service_name)
        return tuple(names)


# -- manifest parsing ---------------------------------------------------------

_TOP_KEYS = {"name", "shells", "connections"}
_SHELL_KEYS = {"id", "kind", "params", "implementations"}


def _parse_param_value(path: str, value) -> ParamValue:
    if isinstance(value, bool):
        raise SchemaError(path, "booleans are not valid parameter values")
    if isinstance(value, (int, float, str)):
        return value
    if isinstance(value, list):
        out = []
        for i, x in enumerate(value):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaError(f"{path}[{i}]", "list parameters hold numbers only")
            out.append(float(x))
        return tuple(out)
    raise SchemaError(path, f"unsupported parameter value {value!r}")


def _parse_shell(path: str, obj) -> AlgorithmShell:
    if not isinstance(obj, dict):
        raise SchemaError(path, "shell must be an object")
    unknown = set(obj) - _SHELL_KEYS
    if unknown:
        raise SchemaError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    for key in ("id", "kind"):
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing key")
        if not isinstance(obj[key], str) or not obj[key]:
            raise SchemaError(f"{path}.{key}", "must be a non-empty string")
    shell_id = obj["id"]
    if "." in shell_id:
        raise SchemaError(f"{path}.id", f"shell id {shell_id!r} may not contain '.'")
    kind = obj["kind"]

    params = {}
    raw_params = obj.get("params", {})
    if not isinstance(raw_params, dict):
        raise SchemaError(f"{path}.params", "must be an object")
    for pname, pval in raw_params.items():
        params[pname] = _parse_param_value(f"{path}.params.{pname}", pval)

    impls = {}
    raw_impls = obj.get("implementations", {})
    if not isinstance(raw_impls, dict):
        raise SchemaError(f"{path}.implementations", "must be an object")
    for ptype, ref in raw_impls.items():
        if not isinstance(ref, str) or not ref:
            raise SchemaError(f"{path}.implementations.{ptype}", "must be a non-empty string")
        impls[ptype] = ref
    if kind != GRID_ENDPOINT_KIND and not impls:
        raise SchemaError(
            f"{path}.implementations",
            f"shell {shell_id!r} of kind {kind!r} needs at least one implementation",
        )
    return AlgorithmShell(id=shell_id, kind=kind, params=params, implementations=impls)


def _parse_port_ref(path: str, ref) -> tuple:
    if not isinstance(ref, str) or ref.count(".") != 1:
        raise SchemaError(path, f"port reference must look like 'shellId.port', got {ref!r}")
    shell_id, port = ref.split(".")
    if not shell_id or not port:
        raise SchemaError(path, f"port reference must look like 'shellId.port', got {ref!r}")
    return shell_id, port


def parse_module_spec(text: str) -> SoftwareModuleSpec:
    """Parse a JSON module manifest.

    Schema: {"name": str, "shells": [{"id", "kind", "params", "implementations"}],
    "connections": [{"from": "shellId.port", "to": "shellId.port"}]}. Unknown
    top-level keys are rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ManifestSyntaxError("manifest root must be a JSON object")

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")
    for key in _TOP_KEYS:
        if key not in doc:
            raise SchemaError(key, "missing key")

    if not isinstance(doc["name"], str) or not doc["name"]:
        raise SchemaError("name", "must be a non-empty string")
    if not isinstance(doc["shells"], list) or not doc["shells"]:
        raise SchemaError("shells", "must be a non-empty array")
    if not isinstance(doc["connections"], list):
        raise SchemaError("connections", "must be an array")

    shells = []
    seen = set()
    for i, obj in enumerate(doc["shells"]):
        shell = _parse_shell(f"shells[{i}]", obj)
        if shell.id in seen:
            raise SchemaError(f"shells[{i}].id", f"duplicate shell id {shell.id!r}")
        seen.add(shell.id)
        shells.append(shell)

    connections = []
    for i, obj in enumerate(doc["connections"]):
        if not isinstance(obj, dict) or set(obj) != {"from", "to"}:
            raise SchemaError(f"connections[{i}]", 'must be an object with keys "from" and "to"')
        fs, fp = _parse_port_ref(f"connections[{i}].from", obj["from"])
        ts, tp = _parse_port_ref(f"connections[{i}].to", obj["to"])
        for sid, where in ((fs, "from"), (ts, "to")):
            if sid not in seen:
                raise SchemaError(f"connections[{i}].{where}", f"unknown shell id {sid!r}")
        connections.append(Connection(fs, fp, ts, tp))

    return SoftwareModuleSpec(
        name=doc["name"], shells=tuple(shells), connections=tuple(connections)
    )


def serialize_module_spec(spec: SoftwareModuleSpec) -> str:
    """Render a spec back to manifest JSON. parse(serialize(spec)) == spec."""

    def shell_obj(s: AlgorithmShell) -> dict:
        return {
            "id": s.id,
            "kind": s.kind,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in s.params.items()},
            "implementations": dict(s.implementations),
        }

    doc = {
        "name": spec.name,
        "shells": [shell_obj(s) for s in spec.shells],
        "connections": [{"from": c.from_ref, "to": c.to_ref} for c in spec.connections],
    }
    return json.dumps(doc, indent=2)


# -- validation ---------------------------------------------------------------

def _order_chain(spec: SoftwareModuleSpec) -> tuple:
    """Order shells head to tail; raise BrokenChain unless they form one line."""
    out_conn = {}
    in_conn = {}
    for c in spec.connections:
        if c.from_shell in out_conn:
            raise BrokenChain([c.from_shell], "more than one outgoing connection")
        if c.to_shell in in_conn:
            raise BrokenChain([c.to_shell], "more than one incoming connection")
        out_conn[c.from_shell] = c
        in_conn[c.to_shell] = c

    heads = [s for s in spec.shells if s.id not in in_conn]
    if len(heads) != 1:
        raise BrokenChain(
            [s.id for s in heads] or [s.id for s in spec.shells],
            "chain must have exactly one head",
        )

    order = [heads[0]]
    seen = {heads[0].id}
    while order[-1].id in out_conn:
        nxt = out_conn[order[-1].id].to_shell
        if nxt in seen:
            raise BrokenChain([nxt], "cycle")
        order.append(spec.shell(nxt))
        seen.add(nxt)
    if len(order) != len(spec.shells):
        missing = [s.id for s in spec.shells if s.id not in seen]
        raise BrokenChain(missing, "unreachable from the chain head")
    return tuple(order)


def _resolve_types(order, kinds, connections) -> dict:
    """Assign a concrete element type to every shell's in/out slot.

    Kinds with a fixed signature pin their slots; polymorphic kinds
    (passthrough, grid endpoints) tie input to output and adopt whatever the
    neighbours impose. A chain with no typed kind defaults to opaque-bytes.
    """
    slots = {}  # (shell_id, "in"|"out") -> ElementType | None
    for s in order:
        k = kinds[s.id]
        slots[(s.id, "in")] = k.input_element
        slots[(s.id, "out")] = k.output_element

    conn_between = {(c.from_shell, c.to_shell): c for c in connections}

    def propagate_once() -> bool:
        changed = False
        for s in order:
            k = kinds[s.id]
            if k.input_element is None:  # polymorphic: in == out
                a, b = slots[(s.id, "in")], slots[(s.id, "out")]
                if a is None and b is not None:
                    slots[(s.id, "in")] = b
                    changed = True
                elif b is None and a is not None:
                    slots[(s.id, "out")] = a
                    changed = True
        for up, down in zip(order, order[1:]):
            a, b = slots[(up.id, "out")], slots[(down.id, "in")]
            if a is not None and b is None:
                slots[(down.id, "in")] = a
                changed = True
            elif b is not None and a is None:
                slots[(up.id, "out")] = b
                changed = True
            elif a is not None and b is not None and a is not b:
                conn = conn_between[(up.id, down.id)]
                raise PortTypeMismatch(conn.label, a.tag, b.tag)
        return changed

    while propagate_once():
        pass
    for key, value in slots.items():
        if value is None:
            slots[key] = ElementType.OPAQUE_BYTES
    return slots


def validate_module(spec: SoftwareModuleSpec, library) -> ValidatedModule:
    """Check a parsed spec against an algorithm library.

    Confirms every kind exists, the connections form one linear chain joining
    ports of equal element type, grid endpoints sit only at the ends, and each
    shell's parameters satisfy its kind. Deterministic: equal specs yield
    equal results or equal errors.
    """
    kinds = {}
    for s in spec.shells:
        kind = library.find(s.kind)
        if kind is None:
            raise UnknownKind(s.id, s.kind)
        kinds[s.id] = kind

    order = _order_chain(spec)

    has_in = {c.to_shell for c in spec.connections}
    has_out = {c.from_shell for c in spec.connections}
    for s in order:
        if s.is_grid_endpoint:
            if s.id in has_in and s.id in has_out:
                raise BrokenChain([s.id], "a grid endpoint is either a source or a sink")
            if s.id not in has_in and s.id not in has_out:
                raise BrokenChain([s.id], "grid endpoint with no connection")

    for c in spec.connections:
        if c.from_port != OUTPUT_PORT:
            raise SchemaError(f"connection {c.label}", f"no output port {c.from_port!r}")
        if c.to_port != INPUT_PORT:
            raise SchemaError(f"connection {c.label}", f"no input port {c.to_port!r}")

    slots = _resolve_types(order, kinds, spec.connections)

    resolved = []
    for s in order:
        kind = kinds[s.id]
        kind.check_params(s.params)
        inputs = ()
        outputs = ()
        # Grid endpoints carry a single port on their chain-facing side only.
        if s.is_grid_endpoint:
            if s.id in has_out:
                outputs = (PortSpec(OUTPUT_PORT, slots[(s.id, "out")], "output"),)
            else:
                inputs = (PortSpec(INPUT_PORT, slots[(s.id, "in")], "input"),)
        else:
            inputs = (PortSpec(INPUT_PORT, slots[(s.id, "in")], "input"),)
            outputs = (PortSpec(OUTPUT_PORT, slots[(s.id, "out")], "output"),)
        resolved.append(replace(s, inputs=inputs, outputs=outputs))

    return ValidatedModule(spec=spec, shells=tuple(resolved), kinds=kinds)
