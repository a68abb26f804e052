"""Built-in algorithm kinds, their reference semantics, and implementations.

Each kind carries a pure reference function (the oracle) plus one registered
implementation per processor type. The cpu route is a plain sequential loop;
the simfpga route walks the frame in lane-sized blocks, mirroring spatially
parallel datapaths. All routes perform the same floating-point operations in
the same per-element order, so their outputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InvalidParam, UnknownKind, WrongElementType
from .model import (
    GRID_ENDPOINT_KIND,
    INT32_MAX,
    INT32_MIN,
    SERVICE_NAME_PARAM,
    ElementType,
    Params,
    ValueKind,
    check_elements,
    param_as_int,
    param_as_real,
    param_as_real_list,
    param_as_text,
)

PROCESSOR_CPU = "cpu"
PROCESSOR_SIMFPGA = "simfpga"
PROCESSOR_GRID = "grid"


@dataclass(frozen=True)
class AlgorithmKind:
    """A unit of operation: signature, parameters, and per-element cost.

    input_element/output_element of None mean the kind is polymorphic over
    element types (passthrough, grid endpoints); the concrete type is then
    resolved from the surrounding chain. taps_param names the coefficient
    list whose length is the per-element op count (fir); otherwise cost_class
    applies.
    """

    name: str
    input_element: Optional[ElementType]
    output_element: Optional[ElementType]
    required_params: tuple = ()
    optional_params: tuple = ()
    cost_class: int = 1
    taps_param: Optional[str] = None

    def op_count(self, params: Params) -> int:
        if self.taps_param is not None:
            return len(param_as_real_list(params, self.taps_param))
        return self.cost_class

    def check_params(self, params: Params) -> None:
        checkers = {
            ValueKind.INTEGER: param_as_int,
            ValueKind.REAL: param_as_real,
            ValueKind.TEXT: param_as_text,
            ValueKind.REAL_LIST: param_as_real_list,
        }
        for pname, vkind in self.required_params:
            checkers[vkind](params, pname)
        for pname, vkind in self.optional_params:
            if pname in params:
                checkers[vkind](params, pname)

    def check_frame(self, seq):
        """Canonicalize a frame against this kind's input signature."""
        if self.input_element is not None:
            return check_elements(self.input_element, seq)
        if isinstance(seq, (bytes, bytearray)):
            return bytes(seq)
        if isinstance(seq, str):
            raise WrongElementType("a frame is a byte string or a sequence of numbers")
        return tuple(seq)


@dataclass(frozen=True)
class ImplementationRef:
    """Pointer to one processor-type-specific realization of a kind."""

    kind: str
    processor_type: str
    artifact_id: str


# -- reference semantics (the oracle) ------------------------------------------

def _ref_passthrough(params, xs):
    return xs


def _ref_scale(params, xs):
    gain = param_as_real(params, "gain")
    return tuple(gain * x for x in xs)


def _ref_offset(params, xs):
    delta = param_as_real(params, "delta")
    return tuple(x + delta for x in xs)


def _ref_fir(params, xs):
    # y[i] = sum_{k=0..K-1} h[k] * x[i-k], with x[j] = 0 for j < 0.
    h = param_as_real_list(params, "coefficients")
    out = []
    for i in range(len(xs)):
        acc = 0.0
        for k in range(len(h)):
            j = i - k
            acc += h[k] * (xs[j] if j >= 0 else 0.0)
        out.append(acc)
    return tuple(out)


def _clamp_i32(value: int) -> int:
    if value > INT32_MAX:
        return INT32_MAX
    if value < INT32_MIN:
        return INT32_MIN
    return value


def _ref_saturating_scale(params, xs):
    # Product taken at full width, then clamped to int32.
    gain = param_as_int(params, "gain")
    return tuple(_clamp_i32(gain * x) for x in xs)


# -- cpu implementations --------------------------------------------------------

def _cpu_passthrough(params, xs, lanes=None):
    return xs


def _cpu_scale(params, xs, lanes=None):
    gain = param_as_real(params, "gain")
    out = []
    for x in xs:
        out.append(gain * x)
    return tuple(out)


def _cpu_offset(params, xs, lanes=None):
    delta = param_as_real(params, "delta")
    out = []
    for x in xs:
        out.append(x + delta)
    return tuple(out)


def _cpu_fir(params, xs, lanes=None):
    h = param_as_real_list(params, "coefficients")
    n, taps = len(xs), len(h)
    out = []
    for i in range(n):
        acc = 0.0
        for k in range(taps):
            j = i - k
            acc += h[k] * (xs[j] if j >= 0 else 0.0)
        out.append(acc)
    return tuple(out)


def _cpu_saturating_scale(params, xs, lanes=None):
    gain = param_as_int(params, "gain")
    out = []
    for x in xs:
        out.append(_clamp_i32(gain * x))
    return tuple(out)


# -- simfpga implementations ----------------------------------------------------
# The frame advances through the pipeline in blocks of `lanes` elements; each
# lane computes one output per pass. Per-element arithmetic matches the cpu
# route exactly, so results are bit-identical while the cycle model differs.

def _lane_blocks(n: int, lanes: int):
    for base in range(0, n, lanes):
        yield base, min(base + lanes, n)


def _fpga_passthrough(params, xs, lanes=1):
    if isinstance(xs, bytes):
        return b"".join(xs[a:b] for a, b in _lane_blocks(len(xs), lanes))
    out = []
    for a, b in _lane_blocks(len(xs), lanes):
        out.extend(xs[a:b])
    return tuple(out)


def _fpga_scale(params, xs, lanes=1):
    gain = param_as_real(params, "gain")
    out = []
    for a, b in _lane_blocks(len(xs), lanes):
        for x in xs[a:b]:
            out.append(gain * x)
    return tuple(out)


def _fpga_offset(params, xs, lanes=1):
    delta = param_as_real(params, "delta")
    out = []
    for a, b in _lane_blocks(len(xs), lanes):
        for x in xs[a:b]:
            out.append(x + delta)
    return tuple(out)


def _fpga_fir(params, xs, lanes=1):
    # Taps are computed spatially; each lane runs the full accumulation chain
    # for its own output index in tap order.
    h = param_as_real_list(params, "coefficients")
    taps = len(h)
    out = []
    for a, b in _lane_blocks(len(xs), lanes):
        for i in range(a, b):
            acc = 0.0
            for k in range(taps):
                j = i - k
                acc += h[k] * (xs[j] if j >= 0 else 0.0)
            out.append(acc)
    return tuple(out)


def _fpga_saturating_scale(params, xs, lanes=1):
    gain = param_as_int(params, "gain")
    out = []
    for a, b in _lane_blocks(len(xs), lanes):
        for x in xs[a:b]:
            out.append(_clamp_i32(gain * x))
    return tuple(out)


# -- registry -------------------------------------------------------------------

Kernel = Callable


class AlgorithmLibrary:
    """Immutable-after-startup registry of kinds and their implementations."""

    def __init__(self):
        self._kinds = {}
        self._reference = {}
        self._impls = {}  # (kind, processor_type) -> ImplementationRef
        self._kernels = {}  # (kind, processor_type) -> Kernel

    def register_kind(self, kind: AlgorithmKind, reference: Kernel) -> None:
        if kind.name in self._kinds:
            raise InvalidParam(kind.name, "kind already registered")
        self._kinds[kind.name] = kind
        self._reference[kind.name] = reference

    def register_implementation(self, ref: ImplementationRef, kernel: Kernel) -> None:
        key = (ref.kind, ref.processor_type)
        if key in self._impls:
            raise InvalidParam(ref.artifact_id, "implementation already registered")
        self._impls[key] = ref
        self._kernels[key] = kernel

    def kinds(self) -> tuple:
        return tuple(self._kinds.values())

    def find(self, name: str) -> Optional[AlgorithmKind]:
        return self._kinds.get(name)

    def lookup(self, name: str) -> AlgorithmKind:
        kind = self._kinds.get(name)
        if kind is None:
            raise UnknownKind("<library>", name)
        return kind

    def implementations_for(self, kind_name: str) -> tuple:
        return tuple(ref for (k, _), ref in self._impls.items() if k == kind_name)

    def find_implementation(self, kind_name: str, processor_type: str) -> Optional[ImplementationRef]:
        return self._impls.get((kind_name, processor_type))

    def kernel(self, kind_name: str, processor_type: str) -> Kernel:
        try:
            return self._kernels[(kind_name, processor_type)]
        except KeyError:
            raise UnknownKind("<library>", f"{kind_name}@{processor_type}") from None

    def apply_reference(self, kind_name: str, params: Params, seq):
        """Run a kind's pure reference semantics on one frame.

        Deterministic and length-preserving for every built-in kind.
        """
        kind = self.lookup(kind_name)
        kind.check_params(params)
        frame = kind.check_frame(seq)
        return self._reference[kind_name](params, frame)


def builtin_kinds() -> tuple:
    """The fixed kernel set, in registration order."""
    return builtin_library().kinds()


def builtin_library() -> AlgorithmLibrary:
    """Build the library of built-in kinds with cpu and simfpga implementations."""
    lib = AlgorithmLibrary()
    f64 = ElementType.FLOAT_64
    i32 = ElementType.SIGNED_INT_32

    table = [
        (
            AlgorithmKind("passthrough", None, None),
            _ref_passthrough, _cpu_passthrough, _fpga_passthrough,
        ),
        (
            AlgorithmKind("scale", f64, f64, required_params=(("gain", ValueKind.REAL),)),
            _ref_scale, _cpu_scale, _fpga_scale,
        ),
        (
            AlgorithmKind("offset", f64, f64, required_params=(("delta", ValueKind.REAL),)),
            _ref_offset, _cpu_offset, _fpga_offset,
        ),
        (
            AlgorithmKind(
                "fir", f64, f64,
                required_params=(("coefficients", ValueKind.REAL_LIST),),
                taps_param="coefficients",
            ),
            _ref_fir, _cpu_fir, _fpga_fir,
        ),
        (
            AlgorithmKind(
                "saturating-scale-i32", i32, i32,
                required_params=(("gain", ValueKind.INTEGER),),
            ),
            _ref_saturating_scale, _cpu_saturating_scale, _fpga_saturating_scale,
        ),
    ]
    for kind, ref_fn, cpu_fn, fpga_fn in table:
        lib.register_kind(kind, ref_fn)
        lib.register_implementation(
            ImplementationRef(kind.name, PROCESSOR_CPU, f"{kind.name}@cpu"), cpu_fn
        )
        lib.register_implementation(
            ImplementationRef(kind.name, PROCESSOR_SIMFPGA, f"{kind.name}@simfpga"), fpga_fn
        )

    endpoint = AlgorithmKind(
        GRID_ENDPOINT_KIND, None, None,
        optional_params=((SERVICE_NAME_PARAM, ValueKind.TEXT),),
    )
    # Endpoints move frames between the network and the chain; their binding
    # is fixed to the grid processor type.
    lib.register_kind(endpoint, _ref_passthrough)
    lib.register_implementation(
        ImplementationRef(GRID_ENDPOINT_KIND, PROCESSOR_GRID, "grid-endpoint@grid"),
        _cpu_passthrough,
    )
    return lib
