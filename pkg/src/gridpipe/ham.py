"""Hardware abstraction: virtual processor registry, leases, cycle model.

A backend descriptor ("cpu" with a slot count, "simfpga" with per-device
lanes/pipelineDepth/reconfigCycles, "grid" with a slot count) expands into
one or more virtual processors. Callers acquire a processor exclusively,
configure an implementation onto it (simulated bitstream load, charged R
cycles when the artifact changes), and push frames through execute_block.

Cycle model, n = frame length, c_op = the kind's per-element op count:
    cpu      computeCycles = n * c_op
    simfpga  computeCycles = D + ceil(n / L)
The simfpga cost ignores c_op: taps are computed spatially in parallel, one
pipelined result per cycle across L lanes after D fill cycles.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Mapping, Optional

from .algorithms import PROCESSOR_CPU, PROCESSOR_GRID, PROCESSOR_SIMFPGA, AlgorithmLibrary, ImplementationRef
from .errors import (
    DuplicateVpId,
    NotConfigured,
    NotIdle,
    ProcessorTypeMismatch,
    SchemaError,
    StaleLease,
    UnknownBackend,
    UnknownVp,
    WrongState,
)
from .model import Params

IDLE = "idle"
ACQUIRED = "acquired"  # leased, nothing configured yet
CONFIGURED = "configured"
BUSY = "busy"

MAX_SLOTS = 9999  # keeps zero-padded vp ids in lexicographic = numeric order


def cpu_compute_cycles(n: int, per_element_ops: int) -> int:
    return n * per_element_ops

def simfpga_compute_cycles(n: int, lanes: int, pipeline_depth: int) -> int:
    return pipeline_depth + (n + lanes - 1) // lanes


def model_speedup(n: int, per_element_ops: int, lanes: int, pipeline_depth: int) -> float:
    """cpu cycles over simfpga cycles for one frame; the headline model figure."""
    return cpu_compute_cycles(n, per_element_ops) / simfpga_compute_cycles(n, lanes, pipeline_depth)


@dataclass(frozen=True)
class CycleReport:
    reconfig_cycles: int = 0
    compute_cycles: int = 0
    elements_processed: int = 0

    def __add__(self, other: "CycleReport") -> "CycleReport":
        return CycleReport(
            self.reconfig_cycles + other.reconfig_cycles,
            self.compute_cycles + other.compute_cycles,
            self.elements_processed + other.elements_processed,
        )


@dataclass(frozen=True)
class VirtualProcessorDescriptor:
    """Snapshot view of one virtual processor."""

    vp_id: str
    processor_type: str
    state: str
    configured_artifact: Optional[str] = None
    lanes: Optional[int] = None
    pipeline_depth: Optional[int] = None
    reconfig_cycles: Optional[int] = None


class _VpRecord:
    __slots__ = (
        "vp_id", "processor_type", "state", "generation",
        "configured_artifact", "impl", "params", "kernel", "kind",
        "lanes", "pipeline_depth", "reconfig_cycles",
    )

    def __init__(self, vp_id, processor_type, lanes=None, pipeline_depth=None, reconfig_cycles=None):
        self.vp_id = vp_id
        self.processor_type = processor_type
        self.state = IDLE
        self.generation = 0
        self.configured_artifact = None
        self.impl = None
        self.params = None
        self.kernel = None
        self.kind = None
        self.lanes = lanes
        self.pipeline_depth = pipeline_depth
        self.reconfig_cycles = reconfig_cycles

    def descriptor(self) -> VirtualProcessorDescriptor:
        return VirtualProcessorDescriptor(
            vp_id=self.vp_id,
            processor_type=self.processor_type,
            state=self.state,
            configured_artifact=self.configured_artifact,
            lanes=self.lanes,
            pipeline_depth=self.pipeline_depth,
            reconfig_cycles=self.reconfig_cycles,
        )


@dataclass
class Lease:
    """Exclusive handle on one virtual processor. Not duplicable."""

    registry: "VpRegistry"
    vp_id: str
    generation: int

    def configure(self, implementation: ImplementationRef, params: Params) -> CycleReport:
        return self.registry.configure(self, implementation, params)

    def execute_block(self, frame):
        return self.registry.execute_block(self, frame)

    def release(self) -> None:
        self.registry.release(self)


def _positive_int(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise SchemaError(path, f"expected an integer >= {minimum}, got {value!r}")
    return value


class VpRegistry:
    """Shared, lock-guarded registry of virtual processors.

    acquire/configure/execute_block/release are linearizable; the kernel of
    execute_block runs outside the lock with the processor marked busy.
    """

    def __init__(self, library: AlgorithmLibrary):
        self.library = library
        self._lock = threading.RLock()
        self._vps: dict = {}

    # -- registration ---------------------------------------------------------

    def register_ham(self, backend: Mapping) -> tuple:
        """Expand one backend descriptor into virtual processors, all idle."""
        btype = backend.get("type")
        if btype == PROCESSOR_CPU or btype == PROCESSOR_GRID:
            slots = _positive_int(backend.get("slots"), f"{btype}.slots", minimum=1)
            if slots > MAX_SLOTS:
                raise SchemaError(f"{btype}.slots", f"at most {MAX_SLOTS} slots")
            records = [_VpRecord(f"{btype}-{i:04d}", btype) for i in range(slots)]
        elif btype == PROCESSOR_SIMFPGA:
            devices = backend.get("devices")
            if not isinstance(devices, list) or not devices:
                raise SchemaError("simfpga.devices", "expected a non-empty array of devices")
            if len(devices) > MAX_SLOTS:
                raise SchemaError("simfpga.devices", f"at most {MAX_SLOTS} devices")
            records = []
            for i, dev in enumerate(devices):
                if not isinstance(dev, Mapping):
                    raise SchemaError(f"simfpga.devices[{i}]", "expected an object")
                lanes = _positive_int(dev.get("lanes"), f"simfpga.devices[{i}].lanes", minimum=1)
                depth = _positive_int(
                    dev.get("pipelineDepth"), f"simfpga.devices[{i}].pipelineDepth"
                )
                reconf = _positive_int(
                    dev.get("reconfigCycles"), f"simfpga.devices[{i}].reconfigCycles"
                )
                records.append(
                    _VpRecord(
                        f"{btype}-{i:04d}", btype,
                        lanes=lanes, pipeline_depth=depth, reconfig_cycles=reconf,
                    )
                )
        else:
            raise UnknownBackend(f"unknown backend type {btype!r}")

        with self._lock:
            for rec in records:
                if rec.vp_id in self._vps:
                    raise DuplicateVpId(rec.vp_id)
            for rec in records:
                self._vps[rec.vp_id] = rec
            return tuple(rec.descriptor() for rec in records)

    def snapshot(self) -> tuple:
        """Descriptors of every registered processor, sorted by vp id."""
        with self._lock:
            return tuple(self._vps[k].descriptor() for k in sorted(self._vps))

    def descriptor(self, vp_id: str) -> VirtualProcessorDescriptor:
        with self._lock:
            return self._require(vp_id).descriptor()

    def _require(self, vp_id: str) -> _VpRecord:
        rec = self._vps.get(vp_id)
        if rec is None:
            raise UnknownVp(vp_id)
        return rec

    # -- lease lifecycle ------------------------------------------------------

    def acquire(self, vp_id: str) -> Lease:
        with self._lock:
            rec = self._require(vp_id)
            if rec.state != IDLE:
                raise NotIdle(vp_id)
            rec.state = ACQUIRED
            rec.generation += 1
            return Lease(self, vp_id, rec.generation)

    def _validate(self, lease: Lease) -> _VpRecord:
        rec = self._require(lease.vp_id)
        if rec.state == IDLE or rec.generation != lease.generation:
            raise StaleLease(f"lease on {lease.vp_id!r} is no longer valid")
        return rec

    def configure(self, lease: Lease, implementation: ImplementationRef, params: Params) -> CycleReport:
        """Load an implementation onto the leased processor.

        simfpga processors pay reconfigCycles when the artifact changes from
        whatever was last loaded under this lease; parameter updates alone are
        free (register writes, not a bitstream reload).
        """
        with self._lock:
            rec = self._validate(lease)
            if rec.state == BUSY:
                raise WrongState(f"{lease.vp_id!r} is busy")
            if implementation.processor_type != rec.processor_type:
                raise ProcessorTypeMismatch(implementation.processor_type, rec.processor_type)
            kind = self.library.lookup(implementation.kind)
            kind.check_params(params)
            kernel = self.library.kernel(implementation.kind, implementation.processor_type)

            reconfig = 0
            if rec.processor_type == PROCESSOR_SIMFPGA:
                if rec.configured_artifact != implementation.artifact_id:
                    reconfig = rec.reconfig_cycles
            rec.configured_artifact = implementation.artifact_id
            rec.impl = implementation
            rec.params = dict(params)
            rec.kernel = kernel
            rec.kind = kind
            rec.state = CONFIGURED
            return CycleReport(reconfig_cycles=reconfig, compute_cycles=0, elements_processed=0)

    def execute_block(self, lease: Lease, frame):
        """Run one frame through the configured implementation.

        Returns (output frame, CycleReport). Output is bit-identical to
        apply_reference for the configured kind and parameters.
        """
        with self._lock:
            rec = self._validate(lease)
            if rec.state != CONFIGURED:
                raise NotConfigured(f"{lease.vp_id!r} has no configured implementation")
            checked = rec.kind.check_frame(frame)
            rec.state = BUSY
            kind, params, kernel = rec.kind, rec.params, rec.kernel
            lanes, depth = rec.lanes, rec.pipeline_depth
            ptype = rec.processor_type

        try:
            out = kernel(params, checked, lanes if ptype == PROCESSOR_SIMFPGA else None)
        finally:
            with self._lock:
                rec.state = CONFIGURED

        n = len(checked)
        if ptype == PROCESSOR_SIMFPGA:
            cycles = simfpga_compute_cycles(n, lanes, depth)
        else:
            cycles = cpu_compute_cycles(n, kind.op_count(params))
        return out, CycleReport(reconfig_cycles=0, compute_cycles=cycles, elements_processed=n)

    def release(self, lease: Lease) -> None:
        """Return the processor to idle; configured artifact memory is cleared."""
        with self._lock:
            rec = self._validate(lease)
            if rec.state == BUSY:
                raise WrongState(f"{lease.vp_id!r} is busy")
            rec.state = IDLE
            rec.configured_artifact = None
            rec.impl = None
            rec.params = None
            rec.kernel = None
            rec.kind = None
