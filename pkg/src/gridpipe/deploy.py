"""Implementation-to-processor matching and deployment lifecycle.

plan() greedily walks the chain head to tail: for each shell it takes the
highest-priority processor type present both in the shell's implementations
and among idle, not-yet-consumed processors, breaking ties by ascending vp
id. Matching is all or nothing; a plan either binds every shell or raises.

Grid endpoints always bind to a grid-type processor. They are attached, not
acquired: deploy() leases and configures only the non-grid bindings, so one
grid processor can serve any number of deployments.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .algorithms import GRID_ENDPOINT_KIND, PROCESSOR_CPU, PROCESSOR_GRID, PROCESSOR_SIMFPGA, ImplementationRef
from .errors import (
    InsufficientProcessors,
    NoCompatibleImplementation,
    NotIdle,
    NotRunning,
    UnknownVp,
    VpStateChanged,
    WrongState,
)
from .ham import IDLE, CycleReport, VpRegistry
from .model import ValidatedModule, check_elements

GRID_ENDPOINT_IMPL = ImplementationRef(GRID_ENDPOINT_KIND, PROCESSOR_GRID, "grid-endpoint@grid")


@dataclass(frozen=True)
class MatchPolicy:
    """Processor-type preference order; ties break by ascending vp id."""

    type_priority: tuple = (PROCESSOR_SIMFPGA, PROCESSOR_CPU)

    def __post_init__(self):
        if not self.type_priority:
            raise ValueError("type_priority must be non-empty")
        if len(set(self.type_priority)) != len(self.type_priority):
            raise ValueError("type_priority entries must be distinct")


DEFAULT_POLICY = MatchPolicy()


@dataclass(frozen=True)
class Binding:
    shell_id: str
    implementation: ImplementationRef
    vp_id: str


@dataclass(frozen=True)
class DeploymentPlan:
    module: ValidatedModule
    bindings: tuple
    service_names: tuple


def plan(module: ValidatedModule, snapshot, policy: MatchPolicy = DEFAULT_POLICY) -> DeploymentPlan:
    """Bind every shell to (implementation, virtual processor).

    Deterministic: the same module, snapshot, and policy always produce the
    same plan. Raises NoCompatibleImplementation when a shell's
    implementations share no type with the registry (under the policy), and
    InsufficientProcessors when compatible processors exist but are all busy
    or already consumed by this plan.
    """
    descriptors = sorted(snapshot, key=lambda d: d.vp_id)
    registry_types = {d.processor_type for d in descriptors}
    consumed = set()
    bindings = []

    for shell in module.shells:
        if shell.is_grid_endpoint:
            allowed = [PROCESSOR_GRID]
            impl_for = {PROCESSOR_GRID: shell.implementations.get(PROCESSOR_GRID, GRID_ENDPOINT_IMPL.artifact_id)}
        else:
            allowed = [t for t in policy.type_priority if t in shell.implementations]
            impl_for = {t: shell.implementations[t] for t in allowed}

        if not allowed or not any(t in registry_types for t in allowed):
            raise NoCompatibleImplementation(shell.id, registry_types)

        chosen = None
        for ptype in allowed:
            for d in descriptors:
                if d.processor_type != ptype or d.vp_id in consumed or d.state != IDLE:
                    continue
                chosen = d
                break
            if chosen is not None:
                break
        if chosen is None:
            raise InsufficientProcessors(shell.id)

        consumed.add(chosen.vp_id)
        bindings.append(
            Binding(
                shell_id=shell.id,
                implementation=ImplementationRef(
                    shell.kind, chosen.processor_type, impl_for[chosen.processor_type]
                ),
                vp_id=chosen.vp_id,
            )
        )

    return DeploymentPlan(
        module=module, bindings=tuple(bindings), service_names=module.service_names()
    )


PLANNED = "planned"
RUNNING = "running"
STOPPED = "stopped"


class Deployment:
    """A plan made live: leases held, implementations configured."""

    def __init__(self, plan: DeploymentPlan, registry: VpRegistry, leases, configure_report: CycleReport):
        self.plan = plan
        self.registry = registry
        self.leases = leases  # shell_id -> Lease, non-grid shells only
        self.configure_report = configure_report
        self.state = PLANNED
        self._lock = threading.RLock()
        self._container = None
        self._exposed = []

    @property
    def module(self) -> ValidatedModule:
        return self.plan.module

    def start(self, container=None):
        """Enter running state; expose each service name on the container.

        Returns the list of ServiceUrl values exposed (empty when the module
        has no named grid endpoints or no container is attached).
        """
        with self._lock:
            if self.state != PLANNED:
                raise WrongState(f"cannot start a {self.state} deployment")
            self.state = RUNNING
        urls = []
        if container is not None:
            exposed = []
            try:
                for name in self.plan.service_names:
                    urls.append(container.expose(self, name))
                    exposed.append(name)
            except Exception:
                with self._lock:
                    self.state = PLANNED
                for name in exposed:
                    container.unexpose(name)
                raise
            self._container = container
            self._exposed = exposed
        return urls

    def stop(self) -> None:
        """Drain the in-flight frame, unexpose services, release every lease."""
        with self._lock:
            if self.state != RUNNING:
                raise WrongState(f"cannot stop a {self.state} deployment")
            # process_frame holds this lock for the whole frame, so taking it
            # here waits out any in-flight frame; the state flip then turns
            # later frames away before they touch a processor.
            self.state = STOPPED
            container, exposed = self._container, self._exposed
            self._container, self._exposed = None, []
            leases = list(self.leases.values())
        # Unexposing takes per-subscription locks that a rejected push may
        # still hold; doing it outside our lock keeps the order acyclic.
        if container is not None:
            for name in exposed:
                container.unexpose(name)
        for lease in leases:
            lease.release()

    def process_frame(self, frame):
        """Run one frame through every processing shell, head to tail.

        Returns (output frame, aggregate CycleReport). The output equals the
        composition of the reference semantics over the chain.
        """
        out, per_shell = self.process_frame_per_shell(frame)
        report = CycleReport()
        for _shell_id, step in per_shell:
            report = report + step
        return out, report

    def process_frame_per_shell(self, frame):
        """Like process_frame, but returns [(shell_id, CycleReport), ...]."""
        with self._lock:
            if self.state != RUNNING:
                raise NotRunning("deployment is not running")
            current = check_elements(self.module.input_element, frame)
            steps = []
            for shell in self.module.shells:
                if shell.is_grid_endpoint:
                    continue
                current, step = self.leases[shell.id].execute_block(current)
                steps.append((shell.id, step))
            return current, steps


def deploy(plan_: DeploymentPlan, registry: VpRegistry) -> Deployment:
    """Acquire and configure every non-grid binding, all or nothing.

    If any planned processor is no longer idle the whole deployment aborts
    with VpStateChanged and no leases are held on return.
    """
    shells = {s.id: s for s in plan_.module.shells}
    leases = {}
    report = CycleReport()
    try:
        for binding in plan_.bindings:
            if binding.implementation.processor_type == PROCESSOR_GRID:
                continue
            try:
                lease = registry.acquire(binding.vp_id)
            except (NotIdle, UnknownVp):
                raise VpStateChanged(binding.vp_id) from None
            leases[binding.shell_id] = lease
            report = report + lease.configure(
                binding.implementation, shells[binding.shell_id].params
            )
    except Exception:
        for lease in leases.values():
            lease.release()
        raise
    return Deployment(plan_, registry, leases, report)
