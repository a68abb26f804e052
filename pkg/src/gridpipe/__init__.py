"""Reconfigurable-hardware processing pipelines published as network services.

Pipelines are linear chains of algorithm shells; each shell carries one
implementation per processor type. The runtime matches shells onto virtual
processors (cpu or simulated FPGA), deploys the chain, and serves it to
remote clients under a named service URL.
"""

from .algorithms import (
    AlgorithmKind,
    AlgorithmLibrary,
    ImplementationRef,
    PROCESSOR_CPU,
    PROCESSOR_GRID,
    PROCESSOR_SIMFPGA,
    builtin_kinds,
    builtin_library,
)
from .client import ClientSession, connect, process
from .config import ServerConfig, load_server_config
from .deploy import (
    Binding,
    DEFAULT_POLICY,
    Deployment,
    DeploymentPlan,
    MatchPolicy,
    deploy,
    plan,
)
from .ham import (
    CycleReport,
    Lease,
    VirtualProcessorDescriptor,
    VpRegistry,
    cpu_compute_cycles,
    model_speedup,
    simfpga_compute_cycles,
)
from .model import (
    AlgorithmShell,
    Connection,
    ElementType,
    PortSpec,
    SoftwareModuleSpec,
    ValidatedModule,
    parse_module_spec,
    serialize_module_spec,
    validate_module,
)
from .service import (
    ServiceContainer,
    ServiceDescriptor,
    ServiceUrl,
    start_container,
)

__version__ = "0.1.0"
