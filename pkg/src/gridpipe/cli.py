"""Operator commands: serve, invoke, bench, list.

Exit codes: serve 1 = config error, 2 = deploy/matching error, 3 = bind
error; invoke 1 = file/parse error, 4 = network/protocol error, 5 = type
mismatch; bench 2 = matching failure under a forced policy; list 4 =
network error.
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading
from pathlib import Path

import httpx

from . import client as client_sdk
from .algorithms import PROCESSOR_CPU, PROCESSOR_GRID, PROCESSOR_SIMFPGA, builtin_library
from .config import ServerConfig, load_server_config
from .deploy import MatchPolicy, deploy, plan
from .errors import (
    BindFailure,
    GridPipeError,
    InsufficientProcessors,
    MalformedUrl,
    NoCompatibleImplementation,
    PortInUse,
    WrongElementType,
)
from .ham import VpRegistry
from .model import ElementType, ValidatedModule, parse_module_spec, validate_module
from .service import BASE_PATH, start_container
from .wire import pack_elements, unpack_elements

TYPE_FLAGS = {
    "i32": ElementType.SIGNED_INT_32,
    "f64": ElementType.FLOAT_64,
    "bytes": ElementType.OPAQUE_BYTES,
}


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _build_registry(config: ServerConfig) -> VpRegistry:
    registry = VpRegistry(builtin_library())
    have_grid = False
    for backend in config.backends:
        registry.register_ham(backend)
        if backend.get("type") == PROCESSOR_GRID:
            have_grid = True
    if not have_grid:
        # A linear chain carries at most two grid endpoints; grid processors
        # are attached (shared), never leased, so two slots serve any load.
        registry.register_ham({"type": PROCESSOR_GRID, "slots": 2})
    return registry


def _load_module(path: str, registry: VpRegistry) -> ValidatedModule:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GridPipeError(f"cannot read manifest {path}: {exc}") from None
    return validate_module(parse_module_spec(text), registry.library)


# -- serve ---------------------------------------------------------------------

def cmd_serve(args) -> int:
    try:
        config = load_server_config(args.config)
        registry = _build_registry(config)
    except GridPipeError as exc:
        _err(f"config error: {exc}")
        return 1

    try:
        container = start_container(config.bind_host, config.port)
    except (PortInUse, BindFailure) as exc:
        _err(f"bind error: {exc}")
        return 3

    # Handlers go in before any URL is printed so an interrupt anywhere in
    # the serve lifetime shuts down cleanly with exit code 0.
    stop_event = threading.Event()

    def _on_signal(_signum, _frame):
        stop_event.set()

    signal.signal(signal.SIGINT, _on_signal)
    signal.signal(signal.SIGTERM, _on_signal)

    deployments = []
    try:
        for manifest_path in config.modules:
            module = _load_module(manifest_path, registry)
            deployment = deploy(plan(module, registry.snapshot()), registry)
            urls = deployment.start(container)
            deployments.append(deployment)
            for url in urls:
                print(url.render(), flush=True)
    except GridPipeError as exc:
        _err(f"deploy error: {exc}")
        for deployment in deployments:
            deployment.stop()
        container.close()
        return 2

    try:
        stop_event.wait()
    except KeyboardInterrupt:
        pass
    for deployment in deployments:
        deployment.stop()
    container.close()
    return 0


# -- invoke --------------------------------------------------------------------

def cmd_invoke(args) -> int:
    element = TYPE_FLAGS[args.type]
    try:
        raw = Path(args.input).read_bytes()
        frame = unpack_elements(element, raw)
    except OSError as exc:
        _err(f"cannot read input: {exc}")
        return 1
    except WrongElementType as exc:
        _err(f"cannot parse input: {exc}")
        return 1

    try:
        session = client_sdk.connect(args.url)
    except MalformedUrl as exc:
        _err(str(exc))
        return 1
    except GridPipeError as exc:
        _err(str(exc))
        return 4

    with session:
        if session.descriptor.input_element is not element:
            _err(
                f"service expects {session.descriptor.input_element.tag}, "
                f"not {element.tag}"
            )
            return 5
        try:
            session.send(frame)
            session.finish()
            results = session.receive_all(args.timeout_millis)
        except WrongElementType as exc:
            _err(str(exc))
            return 5
        except GridPipeError as exc:
            _err(str(exc))
            return 4

    if len(results) != 1:
        _err(f"expected one result frame, got {len(results)}")
        return 4
    try:
        Path(args.output).write_bytes(pack_elements(session.descriptor.output_element, results[0]))
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return 1
    return 0


# -- bench ---------------------------------------------------------------------

def _synthetic_frame(element: ElementType, size: int):
    if element is ElementType.FLOAT_64:
        return tuple(float((i * 7 + 3) % 251) for i in range(size))
    if element is ElementType.SIGNED_INT_32:
        return tuple((i * 31 + 5) % 1009 for i in range(size))
    return bytes((i * 7 + 3) % 256 for i in range(size))


def _bench_pass(module, registry, policy: MatchPolicy, frames: int, frame_size: int):
    """Run the chain under one forced policy; per-shell computeCycles totals."""
    deployment = deploy(plan(module, registry.snapshot(), policy), registry)
    deployment.start()
    try:
        frame = _synthetic_frame(module.input_element, frame_size)
        totals = {s.id: 0 for s in module.processing_shells}
        for _ in range(frames):
            _out, steps = deployment.process_frame_per_shell(frame)
            for shell_id, step in steps:
                totals[shell_id] += step.compute_cycles
        return totals, deployment.configure_report.reconfig_cycles
    finally:
        deployment.stop()


def cmd_bench(args) -> int:
    try:
        config = load_server_config(args.config)
    except GridPipeError as exc:
        _err(f"config error: {exc}")
        return 1
    try:
        registry = _build_registry(config)
        module = _load_module(args.manifest, registry)
    except GridPipeError as exc:
        _err(f"manifest error: {exc}")
        return 2

    frames, size = args.frames, args.frame_size
    types_present = {d.processor_type for d in registry.snapshot()}
    passes = [(PROCESSOR_CPU, MatchPolicy((PROCESSOR_CPU,)))]
    if PROCESSOR_SIMFPGA in types_present:
        passes.append((PROCESSOR_SIMFPGA, MatchPolicy((PROCESSOR_SIMFPGA,))))

    totals = {}
    reconfig = {}
    try:
        for label, policy in passes:
            totals[label], reconfig[label] = _bench_pass(module, registry, policy, frames, size)
    except (NoCompatibleImplementation, InsufficientProcessors) as exc:
        _err(f"matching error: {exc}")
        return 2

    shells = [s for s in module.processing_shells]
    labels = [label for label, _ in passes]
    header = f"{'shell':<16}{'kind':<24}" + "".join(f"{label + ' cycles':>18}" for label in labels)
    print(f"frames={frames} frame-size={size}")
    print(header)
    for shell in shells:
        row = f"{shell.id:<16}{shell.kind:<24}"
        row += "".join(f"{totals[label][shell.id]:>18}" for label in labels)
        print(row)
    grand = {label: sum(totals[label].values()) for label in labels}
    print(f"{'total':<16}{'':<24}" + "".join(f"{grand[label]:>18}" for label in labels))
    for label in labels:
        print(f"reconfig cycles ({label}): {reconfig[label]}")
    if len(labels) == 2 and grand[PROCESSOR_SIMFPGA] > 0:
        cpu_total, fpga_total = grand[PROCESSOR_CPU], grand[PROCESSOR_SIMFPGA]
        print(f"speedup: {cpu_total}/{fpga_total} ≈ {cpu_total / fpga_total:.1f}")
    return 0


# -- list ----------------------------------------------------------------------

def cmd_list(args) -> int:
    base = args.url_base.rstrip("/")
    try:
        resp = httpx.get(f"{base}{BASE_PATH}/", timeout=5.0)
        names = resp.json()
        if resp.status_code != 200 or not isinstance(names, list):
            raise ValueError(f"unexpected response (HTTP {resp.status_code})")
    except (httpx.HTTPError, ValueError) as exc:
        _err(f"cannot list services: {exc}")
        return 4
    for name in names:
        print(name)
    return 0


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridpipe",
        description="Deploy processing pipelines onto virtual processors and "
        "publish them as named network services.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="host configured modules as services")
    p_serve.add_argument("config", help="server config JSON path")
    p_serve.set_defaults(func=cmd_serve)

    p_invoke = sub.add_parser("invoke", help="run one file through a remote service")
    p_invoke.add_argument("url", help="full service URL")
    p_invoke.add_argument("--input", required=True, help="raw little-endian input file")
    p_invoke.add_argument("--output", required=True, help="raw little-endian output file")
    p_invoke.add_argument("--type", required=True, choices=sorted(TYPE_FLAGS))
    p_invoke.add_argument("--timeout-millis", type=int, default=30_000)
    p_invoke.set_defaults(func=cmd_invoke)

    p_bench = sub.add_parser("bench", help="compare cpu and simfpga cycle counts locally")
    p_bench.add_argument("config", help="server config JSON path (backends are used)")
    p_bench.add_argument("manifest", help="module manifest path")
    p_bench.add_argument("--frames", type=int, default=1)
    p_bench.add_argument("--frame-size", type=int, default=4096)
    p_bench.set_defaults(func=cmd_bench)

    p_list = sub.add_parser("list", help="print exposed service names")
    p_list.add_argument("url_base", help="http://host:port")
    p_list.set_defaults(func=cmd_list)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
