#!/usr/bin/env python3
"""Host the demo module in-process and stream a frame through it remotely.

Loads manifests/server_config.json and manifests/demo_module.json, deploys
the chain onto the configured backends, exposes it as a grid service, then
drives it through the client SDK and prints what came back.
"""

from pathlib import Path

from gridpipe import (
    VpRegistry,
    builtin_library,
    deploy,
    load_server_config,
    parse_module_spec,
    plan,
    validate_module,
)
from gridpipe.client import connect
from gridpipe.service import start_container

ROOT = Path(__file__).resolve().parent.parent


def main():
    config = load_server_config(ROOT / "manifests" / "server_config.json")
    library = builtin_library()
    registry = VpRegistry(library)
    for backend in config.backends:
        registry.register_ham(backend)
    registry.register_ham({"type": "grid", "slots": 2})

    module = validate_module(
        parse_module_spec(Path(config.modules[0]).read_text()), library
    )
    deployment = deploy(plan(module, registry.snapshot()), registry)
    container = start_container(config.bind_host, 0)  # ephemeral port for the demo
    (url,) = deployment.start(container)
    print(f"exposed: {url.render()}")
    print(f"bindings: {[(b.shell_id, b.vp_id) for b in deployment.plan.bindings]}")

    frame = [float(i % 8) for i in range(16)]
    with connect(url.render()) as session:
        print(f"descriptor: in={session.descriptor.input_element.tag} "
              f"out={session.descriptor.output_element.tag}")
        session.send(frame)
        session.finish()
        (result,) = session.receive_all(10_000)

    print(f"sent:     {frame}")
    print(f"received: {[round(x, 3) for x in result]}")

    local, report = deployment.process_frame(frame)
    assert list(local) == list(result)
    print(f"cycles for one local frame: compute={report.compute_cycles} "
          f"(reconfig paid at deploy: {deployment.configure_report.reconfig_cycles})")

    deployment.stop()
    container.close()


if __name__ == "__main__":
    main()
