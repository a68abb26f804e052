import json
import signal
import socket
import subprocess
import sys
import time

import pytest

from gridpipe import VpRegistry, builtin_library, parse_module_spec, validate_module


BUILTIN_IMPLS = {
    "passthrough": {"cpu": "passthrough@cpu", "simfpga": "passthrough@simfpga"},
    "scale": {"cpu": "scale@cpu", "simfpga": "scale@simfpga"},
    "offset": {"cpu": "offset@cpu", "simfpga": "offset@simfpga"},
    "fir": {"cpu": "fir@cpu", "simfpga": "fir@simfpga"},
    "saturating-scale-i32": {
        "cpu": "saturating-scale-i32@cpu",
        "simfpga": "saturating-scale-i32@simfpga",
    },
}


def shell_obj(shell_id, kind, params=None, impls=None):
    obj = {"id": shell_id, "kind": kind, "params": params or {}}
    if kind != "grid-endpoint":
        obj["implementations"] = impls if impls is not None else dict(BUILTIN_IMPLS[kind])
    elif impls is not None:
        obj["implementations"] = impls
    return obj


def chain_manifest(name, shells, *, connect=True):
    """Manifest JSON for a linear chain; connections follow list order."""
    connections = []
    if connect:
        for up, down in zip(shells, shells[1:]):
            connections.append({"from": f"{up['id']}.out", "to": f"{down['id']}.in"})
    return json.dumps({"name": name, "shells": shells, "connections": connections})


def service_chain(name, processing_shells, service_name="MyGridService"):
    """A chain wrapped in gridIn/gridOut endpoints, named on the input side."""
    shells = [
        shell_obj("gridIn", "grid-endpoint", {"serviceInstanceName": service_name}),
        *processing_shells,
        shell_obj("gridOut", "grid-endpoint"),
    ]
    return chain_manifest(name, shells)


@pytest.fixture(scope="session")
def library():
    return builtin_library()


@pytest.fixture
def registry(library):
    reg = VpRegistry(library)
    reg.register_ham({"type": "cpu", "slots": 4})
    reg.register_ham(
        {
            "type": "simfpga",
            "devices": [
                {"lanes": 64, "pipelineDepth": 8, "reconfigCycles": 1000},
                {"lanes": 16, "pipelineDepth": 4, "reconfigCycles": 500},
                {"lanes": 4, "pipelineDepth": 2, "reconfigCycles": 100},
                {"lanes": 1, "pipelineDepth": 0, "reconfigCycles": 10},
            ],
        }
    )
    reg.register_ham({"type": "grid", "slots": 2})
    return reg


def validated(manifest_text, library):
    return validate_module(parse_module_spec(manifest_text), library)


# -- serve-subprocess helpers -----------------------------------------------------

SERVE_CMD = [sys.executable, "-m", "gridpipe", "serve"]


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def write_config(tmp_path, port, backends=None, modules=()):
    backends = backends or [
        {"type": "cpu", "slots": 4},
        {"type": "simfpga", "devices": [{"lanes": 64, "pipelineDepth": 8, "reconfigCycles": 1000}]},
    ]
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {"bindHost": "127.0.0.1", "port": port, "backends": backends, "modules": list(modules)}
        )
    )
    return path


def write_manifest(tmp_path, text, name="module.json"):
    path = tmp_path / name
    path.write_text(text)
    return path


class ServeProcess:
    """`gridpipe serve` in a subprocess; collects the printed service URLs."""

    def __init__(self, config_path, expect_urls=1, timeout=30):
        self.proc = subprocess.Popen(
            SERVE_CMD + [str(config_path)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        self.urls = []
        deadline = time.monotonic() + timeout
        while len(self.urls) < expect_urls:
            if time.monotonic() > deadline:
                self.kill()
                raise AssertionError(f"serve printed {self.urls!r}, expected {expect_urls} urls")
            line = self.proc.stdout.readline()
            if not line:
                break
            self.urls.append(line.strip())

    def interrupt(self) -> int:
        self.proc.send_signal(signal.SIGINT)
        return self.proc.wait(timeout=10)

    def kill(self):
        self.proc.kill()
        self.proc.wait(timeout=10)
