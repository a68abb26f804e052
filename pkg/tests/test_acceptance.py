"""Acceptance suite: one test per exit criterion, each printing PASS or FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines inline. Every tolerance here is exact (bit equality or exact integer
cycle counts).
"""

import json
import random
import struct
from contextlib import contextmanager

import httpx
import pytest

from conftest import (
    ServeProcess,
    service_chain,
    shell_obj,
    validated,
    write_config,
    write_manifest,
)
from gridpipe import builtin_library, deploy, plan
from gridpipe.cli import main as cli_main
from gridpipe.client import connect
from gridpipe.errors import (
    InsufficientProcessors,
    NameCollision,
    NoCompatibleImplementation,
    StaleLease,
)
from gridpipe.ham import VpRegistry, VirtualProcessorDescriptor
from gridpipe.model import ElementType, parse_module_spec, validate_module
from gridpipe.service import ERROR_STATUS, ServiceUrl, start_container
from gridpipe.wire import decode_payload, encode_payload, float_bits
from matching_oracle import enumerate_registries, enumerate_shell_type_sets, greedy_reference
from test_ham import run_equivalence_cases

CANONICAL_URL = "http://127.0.0.1:8080/ogsa/services/proteusgrid/ProteusGridService/MyGridService"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


# -- 1. URL exactness --------------------------------------------------------------


def test_url_exactness(library, registry):
    with criterion("url-exactness"):
        rendered = ServiceUrl("127.0.0.1", 8080, "MyGridService").render()
        assert rendered.encode("ascii") == CANONICAL_URL.encode("ascii")

        module = validated(service_chain("m", [shell_obj("s", "scale", {"gain": 3.0})]), library)
        deployment = deploy(plan(module, registry.snapshot()), registry)
        with start_container("127.0.0.1", 8080) as container:
            (url,) = deployment.start(container)
            assert url.render().encode("ascii") == CANONICAL_URL.encode("ascii")
            assert httpx.get(CANONICAL_URL).status_code == 200
            deployment.stop()


# -- 2. Oracle equivalence ----------------------------------------------------------


def test_oracle_equivalence_suite():
    with criterion("oracle-equivalence"):
        checked = run_equivalence_cases(cases_per_kind=200, max_n=4096, seed=20260810)
        assert checked == 1000  # 200 randomized cases for each of the 5 kinds


# -- 3. End-to-end loopback ----------------------------------------------------------


def _random_float_chain(rnd, index):
    lib = builtin_library()
    shells = []
    stages = []
    for i in range(rnd.randint(1, 4)):
        kind = rnd.choice(["scale", "offset", "fir", "passthrough"])
        if kind == "scale":
            params = {"gain": rnd.uniform(-3, 3)}
        elif kind == "offset":
            params = {"delta": rnd.uniform(-3, 3)}
        elif kind == "fir":
            params = {"coefficients": [rnd.uniform(-1, 1) for _ in range(rnd.randint(1, 6))]}
        else:
            params = {}
        shells.append(shell_obj(f"s{i}", kind, params))
        stages.append((kind, {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}))
    # Anchor the chain type: an all-passthrough chain would resolve to bytes.
    shells.append(shell_obj("anchor", "scale", {"gain": 1.0}))
    stages.append(("scale", {"gain": 1.0}))

    def reference(frame):
        current = tuple(frame)
        for kind, params in stages:
            current = lib.apply_reference(kind, params, current)
        return current

    return service_chain(f"mod{index}", shells, service_name=f"Svc{index:03d}"), reference


def test_end_to_end_loopback(tmp_path):
    with criterion("end-to-end-loopback"):
        rnd = random.Random(424242)
        n_chains = 50
        references = []
        module_files = []
        for i in range(n_chains):
            manifest, reference = _random_float_chain(rnd, i)
            path = write_manifest(tmp_path, manifest, name=f"mod{i}.json")
            module_files.append(path.name)
            references.append(reference)

        backends = [
            {"type": "cpu", "slots": 400},
            {
                "type": "simfpga",
                "devices": [
                    {"lanes": 1 << (i % 7), "pipelineDepth": i % 9, "reconfigCycles": 50}
                    for i in range(400)
                ],
            },
        ]
        from conftest import free_port

        config = write_config(tmp_path, free_port(), backends=backends, modules=module_files)
        server = ServeProcess(config, expect_urls=n_chains, timeout=60)
        try:
            assert len(server.urls) == n_chains
            for i, url in enumerate(server.urls):
                frames = [
                    [rnd.uniform(-50, 50) for _ in range(rnd.randint(0, 128))]
                    for _ in range(rnd.randint(1, 3))
                ]
                with connect(url) as session:
                    for frame in frames:
                        session.send(frame)
                    session.finish()
                    results = session.receive_all(20_000)
                    status = session.status()
                # FIFO: result k is the chain applied to input k, bit for bit.
                assert len(results) == len(frames)
                for frame, got in zip(frames, results):
                    expected = references[i](frame)
                    assert [float_bits(x) for x in got] == [float_bits(x) for x in expected]
                assert status["state"] == "closed"  # eos delivered
            assert server.interrupt() == 0
        finally:
            if server.proc.poll() is None:
                server.kill()


# -- 4. Matching correctness ----------------------------------------------------------


def _chain_module_for(shell_types, library):
    shells = []
    for i, types in enumerate(shell_types):
        impls = {t: f"scale@{t}" for t in sorted(types)}
        shells.append(shell_obj(f"s{i}", "scale", {"gain": 1.0}, impls=impls))
    doc = {
        "name": "m",
        "shells": shells,
        "connections": [
            {"from": f"s{i}.out", "to": f"s{i + 1}.in"} for i in range(len(shells) - 1)
        ],
    }
    return validate_module(parse_module_spec(json.dumps(doc)), library)


def test_matching_correctness_brute_force(library):
    with criterion("matching-correctness"):
        priority = ("simfpga", "cpu")
        modules = {}
        for shell_types in enumerate_shell_type_sets(4):
            modules[tuple(shell_types)] = _chain_module_for(shell_types, library)

        cases = 0
        for vps in enumerate_registries(4):
            snapshot = [
                VirtualProcessorDescriptor(
                    vp_id=vp_id,
                    processor_type=ptype,
                    state="idle" if idle else "busy",
                    lanes=8 if ptype == "simfpga" else None,
                    pipeline_depth=0 if ptype == "simfpga" else None,
                    reconfig_cycles=0 if ptype == "simfpga" else None,
                )
                for vp_id, ptype, idle in vps
            ]
            for shell_types, module in modules.items():
                expected = greedy_reference(shell_types, vps, priority)
                try:
                    got_plan = plan(module, snapshot)
                    got = ("ok", [b.vp_id for b in got_plan.bindings])
                except NoCompatibleImplementation as exc:
                    got = ("no-compat", int(exc.shell_id[1:]))
                except InsufficientProcessors as exc:
                    got = ("exhausted", int(exc.shell_id[1:]))
                assert got == expected, (vps, shell_types)

                if got[0] == "ok":
                    # Greedy optimality: at each step no strictly higher-priority
                    # type had an unconsumed idle processor available.
                    consumed = set()
                    for types, picked_id in zip(shell_types, got[1]):
                        picked_type = next(p for v, p, _ in vps if v == picked_id)
                        for better in priority:
                            if better == picked_type:
                                break
                            if better in types:
                                available = [
                                    v for v, p, idle in vps
                                    if p == better and idle and v not in consumed
                                ]
                                assert not available, (vps, shell_types, picked_id)
                        consumed.add(picked_id)
                cases += 1
        assert cases == 70 * 120  # registries x chains actually enumerated


# -- 5. Speedup model ------------------------------------------------------------------


def test_speedup_model_reproduction(tmp_path, capsys):
    with criterion("speedup-model"):
        manifest = write_manifest(
            tmp_path, service_chain("m", [shell_obj("f", "fir", {"coefficients": [0.5] * 16})])
        )
        from conftest import free_port

        config = write_config(tmp_path, free_port())
        code = cli_main(
            ["bench", str(config), str(manifest), "--frames", "1", "--frame-size", "4096"]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "speedup: 65536/72 ≈ 910.2" in out
        assert 65536 / 72 >= 100  # at least two orders of magnitude

        # Cost-model identity on 100 random (n, K, L, D) tuples, exact in
        # integer cycle counts measured from execute_block.
        rnd = random.Random(5150)
        lib = builtin_library()
        for _ in range(100):
            n = rnd.randint(0, 1024)
            k = rnd.randint(1, 24)
            lanes = rnd.randint(1, 256)
            depth = rnd.randint(0, 32)
            params = {"coefficients": tuple(rnd.uniform(-1, 1) for _ in range(k))}
            frame = [rnd.uniform(-1, 1) for _ in range(n)]

            reg = VpRegistry(lib)
            reg.register_ham({"type": "cpu", "slots": 1})
            reg.register_ham(
                {
                    "type": "simfpga",
                    "devices": [{"lanes": lanes, "pipelineDepth": depth, "reconfigCycles": 1}],
                }
            )
            cpu = reg.acquire("cpu-0000")
            cpu.configure(lib.find_implementation("fir", "cpu"), params)
            _, cpu_report = cpu.execute_block(frame)
            fpga = reg.acquire("simfpga-0000")
            fpga.configure(lib.find_implementation("fir", "simfpga"), params)
            _, fpga_report = fpga.execute_block(frame)

            assert cpu_report.compute_cycles == n * k
            assert fpga_report.compute_cycles == depth + -(-n // lanes)


# -- 6. Protocol robustness ---------------------------------------------------------------


def test_protocol_robustness(library, registry):
    with criterion("protocol-robustness"):
        assert ERROR_STATUS["SequenceGap"] == 400
        assert ERROR_STATUS["InputClosed"] == 409
        assert ERROR_STATUS["NameCollision"] == 409
        assert ERROR_STATUS["NotFound"] == 404
        assert ERROR_STATUS["UnknownSubscription"] == 404
        assert ERROR_STATUS["InvalidName"] == 400

        module = validated(service_chain("m", [shell_obj("s", "scale", {"gain": 2.0})]), library)
        deployment = deploy(plan(module, registry.snapshot()), registry)
        with start_container("127.0.0.1", 0) as container:
            (url,) = deployment.start(container)
            base = url.render()
            payload = encode_payload(ElementType.FLOAT_64, [1.0])

            # NotFound over the wire
            missing = httpx.get(base.replace("MyGridService", "Ghost"))
            assert missing.status_code == 404 and missing.json()["error"] == "NotFound"

            sub = httpx.post(f"{base}/subscribe", json={}).json()["subId"]

            # SequenceGap over the wire
            httpx.post(f"{base}/push", json={"subId": sub, "seq": 0, "payload": payload, "eos": False})
            gap = httpx.post(f"{base}/push", json={"subId": sub, "seq": 5, "payload": payload, "eos": False})
            assert gap.status_code == 400 and gap.json()["error"] == "SequenceGap"

            # InputClosed over the wire
            httpx.post(f"{base}/push", json={"subId": sub, "seq": 1, "payload": "", "eos": True})
            closed = httpx.post(f"{base}/push", json={"subId": sub, "seq": 2, "payload": payload, "eos": False})
            assert closed.status_code == 409 and closed.json()["error"] == "InputClosed"

            # NameCollision from the expose surface
            with pytest.raises(NameCollision):
                container.expose(deployment, "MyGridService")

            deployment.stop()

        # Stale lease: any use after release
        lease = registry.acquire("cpu-0000")
        lease.release()
        with pytest.raises(StaleLease):
            lease.release()
        with pytest.raises(StaleLease):
            lease.execute_block([1.0])


# -- 7. Wire round-trip ----------------------------------------------------------------------


def test_wire_roundtrip_bit_patterns():
    with criterion("wire-roundtrip"):
        nan_patterns = [
            b"\x00\x00\x00\x00\x00\x00\xf8\x7f",  # quiet nan
            b"\x00\x00\x00\x00\x00\x00\xf8\xff",  # negative quiet nan
            b"\x01\x00\x00\x00\x00\x00\xf0\x7f",  # nan with payload
            b"\xff\xff\xff\xff\xff\xff\xff\x7f",  # all-ones payload
        ]
        specials = [struct.unpack("<d", p)[0] for p in nan_patterns]
        specials += [0.0, -0.0, 5e-324, 1.5e-310, 2.2250738585072009e-308, 1.0, -1.0]
        out = decode_payload(ElementType.FLOAT_64, encode_payload(ElementType.FLOAT_64, specials))
        assert [float_bits(x) for x in out] == [float_bits(x) for x in specials]

        extremes = [-(2**31), 2**31 - 1, 0, -1, 1]
        got = decode_payload(
            ElementType.SIGNED_INT_32, encode_payload(ElementType.SIGNED_INT_32, extremes)
        )
        assert list(got) == extremes

        blob = bytes(range(256))
        assert decode_payload(ElementType.OPAQUE_BYTES, encode_payload(ElementType.OPAQUE_BYTES, blob)) == blob
