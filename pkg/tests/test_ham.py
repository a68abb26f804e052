import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridpipe.algorithms import builtin_library
from gridpipe.errors import (
    DuplicateVpId,
    NotConfigured,
    NotIdle,
    ProcessorTypeMismatch,
    SchemaError,
    StaleLease,
    UnknownBackend,
    UnknownVp,
)
from gridpipe.ham import VpRegistry, cpu_compute_cycles, model_speedup, simfpga_compute_cycles
from gridpipe.wire import float_bits


def fresh_registry():
    return VpRegistry(builtin_library())


def one_fpga(lanes=64, depth=8, reconfig=1000):
    reg = fresh_registry()
    (desc,) = reg.register_ham(
        {"type": "simfpga", "devices": [{"lanes": lanes, "pipelineDepth": depth, "reconfigCycles": reconfig}]}
    )
    return reg, desc


def test_register_cpu_backend():
    reg = fresh_registry()
    descs = reg.register_ham({"type": "cpu", "slots": 2})
    assert [d.vp_id for d in descs] == ["cpu-0000", "cpu-0001"]
    assert all(d.state == "idle" and d.processor_type == "cpu" for d in descs)


def test_register_simfpga_backend():
    _reg, desc = one_fpga()
    assert (desc.lanes, desc.pipeline_depth, desc.reconfig_cycles) == (64, 8, 1000)
    assert desc.state == "idle"


def test_register_same_backend_twice_collides():
    reg = fresh_registry()
    reg.register_ham({"type": "cpu", "slots": 2})
    with pytest.raises(DuplicateVpId):
        reg.register_ham({"type": "cpu", "slots": 1})


def test_unknown_backend():
    with pytest.raises(UnknownBackend):
        fresh_registry().register_ham({"type": "quantum", "slots": 1})
    with pytest.raises(SchemaError):
        fresh_registry().register_ham({"type": "simfpga", "devices": [{"lanes": 0, "pipelineDepth": 1, "reconfigCycles": 1}]})


def test_acquire_is_exclusive():
    reg, desc = one_fpga()
    lease = reg.acquire(desc.vp_id)
    with pytest.raises(NotIdle):
        reg.acquire(desc.vp_id)
    lease.release()
    assert reg.descriptor(desc.vp_id).state == "idle"
    reg.acquire(desc.vp_id)  # idle again


def test_acquire_unknown_vp():
    with pytest.raises(UnknownVp):
        fresh_registry().acquire("cpu-0000")


def test_release_twice_is_stale():
    reg, desc = one_fpga()
    lease = reg.acquire(desc.vp_id)
    lease.release()
    with pytest.raises(StaleLease):
        lease.release()
    with pytest.raises(StaleLease):
        lease.execute_block([1.0])


def scale_impl(reg, ptype="simfpga"):
    return reg.library.find_implementation("scale", ptype)


def test_configure_charges_reconfig_on_artifact_change():
    reg, desc = one_fpga(reconfig=1000)
    lease = reg.acquire(desc.vp_id)
    first = lease.configure(scale_impl(reg), {"gain": 2.0})
    assert first.reconfig_cycles == 1000
    again = lease.configure(scale_impl(reg), {"gain": 5.0})
    assert again.reconfig_cycles == 0  # same artifact; params are registers
    other = lease.configure(reg.library.find_implementation("fir", "simfpga"), {"coefficients": (1.0,)})
    assert other.reconfig_cycles == 1000


def test_configure_after_release_pays_reconfig_again():
    reg, desc = one_fpga(reconfig=77)
    lease = reg.acquire(desc.vp_id)
    assert lease.configure(scale_impl(reg), {"gain": 2.0}).reconfig_cycles == 77
    lease.release()
    lease2 = reg.acquire(desc.vp_id)
    assert lease2.configure(scale_impl(reg), {"gain": 2.0}).reconfig_cycles == 77


def test_cpu_configure_is_free():
    reg = fresh_registry()
    (desc,) = reg.register_ham({"type": "cpu", "slots": 1})
    lease = reg.acquire(desc.vp_id)
    assert lease.configure(scale_impl(reg, "cpu"), {"gain": 2.0}).reconfig_cycles == 0


def test_configure_type_mismatch():
    reg, desc = one_fpga()
    lease = reg.acquire(desc.vp_id)
    with pytest.raises(ProcessorTypeMismatch):
        lease.configure(scale_impl(reg, "cpu"), {"gain": 2.0})


def test_execute_requires_configuration():
    reg, desc = one_fpga()
    lease = reg.acquire(desc.vp_id)
    with pytest.raises(NotConfigured):
        lease.execute_block([1.0])


def test_simfpga_cycle_example():
    reg, desc = one_fpga(lanes=64, depth=8)
    lease = reg.acquire(desc.vp_id)
    lease.configure(scale_impl(reg), {"gain": 1.0})
    _out, report = lease.execute_block([0.0] * 4096)
    assert report.compute_cycles == 72  # 8 + 4096/64
    assert report.elements_processed == 4096


def test_cpu_fir_cycle_example():
    reg = fresh_registry()
    (desc,) = reg.register_ham({"type": "cpu", "slots": 1})
    lease = reg.acquire(desc.vp_id)
    lease.configure(
        reg.library.find_implementation("fir", "cpu"), {"coefficients": tuple(float(i) for i in range(16))}
    )
    _out, report = lease.execute_block([0.0] * 4096)
    assert report.compute_cycles == 4096 * 16


def test_empty_frame_costs():
    reg, desc = one_fpga(lanes=64, depth=8)
    lease = reg.acquire(desc.vp_id)
    lease.configure(scale_impl(reg), {"gain": 1.0})
    out, report = lease.execute_block([])
    assert out == () and report.compute_cycles == 8

    cpu = fresh_registry()
    (cdesc,) = cpu.register_ham({"type": "cpu", "slots": 1})
    clease = cpu.acquire(cdesc.vp_id)
    clease.configure(scale_impl(cpu, "cpu"), {"gain": 1.0})
    out, report = clease.execute_block([])
    assert out == () and report.compute_cycles == 0


# -- oracle equivalence -----------------------------------------------------------

KIND_PARAMS = {
    "passthrough": lambda rnd: {},
    "scale": lambda rnd: {"gain": rnd.uniform(-10, 10)},
    "offset": lambda rnd: {"delta": rnd.uniform(-10, 10)},
    "fir": lambda rnd: {"coefficients": tuple(rnd.uniform(-2, 2) for _ in range(rnd.randint(1, 12)))},
    "saturating-scale-i32": lambda rnd: {"gain": rnd.randint(-(2**33), 2**33)},
}


def random_frame(kind, rnd, n):
    if kind == "saturating-scale-i32":
        return [rnd.randint(-(2**31), 2**31 - 1) for _ in range(n)]
    return [rnd.uniform(-1e6, 1e6) for _ in range(n)]


def as_bits(seq):
    if isinstance(seq, bytes):
        return seq
    return [float_bits(x) if isinstance(x, float) else x for x in seq]


def run_equivalence_cases(cases_per_kind, max_n, seed):
    """Shared driver for the oracle-equivalence suite (also used in acceptance)."""
    import random

    rnd = random.Random(seed)
    lib = builtin_library()
    reg = VpRegistry(lib)
    reg.register_ham({"type": "cpu", "slots": 1})
    lane_widths = [1, 3, 16, 64, 4096]
    reg.register_ham(
        {
            "type": "simfpga",
            "devices": [
                {"lanes": lanes, "pipelineDepth": 8, "reconfigCycles": 10}
                for lanes in lane_widths
            ],
        }
    )
    cpu_lease = reg.acquire("cpu-0000")
    fpga_leases = [reg.acquire(f"simfpga-{i:04d}") for i in range(len(lane_widths))]
    checked = 0
    for kind_name in KIND_PARAMS:
        for case in range(cases_per_kind):
            params = KIND_PARAMS[kind_name](rnd)
            frame = random_frame(kind_name, rnd, rnd.randint(0, max_n))
            expected = as_bits(lib.apply_reference(kind_name, params, frame))
            fpga_lease = fpga_leases[case % len(fpga_leases)]  # rotate lane widths
            for ptype, lease in (("cpu", cpu_lease), ("simfpga", fpga_lease)):
                lease.configure(lib.find_implementation(kind_name, ptype), params)
                out, _report = lease.execute_block(frame)
                assert as_bits(out) == expected, (kind_name, ptype, params)
            checked += 1
    return checked


def test_execute_block_matches_reference_bit_for_bit():
    assert run_equivalence_cases(cases_per_kind=40, max_n=512, seed=1234) == 200


# -- cost model properties ---------------------------------------------------------

@given(
    n=st.integers(min_value=0, max_value=10**6),
    lanes=st.integers(min_value=1, max_value=4096),
    depth=st.integers(min_value=0, max_value=64),
)
def test_simfpga_cycles_monotone_in_n(n, lanes, depth):
    assert simfpga_compute_cycles(n + 1, lanes, depth) >= simfpga_compute_cycles(n, lanes, depth)


@given(
    n=st.integers(min_value=0, max_value=10**6),
    lanes=st.integers(min_value=1, max_value=4095),
    depth=st.integers(min_value=0, max_value=64),
)
def test_simfpga_cycles_non_increasing_in_lanes(n, lanes, depth):
    assert simfpga_compute_cycles(n, lanes + 1, depth) <= simfpga_compute_cycles(n, lanes, depth)


def test_model_speedup_headline_figure():
    assert cpu_compute_cycles(4096, 16) == 65536
    assert simfpga_compute_cycles(4096, 64, 8) == 72
    assert model_speedup(4096, 16, 64, 8) == 65536 / 72


def test_no_two_leases_coexist_under_contention():
    reg, desc = one_fpga()
    holders = []
    lock = threading.Lock()
    errors = []

    def worker():
        for _ in range(50):
            try:
                lease = reg.acquire(desc.vp_id)
            except NotIdle:
                continue
            with lock:
                holders.append(1)
                if len(holders) > 1:
                    errors.append("two leases at once")
            with lock:
                holders.pop()
            lease.release()

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
