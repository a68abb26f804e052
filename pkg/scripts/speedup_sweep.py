#!/usr/bin/env python3
"""Sweep the cycle model over frame size, tap count, lanes, and depth.

Prints the modelled cpu/simfpga cycle counts and their ratio for a grid of
configurations, plus the headline point (n=4096, K=16, L=64, D=8).
"""

import argparse

from gridpipe.ham import cpu_compute_cycles, model_speedup, simfpga_compute_cycles


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    parser.add_argument("--taps", type=int, nargs="+", default=[4, 16, 64])
    parser.add_argument(
        "--devices",
        nargs="+",
        default=["16:4", "64:8", "256:12"],
        help="lanes:pipelineDepth pairs",
    )
    args = parser.parse_args()

    devices = []
    for spec in args.devices:
        lanes, depth = spec.split(":")
        devices.append((int(lanes), int(depth)))

    header = f"{'n':>8}{'K':>6}" + "".join(f"{f'L={l},D={d}':>16}" for l, d in devices)
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        for k in args.taps:
            row = f"{n:>8}{k:>6}"
            for lanes, depth in devices:
                row += f"{model_speedup(n, k, lanes, depth):>15.1f}x"
            print(row)

    n, k, lanes, depth = 4096, 16, 64, 8
    cpu = cpu_compute_cycles(n, k)
    fpga = simfpga_compute_cycles(n, lanes, depth)
    print()
    print(
        f"headline point n={n} K={k} L={lanes} D={depth}: "
        f"{cpu}/{fpga} ≈ {cpu / fpga:.1f}x"
    )


if __name__ == "__main__":
    main()
